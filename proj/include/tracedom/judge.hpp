#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tracedom/error.hpp"
#include "tracedom/trace.hpp"

namespace tracedom {

enum class Confidence { High, Medium, Low };

inline std::string_view to_string(Confidence c) {
  switch (c) {
    case Confidence::High: return "high";
    case Confidence::Medium: return "medium";
    case Confidence::Low: return "low";
  }
  return "low";
}

/// Outbound Tier-2 prompt, sent byte-for-byte with every remote request.
/// Note the polarity: `"equivalent": true` means the differences are NOT
/// meaningful, i.e. the two screenshots are the same logical state.
inline constexpr std::string_view kEquivalencePrompt =
    "Compare these two UI screenshots side-by-side.\n"
    "Are the differences semantically meaningful?\n"
    "\n"
    "Examples of NOT meaningful:\n"
    "- Different window decorations\n"
    "- Minor font rendering differences\n"
    "- Timestamp changes\n"
    "\n"
    "Examples of MEANINGFUL:\n"
    "- Different form validation errors\n"
    "- Different data displayed\n"
    "- Different UI controls available\n"
    "\n"
    "Please analyze the images and respond with:\n"
    "1. Whether the differences are semantically meaningful (Yes/No)\n"
    "2. A brief explanation of the key differences\n"
    "3. Your confidence level in this assessment\n"
    "\n"
    "Response format:\n"
    "{\n"
    "  \"equivalent\": true/false,\n"
    "  \"explanation\": \"...\",\n"
    "  \"confidence\": \"high/medium/low\"\n"
    "}\n";

struct SemanticJudgment {
  bool equivalent = false;
  std::string explanation;
  Confidence confidence = Confidence::Low;

  friend bool operator==(const SemanticJudgment&, const SemanticJudgment&) = default;
};

/// Parses a judge response. All three fields are mandatory and typed; any
/// deviation is a protocol error rather than a defaulted value.
inline SemanticJudgment parse_judgment(std::string_view body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::JudgeProtocol, std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::JudgeProtocol, "response is not a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "equivalent" && key != "explanation" && key != "confidence") {
      throw Error(ErrorCode::JudgeProtocol, "unexpected field '" + key + "'");
    }
  }
  auto field = [&](const char* key) -> const nlohmann::json& {
    auto it = doc.find(key);
    if (it == doc.end()) throw Error(ErrorCode::JudgeProtocol, std::string("missing field '") + key + "'");
    return *it;
  };
  const auto& eq = field("equivalent");
  const auto& ex = field("explanation");
  const auto& co = field("confidence");
  if (!eq.is_boolean()) throw Error(ErrorCode::JudgeProtocol, "'equivalent' must be a boolean");
  if (!ex.is_string()) throw Error(ErrorCode::JudgeProtocol, "'explanation' must be a string");
  if (!co.is_string()) throw Error(ErrorCode::JudgeProtocol, "'confidence' must be a string");

  SemanticJudgment j;
  j.equivalent = eq.get<bool>();
  j.explanation = ex.get<std::string>();
  const auto c = co.get<std::string>();
  if (c == "high") {
    j.confidence = Confidence::High;
  } else if (c == "medium") {
    j.confidence = Confidence::Medium;
  } else if (c == "low") {
    j.confidence = Confidence::Low;
  } else {
    throw Error(ErrorCode::JudgeProtocol, "'confidence' must be high, medium or low");
  }
  return j;
}

inline std::string judgment_json(const SemanticJudgment& j) {
  nlohmann::json doc;
  doc["equivalent"] = j.equivalent;
  doc["explanation"] = j.explanation;
  doc["confidence"] = std::string(to_string(j.confidence));
  return doc.dump();
}

enum class JudgeMode { Mock, Remote };

struct JudgeConfig {
  JudgeMode mode = JudgeMode::Mock;
  std::string endpoint;                   // e.g. http://127.0.0.1:8080/judge
  std::string token_env = "JUDGE_TOKEN";  // name of the variable holding the bearer token
  double timeout_seconds = 30.0;
  int max_retries = 3;
  double backoff_base_seconds = 1.0;
  int max_in_flight = 4;
  std::string cosmetic_separator = "#";   // mock mode only

  void validate() const {
    if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidConfig, "judge timeout must be positive");
    if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, "judge retries must be >= 0");
    if (max_in_flight < 1) throw Error(ErrorCode::InvalidConfig, "judge concurrency cap must be >= 1");
    if (backoff_base_seconds < 0.0) throw Error(ErrorCode::InvalidConfig, "backoff base must be >= 0");
    if (mode == JudgeMode::Remote && endpoint.empty()) {
      throw Error(ErrorCode::InvalidConfig, "remote judge requires an endpoint (JUDGE_ENDPOINT)");
    }
  }
};

/// Fills endpoint and token variable name from JUDGE_ENDPOINT / JUDGE_TOKEN_VAR.
inline JudgeConfig judge_config_from_env(JudgeMode mode) {
  JudgeConfig cfg;
  cfg.mode = mode;
  if (const char* e = std::getenv("JUDGE_ENDPOINT")) cfg.endpoint = e;
  if (const char* v = std::getenv("JUDGE_TOKEN_VAR")) cfg.token_env = v;
  return cfg;
}

/// Tier-2 adapter. Implementations must tolerate concurrent calls.
class SemanticJudge {
 public:
  virtual ~SemanticJudge() = default;
  virtual SemanticJudgment judge(const StateObservation& a, const StateObservation& b) = 0;
};

/// Offline judge driven by state labels: two observations are equivalent
/// when their labels agree after dropping everything from the cosmetic
/// separator on ("results#fontA" == "results#fontB"). Unlabeled
/// observations are never equivalent.
class MockJudge : public SemanticJudge {
 public:
  explicit MockJudge(std::string cosmetic_separator = "#") : separator_(std::move(cosmetic_separator)) {}

  SemanticJudgment judge(const StateObservation& a, const StateObservation& b) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return mock_judge(a, b);
  }

  SemanticJudgment mock_judge(const StateObservation& a, const StateObservation& b) const {
    if (!a.label || !b.label) {
      return {false, "unlabeled observation", Confidence::High};
    }
    const auto ka = base_label(*a.label);
    const auto kb = base_label(*b.label);
    if (ka == kb) {
      return {true, "same state '" + ka + "'", Confidence::High};
    }
    // Ordered so that the explanation is symmetric too.
    const auto& lo = std::min(ka, kb);
    const auto& hi = std::max(ka, kb);
    return {false, "different states '" + lo + "' and '" + hi + "'", Confidence::High};
  }

  std::string base_label(const std::string& label) const {
    if (separator_.empty()) return label;
    const auto pos = label.find(separator_);
    return pos == std::string::npos ? label : label.substr(0, pos);
  }

  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }

 private:
  std::string separator_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace tracedom
