#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tracedom/error.hpp"
#include "tracedom/judge.hpp"
#include "tracedom/metrics.hpp"
#include "tracedom/trace.hpp"
#include "tracedom/union_find.hpp"

namespace tracedom {

enum class Decision { Equivalent, Distinct, Ambiguous };
enum class Tier { Tier0, Tier1, Tier2 };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Equivalent: return "equivalent";
    case Decision::Distinct: return "distinct";
    case Decision::Ambiguous: return "ambiguous";
  }
  return "ambiguous";
}

inline std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Tier0: return "tier0";
    case Tier::Tier1: return "tier1";
    case Tier::Tier2: return "tier2";
  }
  return "tier0";
}

/// Tier-1 banding. A pair is Equivalent when every metric is inside its
/// equal bound, Distinct when any metric is past its distinct bound, and
/// Ambiguous otherwise.
struct EquivalenceThresholds {
  double phash_equal_min = 0.95;
  double ssim_equal_min = 0.98;
  double pixel_ratio_equal_max = 0.01;
  double phash_distinct_max = 0.80;
  double ssim_distinct_max = 0.85;
  double pixel_ratio_distinct_min = 0.15;

  // Per-metric separation is what makes the two bands disjoint.
  void validate() const {
    if (!(phash_equal_min > phash_distinct_max)) {
      throw Error(ErrorCode::InvalidConfig, "phash_equal_min must exceed phash_distinct_max");
    }
    if (!(ssim_equal_min > ssim_distinct_max)) {
      throw Error(ErrorCode::InvalidConfig, "ssim_equal_min must exceed ssim_distinct_max");
    }
    if (!(pixel_ratio_equal_max < pixel_ratio_distinct_min)) {
      throw Error(ErrorCode::InvalidConfig, "pixel_ratio_equal_max must be below pixel_ratio_distinct_min");
    }
  }

  bool in_equal_band(const VisualMetrics& m) const {
    return m.phash_similarity >= phash_equal_min && m.ssim >= ssim_equal_min &&
           m.pixel_change_ratio <= pixel_ratio_equal_max;
  }

  bool in_distinct_band(const VisualMetrics& m) const {
    return m.phash_similarity <= phash_distinct_max || m.ssim <= ssim_distinct_max ||
           m.pixel_change_ratio >= pixel_ratio_distinct_min;
  }

  Decision band(const VisualMetrics& m) const {
    if (in_equal_band(m)) return Decision::Equivalent;
    if (in_distinct_band(m)) return Decision::Distinct;
    return Decision::Ambiguous;
  }

  friend bool operator==(const EquivalenceThresholds&, const EquivalenceThresholds&) = default;
};

inline nlohmann::json to_json(const EquivalenceThresholds& t) {
  return {{"phash_equal_min", t.phash_equal_min},
          {"ssim_equal_min", t.ssim_equal_min},
          {"pixel_ratio_equal_max", t.pixel_ratio_equal_max},
          {"phash_distinct_max", t.phash_distinct_max},
          {"ssim_distinct_max", t.ssim_distinct_max},
          {"pixel_ratio_distinct_min", t.pixel_ratio_distinct_min}};
}

/// Applies the keys present in `doc` on top of `base`. Unknown keys are rejected.
inline EquivalenceThresholds thresholds_from_json(const nlohmann::json& doc, EquivalenceThresholds base = {}) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "thresholds must be a JSON object");
  const std::map<std::string, double EquivalenceThresholds::*> fields = {
      {"phash_equal_min", &EquivalenceThresholds::phash_equal_min},
      {"ssim_equal_min", &EquivalenceThresholds::ssim_equal_min},
      {"pixel_ratio_equal_max", &EquivalenceThresholds::pixel_ratio_equal_max},
      {"phash_distinct_max", &EquivalenceThresholds::phash_distinct_max},
      {"ssim_distinct_max", &EquivalenceThresholds::ssim_distinct_max},
      {"pixel_ratio_distinct_min", &EquivalenceThresholds::pixel_ratio_distinct_min},
  };
  for (const auto& [key, value] : doc.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::InvalidConfig, "unknown threshold '" + key + "'");
    if (!value.is_number()) throw Error(ErrorCode::InvalidConfig, "threshold '" + key + "' must be a number");
    base.*(it->second) = value.get<double>();
  }
  base.validate();
  return base;
}

inline EquivalenceThresholds load_thresholds(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return thresholds_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

struct EquivalenceVerdict {
  Decision decision = Decision::Ambiguous;
  Tier resolved_by = Tier::Tier1;
  std::optional<VisualMetrics> metrics;
  std::string explanation;
  Confidence confidence = Confidence::High;
};

namespace detail {

inline std::string describe(const VisualMetrics& m) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << "phash=" << m.phash_similarity << " ssim=" << m.ssim << " pixel_ratio=" << m.pixel_change_ratio;
  return os.str();
}

inline EquivalenceVerdict tier0_verdict() {
  return {Decision::Equivalent, Tier::Tier0, std::nullopt, "byte-identical images", Confidence::High};
}

inline EquivalenceVerdict tier1_verdict(const VisualMetrics& m, const EquivalenceThresholds& th) {
  EquivalenceVerdict v;
  v.decision = th.band(m);
  v.resolved_by = Tier::Tier1;
  v.metrics = m;
  v.confidence = v.decision == Decision::Ambiguous ? Confidence::Low : Confidence::High;
  v.explanation = std::string("visual metrics ") + std::string(to_string(v.decision)) + ": " + describe(m);
  return v;
}

}  // namespace detail

/// Tier 0 + Tier 1. Byte-identical states short-circuit before any metric.
inline EquivalenceVerdict tier1_compare(const StateObservation& a, const StateObservation& b,
                                        const EquivalenceThresholds& th) {
  if (a.digest == b.digest) return detail::tier0_verdict();
  return detail::tier1_verdict(compute_visual_metrics(*a.image, *b.image), th);
}

enum class ClassifierMode { Learning, Validation };
enum class JudgeFailurePolicy { FailFast, TreatAsDistinct };

inline JudgeFailurePolicy default_policy(ClassifierMode mode) {
  return mode == ClassifierMode::Learning ? JudgeFailurePolicy::FailFast : JudgeFailurePolicy::TreatAsDistinct;
}

/// Full three-tier equivalence with a union-find over image digests.
///
/// Pairwise verdicts are cached under the unordered digest pair, so the
/// decision for (a, b) and (b, a) is the same cache entry. Equivalent
/// verdicts merge classes, and class membership is final: a later pairwise
/// Distinct verdict between members of one class is recorded as a warning
/// and otherwise ignored.
///
/// Metric and judge work happens outside the lock; cache inserts and unions
/// are serialized.
class EquivalenceClassifier {
 public:
  EquivalenceClassifier(EquivalenceThresholds thresholds, std::shared_ptr<SemanticJudge> judge,
                        ClassifierMode mode = ClassifierMode::Learning,
                        std::optional<JudgeFailurePolicy> policy = std::nullopt)
      : thresholds_(thresholds),
        judge_(std::move(judge)),
        mode_(mode),
        policy_(policy.value_or(default_policy(mode))) {
    thresholds_.validate();
  }

  const EquivalenceThresholds& thresholds() const { return thresholds_; }
  ClassifierMode mode() const { return mode_; }
  JudgeFailurePolicy policy() const { return policy_; }

  void register_digest(const std::string& digest) {
    std::lock_guard lock(mu_);
    classes_.add(digest);
  }

  /// Seeds the partition, e.g. from a stored model's class table.
  void unite(const std::string& a, const std::string& b) {
    std::lock_guard lock(mu_);
    classes_.unite(a, b);
  }

  bool same_class(const std::string& a, const std::string& b) {
    std::lock_guard lock(mu_);
    return classes_.same(a, b);
  }

  /// Earliest-registered digest of the class containing `digest`.
  std::string class_of(const std::string& digest) {
    std::lock_guard lock(mu_);
    return classes_.representative(digest);
  }

  /// Pairwise verdict through the full cascade; never Ambiguous.
  EquivalenceVerdict verdict(const StateObservation& a, const StateObservation& b) {
    if (a.digest == b.digest) return detail::tier0_verdict();
    const auto key = pair_key(a.digest, b.digest);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    EquivalenceVerdict v = detail::tier1_verdict(metrics(a, b), thresholds_);
    if (v.decision == Decision::Ambiguous) v = resolve_with_judge(a, b, *v.metrics);
    std::lock_guard lock(mu_);
    return cache_.try_emplace(key, std::move(v)).first->second;
  }

  /// StatesEquivalent: class membership first, then the cached cascade.
  bool states_equivalent(const StateObservation& a, const StateObservation& b) {
    if (a.digest == b.digest) {
      register_digest(a.digest);
      return true;
    }
    {
      std::lock_guard lock(mu_);
      if (classes_.same(a.digest, b.digest)) {
        if (auto it = cache_.find(pair_key(a.digest, b.digest));
            it != cache_.end() && it->second.decision == Decision::Distinct) {
          warnings_.push_back("non-transitive verdicts: " + a.display_name() + " and " + b.display_name() +
                              " are pairwise distinct but share a class");
        }
        return true;
      }
    }
    const auto v = verdict(a, b);
    if (v.decision != Decision::Equivalent) return false;
    std::lock_guard lock(mu_);
    classes_.unite(a.digest, b.digest);
    return true;
  }

  std::vector<std::string> warnings() const {
    std::lock_guard lock(mu_);
    return warnings_;
  }

  std::size_t cached_verdicts() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  using PairKey = std::pair<std::string, std::string>;

  struct PairHash {
    std::size_t operator()(const PairKey& k) const {
      const std::size_t h = std::hash<std::string>{}(k.first);
      return h ^ (std::hash<std::string>{}(k.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
  };

  static PairKey pair_key(const std::string& a, const std::string& b) {
    return a < b ? PairKey{a, b} : PairKey{b, a};
  }

  std::uint64_t hash_of(const StateObservation& s) {
    {
      std::lock_guard lock(mu_);
      if (auto it = hashes_.find(s.digest); it != hashes_.end()) return it->second;
    }
    const auto h = perceptual_hash(*s.image);
    std::lock_guard lock(mu_);
    hashes_.emplace(s.digest, h);
    return h;
  }

  VisualMetrics metrics(const StateObservation& a, const StateObservation& b) {
    if (!a.image || !b.image) throw Error(ErrorCode::Precondition, "observation has no decoded image");
    return {hash_similarity(hash_of(a), hash_of(b)), compute_ssim(*a.image, *b.image),
            compute_pixel_change_ratio(*a.image, *b.image)};
  }

  EquivalenceVerdict resolve_with_judge(const StateObservation& a, const StateObservation& b,
                                        const VisualMetrics& m) {
    EquivalenceVerdict v;
    v.resolved_by = Tier::Tier2;
    v.metrics = m;
    if (!judge_) {
      if (policy_ == JudgeFailurePolicy::FailFast) {
        throw Error(ErrorCode::JudgeTransport, "ambiguous pair and no semantic judge configured");
      }
      v.decision = Decision::Distinct;
      v.confidence = Confidence::Low;
      v.explanation = "ambiguous visual metrics and no judge; treated as distinct";
      return v;
    }
    // Judge calls go in canonical digest order so a remote judge sees the
    // same (a, b) orientation for both query orders.
    const bool swap = b.digest < a.digest;
    SemanticJudgment j;
    try {
      j = swap ? judge_->judge(b, a) : judge_->judge(a, b);
    } catch (const Error& e) {
      if (policy_ == JudgeFailurePolicy::FailFast ||
          (e.code() != ErrorCode::JudgeTransport && e.code() != ErrorCode::JudgeProtocol)) {
        throw;
      }
      v.decision = Decision::Distinct;
      v.confidence = Confidence::Low;
      v.explanation = std::string("judge failed (") + e.what() + "); treated as distinct";
      return v;
    }
    v.confidence = j.confidence;
    if (j.equivalent && mode_ == ClassifierMode::Learning && j.confidence == Confidence::Low) {
      v.decision = Decision::Distinct;
      v.explanation = "judge: " + j.explanation + " (low confidence, demoted to distinct while learning)";
    } else {
      v.decision = j.equivalent ? Decision::Equivalent : Decision::Distinct;
      v.explanation = "judge: " + j.explanation;
    }
    return v;
  }

  EquivalenceThresholds thresholds_;
  std::shared_ptr<SemanticJudge> judge_;
  ClassifierMode mode_;
  JudgeFailurePolicy policy_;

  mutable std::mutex mu_;
  DisjointSet<std::string> classes_;
  std::unordered_map<PairKey, EquivalenceVerdict, PairHash> cache_;
  std::unordered_map<std::string, std::uint64_t> hashes_;
  std::vector<std::string> warnings_;
};

}  // namespace tracedom
