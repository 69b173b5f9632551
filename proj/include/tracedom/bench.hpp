#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <cstdio>
#include <future>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracedom/equivalence.hpp"
#include "tracedom/error.hpp"
#include "tracedom/judge.hpp"
#include "tracedom/model.hpp"
#include "tracedom/synth.hpp"
#include "tracedom/validation.hpp"

namespace tracedom {

namespace category {
inline constexpr const char* kPassing = "passing";
inline constexpr const char* kProductBug = "product_bug";
inline constexpr const char* kAgentIssue = "agent_issue";
inline constexpr const char* kFalseSuccess = "false_success";
inline constexpr const char* kMissedBug = "missed_bug";
}  // namespace category

/// Synthetic benchmark description. `false_success` and `missed_bug` do not
/// add traces: they flip the simulated self-report on that many failing
/// (resp. passing) test traces.
struct BenchmarkSpec {
  int n_training = 3;
  int passing = 11;
  int false_success = 1;
  int agent_issue = 3;
  int product_bug = 11;
  int missed_bug = 1;
  std::uint64_t seed = 42;
  double optional_probability = 0.5;
  double noise_probability = 0.3;
  std::vector<synth::ScenarioStep> scenario = synth::default_scenario();

  void validate() const {
    if (n_training < 2) throw Error(ErrorCode::InvalidConfig, "n_training must be at least 2");
    if (passing < 0 || false_success < 0 || agent_issue < 0 || product_bug < 0 || missed_bug < 0) {
      throw Error(ErrorCode::InvalidConfig, "category counts must be non-negative");
    }
    if (false_success > agent_issue + product_bug) {
      throw Error(ErrorCode::InvalidConfig, "false_success exceeds the number of failing traces");
    }
    if (missed_bug > passing) throw Error(ErrorCode::InvalidConfig, "missed_bug exceeds the number of passing traces");
    if (!(optional_probability >= 0.0 && optional_probability <= 1.0) ||
        !(noise_probability >= 0.0 && noise_probability <= 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "probabilities must lie in [0, 1]");
    }
    if (scenario.size() < 2) throw Error(ErrorCode::InvalidConfig, "scenario needs at least two steps");
    if (scenario.front().optional || scenario.back().optional) {
      throw Error(ErrorCode::InvalidConfig, "first and last scenario steps must be essential");
    }
    std::set<std::string> names;
    for (const auto& s : scenario) {
      if (s.name.empty() || s.name.find('#') != std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "scenario step names must be non-empty and contain no '#'");
      }
      if (!names.insert(s.name).second) throw Error(ErrorCode::InvalidConfig, "duplicate scenario step '" + s.name + "'");
    }
  }
};

inline nlohmann::json to_json(const BenchmarkSpec& s) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : s.scenario) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : st.action.params) params[k] = v;
    steps.push_back({{"name", st.name}, {"optional", st.optional}, {"action", {{"kind", st.action.kind}, {"params", params}}}});
  }
  return {{"n_training", s.n_training},
          {"passing", s.passing},
          {"false_success", s.false_success},
          {"agent_issue", s.agent_issue},
          {"product_bug", s.product_bug},
          {"missed_bug", s.missed_bug},
          {"seed", s.seed},
          {"optional_probability", s.optional_probability},
          {"noise_probability", s.noise_probability},
          {"scenario", steps}};
}

inline BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& doc) {
  BenchmarkSpec s;
  try {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "benchmark spec must be a JSON object");
    static const std::set<std::string> known = {"n_training",   "passing", "false_success",        "agent_issue",
                                                "product_bug",  "missed_bug", "seed",              "optional_probability",
                                                "noise_probability", "scenario"};
    for (const auto& [k, _] : doc.items()) {
      if (!known.count(k)) throw Error(ErrorCode::InvalidConfig, "unknown benchmark spec field '" + k + "'");
    }
    auto read_int = [&](const char* key, int& out) {
      if (auto it = doc.find(key); it != doc.end()) out = it->get<int>();
    };
    read_int("n_training", s.n_training);
    read_int("passing", s.passing);
    read_int("false_success", s.false_success);
    read_int("agent_issue", s.agent_issue);
    read_int("product_bug", s.product_bug);
    read_int("missed_bug", s.missed_bug);
    if (auto it = doc.find("seed"); it != doc.end()) s.seed = it->get<std::uint64_t>();
    if (auto it = doc.find("optional_probability"); it != doc.end()) s.optional_probability = it->get<double>();
    if (auto it = doc.find("noise_probability"); it != doc.end()) s.noise_probability = it->get<double>();
    if (auto it = doc.find("scenario"); it != doc.end()) {
      s.scenario.clear();
      for (const auto& js : *it) {
        synth::ScenarioStep st;
        st.name = js.at("name").get<std::string>();
        st.optional = js.value("optional", false);
        if (auto a = js.find("action"); a != js.end()) {
          st.action.kind = a->at("kind").get<std::string>();
          if (auto p = a->find("params"); p != a->end()) {
            for (const auto& [k, v] : p->items()) st.action.params.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
          }
        } else {
          st.action.kind = "wait";
        }
        s.scenario.push_back(std::move(st));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("benchmark spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline BenchmarkSpec load_benchmark_spec(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return benchmark_spec_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

struct SyntheticSuite {
  std::vector<Trace> training;
  std::vector<Trace> tests;  // metadata: category, self_report, [mutated_state]
};

namespace detail {

inline std::string numbered(const char* prefix, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02d", prefix, i);
  return buf;
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace detail

/// Renders the whole suite in memory. Everything derives from `spec.seed`
/// through one mt19937_64 stream, so a spec reproduces byte-identical PNGs.
///
/// Training traces toggle optional steps by coin; if every training trace
/// made the same choice for a step, the first trace's choice is flipped so
/// the step is observed both present and absent.
inline SyntheticSuite generate_synthetic_suite(const BenchmarkSpec& spec) {
  spec.validate();
  using synth::ScenarioStep;
  const auto& steps = spec.scenario;
  std::mt19937_64 rng(spec.seed);
  SyntheticSuite suite;

  auto coin_includes = [&]() {
    std::vector<bool> inc(steps.size(), true);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].optional) inc[i] = detail::unit(rng) < spec.optional_probability;
    }
    return inc;
  };
  auto jitter = [&]() { return (rng() | 1) & 0x7fffffffffffULL; };

  std::vector<std::vector<bool>> train_inc;
  for (int i = 0; i < spec.n_training; ++i) train_inc.push_back(coin_includes());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    if (!steps[s].optional) continue;
    bool all_same = true;
    for (const auto& inc : train_inc) all_same = all_same && inc[s] == train_inc.front()[s];
    if (all_same) train_inc.front()[s] = !train_inc.front()[s];
  }
  for (int i = 0; i < spec.n_training; ++i) {
    suite.training.push_back(
        synth::scenario_trace(detail::numbered("train", i), TraceRole::Training, steps, train_inc[i], jitter()));
  }

  std::vector<std::size_t> essential_after_start;
  for (std::size_t s = 1; s < steps.size(); ++s) {
    if (!steps[s].optional) essential_after_start.push_back(s);
  }

  // Passing: optional coin per step, occasional unseen notification between states.
  for (int i = 0; i < spec.passing; ++i) {
    const auto inc = coin_includes();
    const auto seed = jitter();
    synth::TraceBuilder b(detail::numbered(category::kPassing, i), TraceRole::Test);
    std::optional<synth::StepAction> pending;
    bool first = true;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      if (!inc[s]) {
        if (!pending) pending = steps[s].action;
        continue;
      }
      if (!first && detail::unit(rng) < spec.noise_probability) {
        b.state("notification", seed + 1000 + s, synth::StepAction{"wait", {}});
      }
      b.state(steps[s].name, seed + s, pending.value_or(steps[s].action));
      pending.reset();
      first = false;
    }
    b.meta("category", category::kPassing);
    suite.tests.push_back(b.build());
  }

  // Product bug: the right action, but one essential screen is replaced by
  // a wrong one; the rest of the walk continues.
  for (int i = 0; i < spec.product_bug; ++i) {
    const auto inc = coin_includes();
    const auto seed = jitter();
    const auto target = essential_after_start[detail::pick(rng, essential_after_start.size())];
    synth::TraceBuilder b(detail::numbered(category::kProductBug, i), TraceRole::Test);
    std::optional<synth::StepAction> pending;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      if (!inc[s]) {
        if (!pending) pending = steps[s].action;
        continue;
      }
      const std::string label = s == target ? "error_" + steps[s].name : steps[s].name;
      b.state(label, seed + s, pending.value_or(steps[s].action));
      pending.reset();
    }
    b.meta("category", category::kProductBug).meta("mutated_state", steps[target].name);
    suite.tests.push_back(b.build());
  }

  // Agent issue: before reaching an essential screen the agent takes an
  // action never seen in training, wanders into detours, and never returns.
  for (int i = 0; i < spec.agent_issue; ++i) {
    const auto inc = coin_includes();
    const auto seed = jitter();
    const auto target = essential_after_start[detail::pick(rng, essential_after_start.size())];
    synth::TraceBuilder b(detail::numbered(category::kAgentIssue, i), TraceRole::Test);
    std::optional<synth::StepAction> pending;
    for (std::size_t s = 0; s < target; ++s) {
      if (!inc[s]) {
        if (!pending) pending = steps[s].action;
        continue;
      }
      b.state(steps[s].name, seed + s, pending.value_or(steps[s].action));
      pending.reset();
    }
    b.state("detour_help", seed + 500, synth::StepAction{"click", {{"target", "help_menu"}}});
    b.state("detour_about", seed + 501, synth::StepAction{"click", {{"target", "about"}}});
    b.meta("category", category::kAgentIssue).meta("mutated_state", steps[target].name);
    suite.tests.push_back(b.build());
  }

  // Simulated self-reports, with seeded misreports.
  std::vector<std::size_t> passing_idx, failing_idx;
  for (std::size_t i = 0; i < suite.tests.size(); ++i) {
    (suite.tests[i].metadata["category"] == category::kPassing ? passing_idx : failing_idx).push_back(i);
  }
  std::shuffle(passing_idx.begin(), passing_idx.end(), rng);
  std::shuffle(failing_idx.begin(), failing_idx.end(), rng);
  for (std::size_t k = 0; k < passing_idx.size(); ++k) {
    auto& t = suite.tests[passing_idx[k]];
    const bool misreport = static_cast<int>(k) < spec.missed_bug;
    t.metadata["self_report"] = misreport ? "failure" : "success";
    if (misreport) t.metadata["cua_misreport"] = category::kMissedBug;
  }
  for (std::size_t k = 0; k < failing_idx.size(); ++k) {
    auto& t = suite.tests[failing_idx[k]];
    const bool misreport = static_cast<int>(k) < spec.false_success;
    t.metadata["self_report"] = misreport ? "success" : "failure";
    if (misreport) t.metadata["cua_misreport"] = category::kFalseSuccess;
  }
  return suite;
}

/// `<root>/training/<id>/...` and `<root>/test/<id>/...` plus `<root>/spec.json`.
inline void write_synthetic_suite(const SyntheticSuite& suite, const BenchmarkSpec& spec,
                                  const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  synth::write_traces(suite.training, root / "training");
  synth::write_traces(suite.tests, root / "test");
  const auto text = to_json(spec).dump(2) + "\n";
  write_file_bytes(root / "spec.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // positive = failure detected
};

struct DetectionMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  bool precision_defined = false, recall_defined = false;
};

inline DetectionMetrics detection_metrics(const Confusion& c) {
  DetectionMetrics m;
  const auto total = c.tp + c.fp + c.tn + c.fn;
  m.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
  m.precision_defined = c.tp + c.fp > 0;
  m.recall_defined = c.tp + c.fn > 0;
  m.precision = m.precision_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = m.recall_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

struct CategoryTally {
  std::size_t total = 0;
  std::size_t detected = 0;
};

struct RootCauseTally {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct TraceOutcome {
  std::string id;
  std::string category;
  std::string self_report;
  ValidationResult result;
};

struct BenchmarkReport {
  std::map<std::string, CategoryTally> categories;
  Confusion confusion;
  DetectionMetrics metrics;
  Confusion cua_confusion;
  DetectionMetrics cua_metrics;
  RootCauseTally agent_issue_cause;
  RootCauseTally product_bug_cause;
  double root_cause_accuracy = 0.0;           // over all failing traces
  double constant_baseline_accuracy = 0.0;    // always answering product_bug
  std::vector<std::string> essential_states;
  std::vector<TraceOutcome> traces;
};

inline nlohmann::json to_json(const ValidationResult& r) {
  nlohmann::json matched = nlohmann::json::array();
  for (const auto& m : r.matched) matched.push_back({{"ref_state", m.name}, {"test_index", m.test_index}});
  nlohmann::json missing = nlohmann::json::array();
  for (const auto& m : r.missing) missing.push_back(m.name);
  nlohmann::json doc = {{"verdict", std::string(to_string(r.verdict))},
                        {"coverage", r.coverage},
                        {"matched", matched},
                        {"missing", missing},
                        {"terminal_match", r.terminal_match},
                        {"explanation", r.explanation}};
  if (r.root_cause) {
    doc["root_cause"] = {{"classification", std::string(to_string(r.root_cause->classification))},
                         {"rationale", r.root_cause->rationale},
                         {"divergence_index", r.root_cause->divergence_index}};
  }
  return doc;
}

inline nlohmann::json to_json(const DetectionMetrics& m) {
  return {{"accuracy", m.accuracy},   {"precision", m.precision},
          {"recall", m.recall},       {"f1", m.f1},
          {"precision_defined", m.precision_defined}, {"recall_defined", m.recall_defined}};
}

inline nlohmann::json to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

inline nlohmann::json to_json(const BenchmarkReport& r) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [k, v] : r.categories) {
    cats[k] = {{"total", v.total},
               {"detected", v.detected},
               {"detection_rate", v.total ? static_cast<double>(v.detected) / static_cast<double>(v.total) : 0.0}};
  }
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : r.traces) {
    auto jt = to_json(t.result);
    jt["id"] = t.id;
    jt["category"] = t.category;
    jt["self_report"] = t.self_report;
    traces.push_back(std::move(jt));
  }
  auto cause = [](const RootCauseTally& t) {
    return nlohmann::json{{"total", t.total}, {"correct", t.correct}, {"accuracy", t.accuracy()}};
  };
  return {{"categories", cats},
          {"validation", {{"confusion", to_json(r.confusion)}, {"metrics", to_json(r.metrics)}}},
          {"cua_self_report", {{"confusion", to_json(r.cua_confusion)}, {"metrics", to_json(r.cua_metrics)}}},
          {"root_cause",
           {{"agent_issue", cause(r.agent_issue_cause)},
            {"product_bug", cause(r.product_bug_cause)},
            {"overall_accuracy", r.root_cause_accuracy},
            {"constant_product_bug_accuracy", r.constant_baseline_accuracy}}},
          {"essential_states", r.essential_states},
          {"traces", traces}};
}

/// Validates one trace against a learned model with a fresh validation-mode
/// classifier, and classifies the root cause of a FAIL.
inline ValidationResult validate_against_model(const Trace& t, const LearnedModel& model, const MatchOptions& opts,
                                               std::shared_ptr<SemanticJudge> judge, bool with_root_cause = true) {
  EquivalenceClassifier cls(model.thresholds, std::move(judge), ClassifierMode::Validation);
  seed_classifier(model, cls);
  auto r = validate_execution(t, model.tree, opts, cls);
  if (with_root_cause && r.verdict == Verdict::Fail) r.root_cause = classify_root_cause(t, model.graph, r, cls);
  return r;
}

/// Learns from the training split, validates every test trace (in
/// parallel, each with its own classifier) and tallies the results.
inline BenchmarkReport run_benchmark(const BenchmarkSpec& spec, std::shared_ptr<SemanticJudge> judge = nullptr,
                                     const EquivalenceThresholds& thresholds = {}) {
  if (!judge) judge = std::make_shared<MockJudge>();
  const auto suite = generate_synthetic_suite(spec);

  EquivalenceClassifier learn_cls(thresholds, judge, ClassifierMode::Learning);
  const auto model = learn_model(suite.training, learn_cls);
  const MatchOptions opts;

  std::vector<std::future<ValidationResult>> futures;
  for (const auto& t : suite.tests) {
    futures.push_back(std::async(std::launch::async, [&t, &model, &opts, judge] {
      return validate_against_model(t, model, opts, judge);
    }));
  }

  BenchmarkReport rep;
  for (std::size_t n : model.tree.topo_order) rep.essential_states.push_back(model.graph.nodes[n].name());
  for (const char* c : {category::kPassing, category::kAgentIssue, category::kProductBug, category::kFalseSuccess,
                        category::kMissedBug}) {
    rep.categories[c] = {};
  }
  std::size_t failing_total = 0, failing_correct_cause = 0;
  for (std::size_t i = 0; i < suite.tests.size(); ++i) {
    const auto& t = suite.tests[i];
    TraceOutcome out{t.id, t.metadata.at("category"), t.metadata.at("self_report"), futures[i].get()};
    const bool truly_failing = out.category != category::kPassing;
    const bool flagged = out.result.verdict == Verdict::Fail;
    const bool cua_flagged = out.self_report == "failure";

    auto& cat = rep.categories[out.category];
    ++cat.total;
    if (flagged == truly_failing) ++cat.detected;
    if (auto it = t.metadata.find("cua_misreport"); it != t.metadata.end()) {
      auto& mis = rep.categories[it->second];
      ++mis.total;
      if (flagged == truly_failing) ++mis.detected;
    }

    auto tally = [&](Confusion& c, bool predicted_fail) {
      if (truly_failing && predicted_fail) ++c.tp;
      if (truly_failing && !predicted_fail) ++c.fn;
      if (!truly_failing && predicted_fail) ++c.fp;
      if (!truly_failing && !predicted_fail) ++c.tn;
    };
    tally(rep.confusion, flagged);
    tally(rep.cua_confusion, cua_flagged);

    if (truly_failing) {
      ++failing_total;
      const auto expected = out.category == category::kAgentIssue ? RootCauseKind::AgentIssue : RootCauseKind::ProductBug;
      auto& rc = out.category == category::kAgentIssue ? rep.agent_issue_cause : rep.product_bug_cause;
      ++rc.total;
      if (out.result.root_cause && out.result.root_cause->classification == expected) {
        ++rc.correct;
        ++failing_correct_cause;
      }
    }
    rep.traces.push_back(std::move(out));
  }
  rep.metrics = detection_metrics(rep.confusion);
  rep.cua_metrics = detection_metrics(rep.cua_confusion);
  if (failing_total) {
    rep.root_cause_accuracy = static_cast<double>(failing_correct_cause) / static_cast<double>(failing_total);
    rep.constant_baseline_accuracy = static_cast<double>(rep.product_bug_cause.total) / static_cast<double>(failing_total);
  }
  return rep;
}

}  // namespace tracedom
