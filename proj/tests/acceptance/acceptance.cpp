// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "tracedom/tracedom.hpp"

using namespace tracedom;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail << what;
    ok = ok && cond;
  }
};

std::shared_ptr<MockJudge> mock() { return std::make_shared<MockJudge>(); }

LearnedModel learn(const std::vector<Trace>& traces, std::shared_ptr<SemanticJudge> judge = mock()) {
  EquivalenceClassifier cls({}, std::move(judge), ClassifierMode::Learning);
  return learn_model(traces, cls);
}

void extras_example(Outcome& o) {
  const std::string ref = "ABCD", test = "AXBYZCD";
  const auto m = topological_subsequence_match(test, ref, [](char a, char b) { return a == b; });
  o.require(m.missing.empty(), "string matcher reported missing states; ");
  o.require(compute_coverage(m.matched.size(), ref.size()) == 100.0, "string coverage != 100; ");

  const auto model = learn({fixture::trace_of("ref", {"A", "B", "C", "D"}, 1, TraceRole::Training)});
  const auto r = validate_against_model(fixture::trace_of("test", {"A", "X", "B", "Y", "Z", "C", "D"}, 2), model, {},
                                        mock());
  o.require(r.verdict == Verdict::Pass, "frame trace verdict is FAIL; ");
  o.require(r.coverage == 100.0 && r.missing.empty(), "frame trace coverage != 100; ");
  o.detail << "coverage " << r.coverage << "%, missing " << r.missing.size();
}

void walkthrough_example(Outcome& o) {
  const auto model = learn(synth::walkthrough_training_traces());
  const auto names = fixture::essential_names(model);
  const std::vector<std::string> expected{"start_menu", "launch", "main_window", "search_dialog", "results"};
  o.require(names == expected, "essential states differ from the five expected; ");
  const auto r = validate_against_model(synth::walkthrough_skip_main_window(), model, {}, mock());
  o.require(r.verdict == Verdict::Fail, "skip-main_window trace passed; ");
  o.require(r.missing.size() == 1 && r.missing[0].name == "main_window", "main_window not reported missing; ");
  o.detail << "essential " << names.size() << ", verdict " << to_string(r.verdict) << ", coverage " << r.coverage
           << "%";
}

void dominator_oracle(Outcome& o) {
  std::mt19937_64 rng(12);
  int disagreements = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng() % 12;
    const auto g = oracle::random_reachable_digraph(rng, n, rng() % (2 * n + 1), i % 3 == 0);
    if (compute_dominators(g).idom != oracle::brute_force_dominators(g).idom) ++disagreements;
  }
  o.require(disagreements == 0, std::to_string(disagreements) + " graphs disagree; ");
  o.detail << "200 graphs, " << disagreements << " disagreements";
}

void self_validation(Outcome& o) {
  int failures = 0, traces = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    BenchmarkSpec spec;
    spec.seed = 1000 + seed;
    spec.n_training = 2 + static_cast<int>(seed % 6);
    spec.passing = spec.agent_issue = spec.product_bug = 0;
    spec.false_success = spec.missed_bug = 0;
    const auto suite = generate_synthetic_suite(spec);
    const auto model = learn(suite.training);
    for (const auto& t : suite.training) {
      ++traces;
      const auto r = validate_against_model(t, model, {}, mock(), false);
      if (r.verdict != Verdict::Pass || r.coverage != 100.0) ++failures;
    }
  }
  o.require(failures == 0, std::to_string(failures) + " training traces failed; ");
  o.detail << traces << " training traces, " << failures << " failures";
}

void mutation_suite(Outcome& o) {
  const auto r = run_benchmark(BenchmarkSpec{});
  const auto& bugs = r.categories.at(category::kProductBug);
  const auto& agents = r.categories.at(category::kAgentIssue);
  const auto& passing = r.categories.at(category::kPassing);
  o.require(bugs.detected == bugs.total && bugs.total == 11, "product_bug detection below 100%; ");
  o.require(agents.detected == agents.total && agents.total == 3, "agent_issue detection below 100%; ");
  o.require(passing.total == 11 && r.confusion.fp == 0, "passing traces produced false FAILs; ");
  o.detail << "detected " << r.confusion.tp << "/" << (r.confusion.tp + r.confusion.fn) << ", false FAILs "
           << r.confusion.fp << "/" << passing.total;
}

void coverage_exactness(Outcome& o) {
  std::mt19937_64 rng(6);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t total = 1 + rng() % 200;
    const std::size_t matched = rng() % (total + 1);
    const double expected = static_cast<double>(matched) / static_cast<double>(total) * 100.0;
    if (compute_coverage(matched, total) != expected) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " splits inexact; ");
  o.require(compute_coverage(3, 4) == 75.0, "3 of 4 != 75.0; ");
  o.detail << "1000 splits, 3/4 = " << compute_coverage(3, 4);
}

void tier1_identity(Outcome& o) {
  const auto img = synth::render_frame("main_window", 7);
  const VisualMetrics m{hash_similarity(perceptual_hash(img), perceptual_hash(img)), compute_ssim(img, img),
                        compute_pixel_change_ratio(img, img)};
  o.require(m.phash_similarity == 1.0 && m.ssim == 1.0 && m.pixel_change_ratio == 0.0, "metrics not (1, 1, 0); ");

  auto judge = mock();
  EquivalenceClassifier cls({}, judge, ClassifierMode::Validation);
  const auto a = fixture::obs(img, "main_window", 0);
  const auto b = fixture::obs(img, "main_window#other", 1);  // same bytes, different label
  const auto v = cls.verdict(a, b);
  o.require(v.decision == Decision::Equivalent && v.resolved_by == Tier::Tier0, "identical digests not tier 0; ");
  o.require(cls.states_equivalent(a, b) && judge->calls() == 0, "judge was called; ");
  o.detail << "(" << m.phash_similarity << ", " << m.ssim << ", " << m.pixel_change_ratio << "), judge calls "
           << judge->calls();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TRACEDOM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void determinism(Outcome& o) {
  fixture::TempDir dir;
  synth::write_traces(synth::walkthrough_training_traces(), dir / "train");
  const auto train = (dir / "train").string();
  const int rc1 = run_cli("learn --traces " + train + " --out " + (dir / "a.json").string());
  const int rc2 = run_cli("learn --traces " + train + " --out " + (dir / "b.json").string());
  o.require(rc1 == 0 && rc2 == 0, "learn command failed; ");
  const auto a = fixture::read_text(dir / "a.json");
  o.require(!a.empty() && a == fixture::read_text(dir / "b.json"), "model files differ; ");

  BenchmarkSpec spec;
  spec.seed = 99;
  const auto r1 = to_json(run_benchmark(spec)).dump();
  const auto r2 = to_json(run_benchmark(spec)).dump();
  o.require(r1 == r2, "benchmark reports differ; ");
  o.detail << "model " << a.size() << " bytes, report " << r1.size() << " bytes, both identical";
}

Trace long_trace(std::size_t n) {
  static const std::vector<StateObservation> pool = [] {
    std::vector<StateObservation> p;
    for (const char* label : {"home", "list", "detail", "edit"}) p.push_back(fixture::obs(synth::render_frame(label), label, 0));
    return p;
  }();
  Trace t;
  t.id = "long_" + std::to_string(n);
  t.states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.states.push_back(pool[i % pool.size()]);
    t.states.back().index = i;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) t.actions.push_back({"click", {{"target", "next"}}, i, i + 1});
  return t;
}

/// Best of several runs, so one scheduler hiccup cannot decide the ratio.
double time_pta(const Trace& t, int repeats) {
  double best = 1e9;
  for (int i = 0; i < repeats; ++i) {
    const auto start = Clock::now();
    const auto g = construct_pta(t);
    const double s = seconds_since(start);
    if (g.nodes.size() != t.states.size()) return 1e9;
    best = std::min(best, s);
  }
  return best;
}

void pta_complexity(Outcome& o) {
  const auto small = long_trace(1000);
  const auto large = long_trace(10000);
  const double t1k = time_pta(small, 15);
  const double t10k = time_pta(large, 5);
  const double ratio = t10k / std::max(t1k, 1e-9);
  o.require(ratio <= 20.0, "10k/1k ratio above 20; ");
  o.detail << "1k " << t1k * 1e3 << " ms, 10k " << t10k * 1e3 << " ms, ratio " << ratio;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<void(Outcome&)> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"extras-tolerant matching", 1.0, extras_example},
      {"walkthrough-example fidelity", 5.0, walkthrough_example},
      {"dominator oracle equivalence", 10.0, dominator_oracle},
      {"trace preservation and self-validation", 60.0, self_validation},
      {"mutation suite detection", 120.0, mutation_suite},
      {"coverage exactness", 1.0, coverage_exactness},
      {"tier-1 identity", 1.0, tier1_identity},
      {"determinism", 120.0, determinism},
      {"PTA complexity smoke", 10.0, pta_complexity},
  };
  int failures = 0;
  int number = 0;
  for (const auto& c : criteria) {
    ++number;
    Outcome o;
    const auto start = Clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << "exception: " << e.what();
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= c.budget_s) {
      o.ok = false;
      o.detail << "; over time budget";
    }
    failures += o.ok ? 0 : 1;
    std::printf("%s %d %s (%.3fs / %.0fs budget): %s\n", o.ok ? "PASS" : "FAIL", number, c.name, elapsed, c.budget_s,
                o.detail.str().c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
