#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracedom/remote_judge.hpp"
#include "tracedom/tracedom.hpp"

namespace fs = std::filesystem;
using namespace tracedom;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

std::shared_ptr<SemanticJudge> make_judge(const std::string& kind) {
  if (kind == "mock") return std::make_shared<MockJudge>();
  return std::make_shared<RemoteJudge>(judge_config_from_env(JudgeMode::Remote));
}

// A path names either one trace (directory with manifest.json, or the
// manifest itself) or a directory whose subdirectories are traces.
std::vector<fs::path> expand_trace_paths(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    const fs::path p(a);
    if (fs::is_regular_file(p) || fs::exists(p / "manifest.json")) {
      out.push_back(p);
      continue;
    }
    if (!fs::is_directory(p)) throw Error(ErrorCode::Io, "no trace at " + a);
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) subs.push_back(e.path());
    }
    if (subs.empty()) throw Error(ErrorCode::ManifestParse, "no manifest.json under " + a);
    std::sort(subs.begin(), subs.end());
    out.insert(out.end(), subs.begin(), subs.end());
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int cmd_learn(const std::vector<std::string>& trace_args, const std::string& out, const std::string& thresholds_path,
              const std::string& judge_kind) {
  const auto paths = expand_trace_paths(trace_args);
  if (paths.size() < 2 || paths.size() > 10) {
    std::cerr << "warning: learning from " << paths.size() << " trace(s); 2 to 10 passing traces are recommended\n";
  }
  std::vector<Trace> traces;
  for (const auto& p : paths) traces.push_back(load_trace(p));
  const auto th = thresholds_path.empty() ? EquivalenceThresholds{} : load_thresholds(thresholds_path);
  EquivalenceClassifier cls(th, make_judge(judge_kind), ClassifierMode::Learning);
  const auto model = learn_model(traces, cls);
  for (const auto& w : cls.warnings()) std::cerr << "warning: " << w << "\n";
  save_model(model, out);
  std::cout << "learned " << model.graph.nodes.size() << " states, " << model.graph.edges.size() << " transitions, "
            << model.tree.nodes.size() << " essential states from " << traces.size() << " traces -> " << out << "\n";
  return kExitPass;
}

int cmd_validate(const std::string& model_path, const std::string& trace_path, double threshold,
                 const std::string& json_out, const std::string& judge_kind) {
  const auto model = load_model(model_path);
  const auto trace = load_trace(trace_path);
  MatchOptions opts;
  opts.coverage_threshold = threshold;
  const auto r = validate_against_model(trace, model, opts, make_judge(judge_kind));
  std::cout << to_string(r.verdict) << "\n" << r.explanation << "\n";
  for (const auto& m : r.matched) std::cout << "  matched " << m.name << " at test state " << m.test_index << "\n";
  for (const auto& m : r.missing) std::cout << "  missing " << m.name << "\n";
  if (r.root_cause) {
    std::cout << "root cause: " << to_string(r.root_cause->classification) << " (" << r.root_cause->rationale << ")\n";
  }
  if (!json_out.empty()) {
    auto doc = to_json(r);
    doc["trace_id"] = trace.id;
    doc["coverage_threshold"] = threshold;
    write_text(json_out, doc.dump(2) + "\n");
  }
  return r.verdict == Verdict::Pass ? kExitPass : kExitFail;
}

int cmd_inspect(const std::string& model_path) {
  const auto m = load_model(model_path);
  const auto& g = m.graph;
  std::cout << "states: " << g.nodes.size() << "  transitions: " << g.edges.size() << "  traces: " << g.walks.size()
            << "\n";
  std::cout << "initial: " << g.nodes[g.initial].name() << "\n";
  std::cout << "terminals:";
  for (auto t : g.terminals) std::cout << " " << g.nodes[t].name();
  std::cout << "\n\nstates\n";
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    std::printf("  %3zu  %-10s %-24s members=%zu\n", n, m.tree.contains(n) ? "essential" : "optional",
                g.nodes[n].name().c_str(), g.nodes[n].members.size());
  }
  std::cout << "\ntransitions\n";
  for (const auto& e : g.edges) {
    std::cout << "  " << g.nodes[e.from].name() << " -> " << g.nodes[e.to].name() << " [";
    bool first = true;
    for (const auto& [sig, count] : e.actions) {
      std::cout << (first ? "" : ", ") << sig << " x" << count;
      first = false;
    }
    std::cout << "]\n";
  }
  std::cout << "\nessential order:";
  for (auto n : m.tree.topo_order) std::cout << " " << g.nodes[n].name();
  std::cout << "\nbranch points:";
  for (auto n : m.branch_nodes()) std::cout << " " << g.nodes[n].name();
  std::cout << "\nconvergence points:";
  for (auto n : m.convergence_nodes()) std::cout << " " << g.nodes[n].name();
  std::cout << "\n";
  return kExitPass;
}

void print_summary(const BenchmarkReport& r) {
  std::printf("%-14s %6s %9s\n", "category", "total", "detected");
  for (const auto& [name, t] : r.categories) std::printf("%-14s %6zu %9zu\n", name.c_str(), t.total, t.detected);
  auto line = [](const char* who, const Confusion& c, const DetectionMetrics& m) {
    std::printf("%-16s TP=%zu FP=%zu TN=%zu FN=%zu accuracy=%.3f precision=%.3f recall=%.3f f1=%.3f\n", who, c.tp, c.fp,
                c.tn, c.fn, m.accuracy, m.precision, m.recall, m.f1);
  };
  line("validator", r.confusion, r.metrics);
  line("self-report", r.cua_confusion, r.cua_metrics);
  std::printf("root cause: agent_issue %zu/%zu  product_bug %zu/%zu  overall %.3f  (constant product_bug %.3f)\n",
              r.agent_issue_cause.correct, r.agent_issue_cause.total, r.product_bug_cause.correct,
              r.product_bug_cause.total, r.root_cause_accuracy, r.constant_baseline_accuracy);
}

int cmd_bench(const std::string& spec_path, const std::string& report_path, const std::string& judge_kind) {
  const auto spec = spec_path.empty() ? BenchmarkSpec{} : load_benchmark_spec(spec_path);
  const auto report = run_benchmark(spec, make_judge(judge_kind));
  print_summary(report);
  if (!report_path.empty()) {
    nlohmann::json doc = to_json(report);
    doc["spec"] = to_json(spec);
    write_text(report_path, doc.dump(2) + "\n");
  }
  return kExitPass;
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir) {
  const auto spec = spec_path.empty() ? BenchmarkSpec{} : load_benchmark_spec(spec_path);
  const auto suite = generate_synthetic_suite(spec);
  write_synthetic_suite(suite, spec, out_dir);
  std::cout << "wrote " << suite.training.size() << " training and " << suite.tests.size() << " test traces to "
            << out_dir << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn essential-state models from GUI traces and validate new runs against them."};
  app.require_subcommand(1);

  std::string judge_kind = "mock";
  auto add_judge = [&](CLI::App* sub) {
    sub->add_option("--judge", judge_kind, "Semantic judge for ambiguous screenshot pairs")
        ->check(CLI::IsMember({"mock", "remote"}))
        ->capture_default_str();
  };

  std::vector<std::string> traces;
  std::string out, thresholds;
  auto* learn = app.add_subcommand("learn", "Build a model from passing traces");
  learn->add_option("--traces", traces, "Trace directories (or directories of traces)")->required()->expected(1, -1);
  learn->add_option("--out", out, "Model JSON to write")->required();
  learn->add_option("--thresholds", thresholds, "Threshold config JSON")->check(CLI::ExistingFile);
  add_judge(learn);

  std::string model, trace, json_out;
  double threshold = 100.0;
  auto* validate = app.add_subcommand("validate", "Check one trace against a model (exit 0 PASS, 1 FAIL, 2 error)");
  validate->add_option("--model", model, "Model JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--trace", trace, "Trace directory or manifest")->required();
  validate->add_option("--threshold", threshold, "Coverage threshold in percent")
      ->check(CLI::Range(0.0, 100.0))
      ->capture_default_str();
  validate->add_option("--json", json_out, "Write the validation report here");
  add_judge(validate);

  auto* inspect = app.add_subcommand("inspect", "Print a model's graph and essential states");
  inspect->add_option("--model", model, "Model JSON")->required()->check(CLI::ExistingFile);

  std::string spec, report;
  auto* bench = app.add_subcommand("bench", "Run the synthetic benchmark");
  bench->add_option("--spec", spec, "Benchmark spec JSON (defaults built in)")->check(CLI::ExistingFile);
  bench->add_option("--report", report, "Benchmark report JSON to write");
  add_judge(bench);

  auto* generate = app.add_subcommand("generate", "Write a synthetic trace suite to disk");
  generate->add_option("--spec", spec, "Benchmark spec JSON (defaults built in)")->check(CLI::ExistingFile);
  generate->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*learn) return cmd_learn(traces, out, thresholds, judge_kind);
    if (*validate) return cmd_validate(model, trace, threshold, json_out, judge_kind);
    if (*inspect) return cmd_inspect(model);
    if (*bench) return cmd_bench(spec, report, judge_kind);
    if (*generate) return cmd_generate(spec, out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
