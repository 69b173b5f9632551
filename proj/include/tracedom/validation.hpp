#pragma once

#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tracedom/dominators.hpp"
#include "tracedom/equivalence.hpp"
#include "tracedom/error.hpp"
#include "tracedom/graph.hpp"
#include "tracedom/trace.hpp"

namespace tracedom {

struct MatchOptions {
  double coverage_threshold = 100.0;  // percent

  void validate() const {
    if (!(coverage_threshold >= 0.0 && coverage_threshold <= 100.0)) {
      throw Error(ErrorCode::InvalidConfig, "coverage threshold must lie in [0, 100]");
    }
  }
};

/// Result of an ordered subsequence match, in positions of the two inputs.
struct SubsequenceMatch {
  std::vector<std::pair<std::size_t, std::size_t>> matched;  // (reference position, test index)
  std::vector<std::size_t> missing;                          // reference positions
};

/// Greedy leftmost matching: each reference state, in order, takes the
/// first equivalent test state after the previous match. Unmatched
/// references are reported missing and do not move the cursor; extra test
/// states are ignored. O(|test| * |ref|) equivalence queries worst case.
template <typename TestRange, typename RefRange, typename Equiv>
SubsequenceMatch topological_subsequence_match(const TestRange& test, const RefRange& ref, Equiv&& equivalent) {
  SubsequenceMatch out;
  std::size_t cursor = 0;
  const std::size_t m = std::size(test);
  std::size_t pos = 0;
  for (const auto& r : ref) {
    bool found = false;
    for (std::size_t i = cursor; i < m; ++i) {
      if (equivalent(test[i], r)) {
        out.matched.emplace_back(pos, i);
        cursor = i + 1;
        found = true;
        break;
      }
    }
    if (!found) out.missing.push_back(pos);
    ++pos;
  }
  return out;
}

inline double compute_coverage(std::size_t matched, std::size_t reference_total) {
  if (reference_total == 0) throw Error(ErrorCode::EmptyReference, "reference state list is empty");
  return static_cast<double>(matched) / static_cast<double>(reference_total) * 100.0;
}

enum class Verdict { Pass, Fail };

inline std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "PASS" : "FAIL"; }

enum class RootCauseKind { AgentIssue, ProductBug };

inline std::string_view to_string(RootCauseKind k) {
  return k == RootCauseKind::AgentIssue ? "agent_issue" : "product_bug";
}

struct RootCause {
  RootCauseKind classification = RootCauseKind::ProductBug;
  std::string rationale;
  std::size_t divergence_index = 0;
};

struct MatchedState {
  std::size_t node = 0;
  std::string name;
  std::size_t test_index = 0;
};

struct MissingState {
  std::size_t node = 0;
  std::string name;
};

struct ValidationResult {
  Verdict verdict = Verdict::Fail;
  double coverage = 0.0;
  std::vector<MatchedState> matched;
  std::vector<MissingState> missing;
  bool terminal_match = false;
  std::string explanation;
  std::size_t reference_terminal = 0;  // terminal of the path that was scored
  std::size_t reference_size = 0;      // |S_ref| of that path
  std::optional<RootCause> root_cause;
};

namespace detail {

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v);
  return buf;
}

struct PathScore {
  std::size_t terminal = 0;
  std::vector<std::size_t> reference;
  SubsequenceMatch match;
  double coverage = 0.0;
  bool terminal_match = false;
};

}  // namespace detail

/// Validates a test trace against every root-to-terminal path of the tree
/// and reports the best-scoring one (coverage, then terminal match, then
/// terminal digest). PASS iff that path's coverage >= threshold and the
/// trace's last state is equivalent to the path's terminal.
inline ValidationResult validate_execution(const Trace& test, const DominatorTree& d, const MatchOptions& opts,
                                           EquivalenceClassifier& cls) {
  opts.validate();
  check_trace_invariants(test);
  if (d.terminals.empty()) throw Error(ErrorCode::EmptyReference, "model has no terminal states");

  const auto order = d.topo_order.empty() ? topological_order(d) : d.topo_order;
  auto equivalent = [&](const StateObservation& s, std::size_t node) { return cls.states_equivalent(s, d.state(node)); };

  std::optional<detail::PathScore> best;
  for (std::size_t t : d.terminals) {
    detail::PathScore score;
    score.terminal = t;
    const auto chain = d.path_to(t);
    const std::set<std::size_t> on_path(chain.begin(), chain.end());
    for (std::size_t n : order) {
      if (on_path.count(n)) score.reference.push_back(n);
    }
    score.match = topological_subsequence_match(test.states, score.reference, equivalent);
    score.coverage = compute_coverage(score.match.matched.size(), score.reference.size());
    score.terminal_match = equivalent(test.states.back(), t);
    const bool better =
        !best || score.coverage > best->coverage ||
        (score.coverage == best->coverage &&
         (score.terminal_match > best->terminal_match ||
          (score.terminal_match == best->terminal_match && d.state(t).digest < d.state(best->terminal).digest)));
    if (better) best = std::move(score);
  }

  ValidationResult r;
  r.coverage = best->coverage;
  r.terminal_match = best->terminal_match;
  r.reference_terminal = best->terminal;
  r.reference_size = best->reference.size();
  for (const auto& [pos, idx] : best->match.matched) {
    const auto n = best->reference[pos];
    r.matched.push_back({n, d.state(n).display_name(), idx});
  }
  for (std::size_t pos : best->match.missing) {
    const auto n = best->reference[pos];
    r.missing.push_back({n, d.state(n).display_name()});
  }
  r.verdict = (r.coverage >= opts.coverage_threshold && r.terminal_match) ? Verdict::Pass : Verdict::Fail;

  if (r.verdict == Verdict::Pass) {
    r.explanation = "All essential states matched in order. Coverage: " + detail::format_percent(r.coverage);
  } else {
    std::string names;
    for (const auto& m : r.missing) names += (names.empty() ? "" : ", ") + m.name;
    r.explanation = "Missing essential states: " + (names.empty() ? std::string("none") : names) +
                    ". Coverage: " + detail::format_percent(r.coverage);
    if (!r.terminal_match) {
      r.explanation += ". Final state does not match terminal state '" + d.state(r.reference_terminal).display_name() + "'";
    }
  }
  return r;
}

/// Root-cause heuristic for a failed validation. The test trace is replayed
/// along the learned graph; at the first step that leaves it, the action
/// taken decides: an action seen in training from that state means the
/// product reacted wrongly (product bug), an unseen action means the agent
/// went off-script (agent issue). A trace that never leaves the graph but
/// stops short of a terminal is an agent issue.
inline RootCause classify_root_cause(const Trace& test, const ExecutionGraph& g, const ValidationResult& result,
                                     EquivalenceClassifier& cls) {
  if (result.verdict != Verdict::Fail) {
    throw Error(ErrorCode::Precondition, "root-cause classification requires a FAIL verdict");
  }
  check_trace_invariants(test);
  auto rep = [&](std::size_t n) -> const StateObservation& { return g.nodes[n].representative; };

  if (!cls.states_equivalent(test.states.front(), rep(g.initial))) {
    return {RootCauseKind::ProductBug,
            "first state does not match the learned initial state '" + g.nodes[g.initial].name() +
                "' before any action was taken",
            0};
  }
  std::size_t current = g.initial;
  for (std::size_t i = 1; i < test.states.size(); ++i) {
    const auto& s = test.states[i];
    if (cls.states_equivalent(s, rep(current))) continue;
    bool advanced = false;
    for (std::size_t next : g.successors(current)) {
      if (cls.states_equivalent(s, rep(next))) {
        current = next;
        advanced = true;
        break;
      }
    }
    if (advanced) continue;

    const auto& action = test.actions[i - 1];
    const auto sig = action.signature();
    std::set<std::string> known;
    for (std::size_t next : g.successors(current)) {
      for (const auto& [a, _] : g.find_edge(current, next)->actions) known.insert(a);
    }
    const std::string at = "after '" + g.nodes[current].name() + "' (test index " + std::to_string(i - 1) + ")";
    if (known.count(sig)) {
      return {RootCauseKind::ProductBug,
              "action " + sig + " " + at + " matches a training action but led to an unexpected state",
              i};
    }
    return {RootCauseKind::AgentIssue, "action " + sig + " " + at + " was never taken from this state in training", i};
  }
  return {RootCauseKind::AgentIssue,
          "trace follows learned transitions but stops at '" + g.nodes[current].name() + "' before a terminal state",
          test.states.size() - 1};
}

}  // namespace tracedom
