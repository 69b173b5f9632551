#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tracedom/equivalence.hpp"
#include "tracedom/error.hpp"
#include "tracedom/trace.hpp"

namespace tracedom {

/// Prefix tree acceptor of a single trace: a simple path, one node per
/// observation, one edge per action.
struct PtaGraph {
  struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    ActionRecord action;
  };

  std::string trace_id;
  std::vector<StateObservation> nodes;
  std::vector<Edge> edges;

  std::size_t root() const { return 0; }
};

inline PtaGraph construct_pta(const Trace& t) {
  check_trace_invariants(t);
  PtaGraph g;
  g.trace_id = t.id;
  g.nodes = t.states;
  g.edges.reserve(t.actions.size());
  for (std::size_t i = 0; i < t.actions.size(); ++i) g.edges.push_back({i, i + 1, t.actions[i]});
  return g;
}

/// Where an observation came from.
struct MemberRef {
  std::string trace_id;
  std::size_t index = 0;
  std::string digest;

  friend auto operator<=>(const MemberRef& a, const MemberRef& b) {
    return std::tie(a.trace_id, a.index) <=> std::tie(b.trace_id, b.index);
  }
  friend bool operator==(const MemberRef& a, const MemberRef& b) {
    return a.trace_id == b.trace_id && a.index == b.index;
  }
};

struct GraphNode {
  StateObservation representative;
  std::vector<MemberRef> members;  // sorted by (trace id, index)
  bool is_terminal = false;

  std::string name() const { return representative.display_name(); }
};

struct GraphEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::map<std::string, std::size_t> actions;  // action signature -> occurrences
};

/// Merged multi-trace graph over equivalence classes.
class ExecutionGraph {
 public:
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;  // sorted by (from, to)
  std::size_t initial = 0;
  std::vector<std::size_t> terminals;  // ascending
  // Collapsed class walk of every training trace, keyed by trace id.
  std::map<std::string, std::vector<std::size_t>> walks;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t entry() const { return initial; }
  const std::vector<std::size_t>& successors(std::size_t n) const { return succ_[n]; }
  const std::vector<std::size_t>& predecessors(std::size_t n) const { return pred_[n]; }

  const GraphEdge* find_edge(std::size_t from, std::size_t to) const {
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{from, to},
                               [](const GraphEdge& e, const std::pair<std::size_t, std::size_t>& k) {
                                 return std::pair{e.from, e.to} < k;
                               });
    return it != edges.end() && it->from == from && it->to == to ? &*it : nullptr;
  }

  bool is_terminal(std::size_t n) const { return std::binary_search(terminals.begin(), terminals.end(), n); }

  /// Rebuilds adjacency after `edges` changes; keeps edges sorted.
  void rebuild_adjacency() {
    std::sort(edges.begin(), edges.end(),
              [](const GraphEdge& a, const GraphEdge& b) { return std::pair{a.from, a.to} < std::pair{b.from, b.to}; });
    succ_.assign(nodes.size(), {});
    pred_.assign(nodes.size(), {});
    for (const auto& e : edges) {
      if (e.from >= nodes.size() || e.to >= nodes.size()) {
        throw Error(ErrorCode::ModelFormat, "edge references a node that does not exist");
      }
      succ_[e.from].push_back(e.to);
      pred_[e.to].push_back(e.from);
    }
    for (auto& p : pred_) std::sort(p.begin(), p.end());
  }

 private:
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
};

/// Merges per-trace PTAs into one graph whose nodes are the classifier's
/// equivalence classes. Traces are processed in the given order and each
/// new observation is compared against one anchor per existing class,
/// joining the first class it matches.
inline ExecutionGraph merge_ptas(const std::vector<PtaGraph>& ptas, EquivalenceClassifier& cls) {
  if (ptas.empty()) throw Error(ErrorCode::Precondition, "merge_ptas needs at least one PTA");

  std::unordered_map<std::string, const StateObservation*> seen;
  std::vector<const StateObservation*> anchors;
  for (const auto& pta : ptas) {
    for (const auto& obs : pta.nodes) {
      if (seen.count(obs.digest)) continue;
      seen.emplace(obs.digest, &obs);
      cls.register_digest(obs.digest);
      for (const auto* anchor : anchors) {
        if (cls.states_equivalent(obs, *anchor)) break;
      }
      if (cls.class_of(obs.digest) == obs.digest) anchors.push_back(&obs);
    }
  }

  const auto& first = ptas.front().nodes.front();
  for (const auto& pta : ptas) {
    if (!cls.same_class(pta.nodes.front().digest, first.digest)) {
      throw Error(ErrorCode::StartStateMismatch,
                  "trace '" + pta.trace_id + "' does not start in the same state as '" + ptas.front().trace_id + "'");
    }
  }

  ExecutionGraph g;
  std::unordered_map<std::string, std::size_t> node_of_class;
  std::vector<std::tuple<MemberRef, const StateObservation*>> best_member;
  auto node_for = [&](const StateObservation& obs, const std::string& trace_id) {
    const auto root = cls.class_of(obs.digest);
    auto [it, inserted] = node_of_class.try_emplace(root, g.nodes.size());
    MemberRef ref{trace_id, obs.index, obs.digest};
    if (inserted) {
      g.nodes.push_back({});
      best_member.emplace_back(ref, &obs);
    } else if (ref < std::get<0>(best_member[it->second])) {
      best_member[it->second] = {ref, &obs};
    }
    g.nodes[it->second].members.push_back(std::move(ref));
    return it->second;
  };

  std::map<std::pair<std::size_t, std::size_t>, std::map<std::string, std::size_t>> edge_actions;
  for (const auto& pta : ptas) {
    std::vector<std::size_t> walk;
    for (std::size_t i = 0; i < pta.nodes.size(); ++i) {
      const auto n = node_for(pta.nodes[i], pta.trace_id);
      if (!walk.empty() && walk.back() == n) continue;  // consecutive duplicate
      if (!walk.empty()) edge_actions[{walk.back(), n}][pta.edges[i - 1].action.signature()]++;
      walk.push_back(n);
    }
    g.nodes[walk.back()].is_terminal = true;
    if (!g.walks.emplace(pta.trace_id, std::move(walk)).second) {
      throw Error(ErrorCode::InvalidTrace, "duplicate trace id '" + pta.trace_id + "'");
    }
  }

  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    auto& node = g.nodes[n];
    std::sort(node.members.begin(), node.members.end());
    node.members.erase(std::unique(node.members.begin(), node.members.end()), node.members.end());
    node.representative = *std::get<1>(best_member[n]);
    if (node.is_terminal) g.terminals.push_back(n);
  }
  g.initial = node_of_class.at(cls.class_of(first.digest));
  for (auto& [key, actions] : edge_actions) g.edges.push_back({key.first, key.second, std::move(actions)});
  g.rebuild_adjacency();
  return g;
}

}  // namespace tracedom
