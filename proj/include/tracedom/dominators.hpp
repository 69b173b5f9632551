#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <map>
#include <queue>
#include <ranges>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tracedom/error.hpp"
#include "tracedom/graph.hpp"

namespace tracedom {

/// A rooted directed graph with dense node ids in [0, node_count()).
template <typename G>
concept Flowgraph = requires(const G& g, std::size_t n) {
  { g.node_count() } -> std::convertible_to<std::size_t>;
  { g.entry() } -> std::convertible_to<std::size_t>;
  { g.successors(n) } -> std::ranges::input_range;
  { g.predecessors(n) } -> std::ranges::input_range;
};

/// Plain adjacency-list flowgraph.
struct Digraph {
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::vector<std::size_t>> pred;
  std::size_t root = 0;

  explicit Digraph(std::size_t n = 0, std::size_t entry = 0) : succ(n), pred(n), root(entry) {}

  void add_edge(std::size_t from, std::size_t to) {
    if (std::find(succ[from].begin(), succ[from].end(), to) != succ[from].end()) return;
    succ[from].push_back(to);
    pred[to].push_back(from);
  }

  std::size_t node_count() const { return succ.size(); }
  std::size_t entry() const { return root; }
  const std::vector<std::size_t>& successors(std::size_t n) const { return succ[n]; }
  const std::vector<std::size_t>& predecessors(std::size_t n) const { return pred[n]; }
};

struct DominatorInfo {
  std::vector<std::size_t> idom;  // idom[entry] == entry
  std::size_t entry = 0;

  /// True when `a` dominates `b` (reflexive).
  bool dominates(std::size_t a, std::size_t b) const {
    for (;;) {
      if (a == b) return true;
      if (b == entry) return false;
      b = idom[b];
    }
  }

  /// Dom(n), recovered by walking the idom chain.
  std::set<std::size_t> dominators_of(std::size_t n) const {
    std::set<std::size_t> out{n};
    while (n != entry) {
      n = idom[n];
      out.insert(n);
    }
    return out;
  }

  friend bool operator==(const DominatorInfo&, const DominatorInfo&) = default;
};

/// Reverse postorder of the nodes reachable from the entry.
template <Flowgraph G>
std::vector<std::size_t> reverse_postorder(const G& g) {
  const std::size_t n = g.node_count();
  std::vector<char> visited(n, 0);
  std::vector<std::size_t> post;
  post.reserve(n);
  // (node, next successor position)
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  stack.emplace_back(g.entry(), 0);
  visited[g.entry()] = 1;
  while (!stack.empty()) {
    auto& [node, pos] = stack.back();
    const auto& succ = g.successors(node);
    if (pos < std::ranges::size(succ)) {
      const std::size_t next = *(std::ranges::begin(succ) + pos);
      ++pos;
      if (!visited[next]) {
        visited[next] = 1;
        stack.emplace_back(next, 0);
      }
    } else {
      post.push_back(node);
      stack.pop_back();
    }
  }
  std::reverse(post.begin(), post.end());
  return post;
}

/// Iterative dataflow dominators (Cooper, Harvey & Kennedy): sweep nodes
/// in reverse postorder, intersecting predecessor idom chains until fixpoint.
/// Handles arbitrary flowgraphs including cycles.
template <Flowgraph G>
DominatorInfo compute_dominators(const G& g) {
  const std::size_t n = g.node_count();
  if (n == 0) throw Error(ErrorCode::Precondition, "empty flowgraph");
  const auto rpo = reverse_postorder(g);
  if (rpo.size() != n) {
    throw Error(ErrorCode::UnreachableNode, std::to_string(n - rpo.size()) + " node(s) unreachable from the entry");
  }
  constexpr std::size_t kUndef = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order(n);  // postorder number
  for (std::size_t i = 0; i < n; ++i) order[rpo[i]] = n - 1 - i;

  std::vector<std::size_t> idom(n, kUndef);
  const std::size_t entry = g.entry();
  idom[entry] = entry;

  auto intersect = [&](std::size_t a, std::size_t b) {
    while (a != b) {
      while (order[a] < order[b]) a = idom[a];
      while (order[b] < order[a]) b = idom[b];
    }
    return a;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t node : rpo) {
      if (node == entry) continue;
      std::size_t next = kUndef;
      for (std::size_t p : g.predecessors(node)) {
        if (idom[p] == kUndef) continue;
        next = next == kUndef ? p : intersect(p, next);
      }
      if (idom[node] != next) {
        idom[node] = next;
        changed = true;
      }
    }
  }
  return {std::move(idom), entry};
}

/// Essential-state model: the union of idom chains from every terminal.
struct DominatorTree {
  std::set<std::size_t> nodes;                              // V_D
  std::set<std::pair<std::size_t, std::size_t>> edges;      // E_D, (idom, node)
  std::size_t initial = 0;
  std::vector<std::size_t> terminals;                       // ascending
  std::vector<std::size_t> topo_order;
  std::map<std::size_t, StateObservation> states;           // representative per node in V_D

  bool contains(std::size_t n) const { return nodes.count(n) != 0; }

  std::size_t parent(std::size_t n) const {
    for (const auto& [p, c] : edges) {
      if (c == n) return p;
    }
    return n;
  }

  std::vector<std::size_t> children(std::size_t n) const {
    std::vector<std::size_t> out;
    for (const auto& [p, c] : edges) {
      if (p == n) out.push_back(c);
    }
    return out;
  }

  /// Root-to-terminal node chain.
  std::vector<std::size_t> path_to(std::size_t terminal) const {
    std::vector<std::size_t> chain{terminal};
    while (chain.back() != initial) chain.push_back(parent(chain.back()));
    std::reverse(chain.begin(), chain.end());
    return chain;
  }

  const StateObservation& state(std::size_t n) const { return states.at(n); }
};

/// Every node precedes its tree descendants; among nodes that are ready at
/// the same time the smallest representative digest goes first.
inline std::vector<std::size_t> topological_order(const DominatorTree& d) {
  using Item = std::pair<std::string, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  auto digest = [&](std::size_t n) {
    auto it = d.states.find(n);
    return it == d.states.end() ? std::string() : it->second.digest;
  };
  ready.emplace(digest(d.initial), d.initial);
  std::vector<std::size_t> out;
  while (!ready.empty()) {
    const auto n = ready.top().second;
    ready.pop();
    out.push_back(n);
    for (std::size_t c : d.children(n)) ready.emplace(digest(c), c);
  }
  return out;
}

/// Walks each terminal's idom chain back to the initial state, collecting
/// the visited nodes and the idom links between them.
inline DominatorTree extract_dominator_tree(const ExecutionGraph& g, const DominatorInfo& dom) {
  if (g.terminals.empty()) throw Error(ErrorCode::Precondition, "graph has no terminal states");
  DominatorTree d;
  const std::size_t s0 = g.initial;
  d.initial = s0;
  d.terminals = g.terminals;
  d.nodes.insert(s0);
  std::set<std::size_t> essential{s0};
  for (std::size_t t : g.terminals) {
    d.nodes.insert(t);
    std::size_t current = t;
    while (current != s0) {
      const std::size_t idom = dom.idom[current];
      if (!essential.count(idom)) {
        essential.insert(idom);
        d.nodes.insert(idom);
      }
      d.edges.emplace(idom, current);
      current = idom;
    }
  }
  for (std::size_t n : d.nodes) d.states.emplace(n, g.nodes[n].representative);
  d.topo_order = topological_order(d);
  return d;
}

}  // namespace tracedom
