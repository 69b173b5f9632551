#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracedom/digest.hpp"
#include "tracedom/dominators.hpp"
#include "tracedom/equivalence.hpp"
#include "tracedom/error.hpp"
#include "tracedom/graph.hpp"
#include "tracedom/trace.hpp"

namespace tracedom {

inline constexpr int kModelFormatVersion = 1;

/// Everything validation needs, learned from passing traces.
struct LearnedModel {
  EquivalenceThresholds thresholds;
  ExecutionGraph graph;
  DominatorInfo dominators;
  DominatorTree tree;

  std::vector<std::size_t> optional_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
      if (!tree.contains(n)) out.push_back(n);
    }
    return out;
  }

  std::vector<std::size_t> branch_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
      if (graph.successors(n).size() > 1) out.push_back(n);
    }
    return out;
  }

  std::vector<std::size_t> convergence_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
      if (graph.predecessors(n).size() > 1) out.push_back(n);
    }
    return out;
  }
};

/// PTA construction, merge, dominators, tree extraction.
inline LearnedModel learn_model(const std::vector<Trace>& traces, EquivalenceClassifier& cls) {
  if (traces.empty()) throw Error(ErrorCode::Precondition, "learning needs at least one trace");
  std::vector<PtaGraph> ptas;
  ptas.reserve(traces.size());
  for (const auto& t : traces) ptas.push_back(construct_pta(t));
  LearnedModel m;
  m.thresholds = cls.thresholds();
  m.graph = merge_ptas(ptas, cls);
  m.dominators = compute_dominators(m.graph);
  m.tree = extract_dominator_tree(m.graph, m.dominators);
  return m;
}

/// Unions every stored class member so byte-identical training screenshots
/// resolve by class membership during validation.
inline void seed_classifier(const LearnedModel& m, EquivalenceClassifier& cls) {
  for (const auto& node : m.graph.nodes) {
    cls.register_digest(node.representative.digest);
    for (const auto& member : node.members) cls.unite(node.representative.digest, member.digest);
  }
}

namespace detail {

inline double fixed6(double v) { return std::round(v * 1e6) / 1e6; }

template <typename T>
T get_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::ModelFormat, std::string("missing field '") + key + "'");
  return it->get<T>();
}

inline const nlohmann::json& get_node(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::ModelFormat, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace detail

/// Model document. Object keys are sorted and reals rounded to six
/// decimals, so identical inputs serialize to identical bytes.
inline nlohmann::json model_to_json(const LearnedModel& m) {
  using nlohmann::json;
  json doc;
  doc["format"] = "tracedom-model";
  doc["format_version"] = kModelFormatVersion;

  json th = to_json(m.thresholds);
  for (auto& [k, v] : th.items()) v = detail::fixed6(v.get<double>());
  doc["thresholds"] = th;

  json nodes = json::array();
  json classes = json::object();
  for (std::size_t n = 0; n < m.graph.nodes.size(); ++n) {
    const auto& node = m.graph.nodes[n];
    const auto& rep = node.representative;
    json jn;
    jn["id"] = n;
    jn["name"] = node.name();
    if (rep.label) jn["label"] = *rep.label;
    jn["is_terminal"] = node.is_terminal;
    jn["essential"] = m.tree.contains(n);
    jn["representative"] = {{"digest", rep.digest}, {"png_base64", base64_encode(*rep.png)}};
    json members = json::array();
    for (const auto& mem : node.members) {
      members.push_back({{"trace_id", mem.trace_id}, {"index", mem.index}, {"digest", mem.digest}});
      classes[mem.digest] = n;
    }
    jn["members"] = std::move(members);
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const auto& e : m.graph.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"actions", e.actions}});
  doc["graph"] = {{"initial", m.graph.initial},
                  {"terminals", m.graph.terminals},
                  {"nodes", std::move(nodes)},
                  {"edges", std::move(edges)},
                  {"walks", m.graph.walks}};
  doc["classes"] = std::move(classes);
  doc["dominators"] = {{"idom", m.dominators.idom}};

  json tree_edges = json::array();
  for (const auto& [p, c] : m.tree.edges) tree_edges.push_back({p, c});
  doc["tree"] = {{"initial", m.tree.initial},
                 {"terminals", m.tree.terminals},
                 {"nodes", m.tree.nodes},
                 {"edges", std::move(tree_edges)},
                 {"topo_order", m.tree.topo_order}};
  return doc;
}

inline std::string model_to_string(const LearnedModel& m) { return model_to_json(m).dump(2) + "\n"; }

inline LearnedModel model_from_json(const nlohmann::json& doc) {
  using nlohmann::json;
  LearnedModel m;
  try {
    if (!doc.is_object() || detail::get_field<std::string>(doc, "format") != "tracedom-model") {
      throw Error(ErrorCode::ModelFormat, "not a tracedom model file");
    }
    const int version = detail::get_field<int>(doc, "format_version");
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::ModelVersion, "model format version " + std::to_string(version) + " is not supported (expected " +
                                               std::to_string(kModelFormatVersion) + ")");
    }
    m.thresholds = thresholds_from_json(detail::get_node(doc, "thresholds"));

    const auto& g = detail::get_node(doc, "graph");
    const auto& nodes = detail::get_node(g, "nodes");
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const auto& jn = nodes[n];
      if (detail::get_field<std::size_t>(jn, "id") != n) throw Error(ErrorCode::ModelFormat, "node ids are not dense");
      GraphNode node;
      node.is_terminal = detail::get_field<bool>(jn, "is_terminal");
      const auto& rep = detail::get_node(jn, "representative");
      std::optional<std::string> label;
      if (auto it = jn.find("label"); it != jn.end()) label = it->get<std::string>();
      node.representative = StateObservation::from_png(
          0, base64_decode(detail::get_field<std::string>(rep, "png_base64")), std::move(label));
      if (node.representative.digest != detail::get_field<std::string>(rep, "digest")) {
        throw Error(ErrorCode::ModelFormat, "representative image of node " + std::to_string(n) + " fails its digest");
      }
      for (const auto& mem : detail::get_node(jn, "members")) {
        node.members.push_back({detail::get_field<std::string>(mem, "trace_id"), detail::get_field<std::size_t>(mem, "index"),
                                detail::get_field<std::string>(mem, "digest")});
      }
      m.graph.nodes.push_back(std::move(node));
    }
    for (const auto& je : detail::get_node(g, "edges")) {
      GraphEdge e;
      e.from = detail::get_field<std::size_t>(je, "from");
      e.to = detail::get_field<std::size_t>(je, "to");
      e.actions = detail::get_field<std::map<std::string, std::size_t>>(je, "actions");
      m.graph.edges.push_back(std::move(e));
    }
    m.graph.initial = detail::get_field<std::size_t>(g, "initial");
    m.graph.terminals = detail::get_field<std::vector<std::size_t>>(g, "terminals");
    m.graph.walks = detail::get_field<std::map<std::string, std::vector<std::size_t>>>(g, "walks");
    m.graph.rebuild_adjacency();

    const std::size_t n_nodes = m.graph.nodes.size();
    auto check_id = [&](std::size_t id) {
      if (id >= n_nodes) throw Error(ErrorCode::ModelFormat, "node id " + std::to_string(id) + " out of range");
      return id;
    };
    check_id(m.graph.initial);
    for (auto t : m.graph.terminals) check_id(t);

    m.dominators.entry = m.graph.initial;
    m.dominators.idom = detail::get_field<std::vector<std::size_t>>(detail::get_node(doc, "dominators"), "idom");
    if (m.dominators.idom.size() != n_nodes) throw Error(ErrorCode::ModelFormat, "idom table size mismatch");
    for (auto i : m.dominators.idom) check_id(i);

    const auto& t = detail::get_node(doc, "tree");
    m.tree.initial = check_id(detail::get_field<std::size_t>(t, "initial"));
    m.tree.terminals = detail::get_field<std::vector<std::size_t>>(t, "terminals");
    for (auto n : detail::get_field<std::vector<std::size_t>>(t, "nodes")) m.tree.nodes.insert(check_id(n));
    for (const auto& je : detail::get_node(t, "edges")) {
      const auto pair = je.get<std::vector<std::size_t>>();
      if (pair.size() != 2) throw Error(ErrorCode::ModelFormat, "tree edge must be a pair");
      if (!m.tree.contains(pair[0]) || !m.tree.contains(pair[1])) {
        throw Error(ErrorCode::ModelFormat, "tree edge leaves the essential node set");
      }
      m.tree.edges.emplace(pair[0], pair[1]);
    }
    for (auto tn : m.tree.terminals) {
      if (!m.tree.contains(tn)) throw Error(ErrorCode::ModelFormat, "terminal outside the essential node set");
    }
    m.tree.topo_order = detail::get_field<std::vector<std::size_t>>(t, "topo_order");
    for (auto n : m.tree.nodes) m.tree.states.emplace(n, m.graph.nodes[n].representative);
    if (m.tree.topo_order != topological_order(m.tree)) {
      throw Error(ErrorCode::ModelFormat, "stored topological order is inconsistent with the tree");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ModelFormat, e.what());
  }
  return m;
}

inline void save_model(const LearnedModel& m, const std::filesystem::path& path) {
  const auto text = model_to_string(m);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline LearnedModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ModelFormat, path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace tracedom
