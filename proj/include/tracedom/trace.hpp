#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tracedom/digest.hpp"
#include "tracedom/error.hpp"
#include "tracedom/image.hpp"

namespace tracedom {

enum class TraceRole { Training, Test };

inline std::string to_string(TraceRole r) { return r == TraceRole::Training ? "training" : "test"; }

/// One observed state. Image payloads are shared and immutable, so copies
/// of an observation are cheap and safe to hand across threads.
struct StateObservation {
  std::size_t index = 0;
  std::shared_ptr<const Image> image;
  std::shared_ptr<const std::vector<std::uint8_t>> png;
  std::optional<std::string> label;
  std::string digest;
  std::string image_path;  // as written in the manifest, relative to it

  /// Wraps already-encoded PNG bytes; the digest is taken over exactly these bytes.
  static StateObservation from_png(std::size_t index, std::vector<std::uint8_t> png_bytes,
                                   std::optional<std::string> label = std::nullopt) {
    StateObservation s;
    s.index = index;
    s.digest = sha256_hex(png_bytes);
    s.image = std::make_shared<const Image>(decode_png(png_bytes));
    s.png = std::make_shared<const std::vector<std::uint8_t>>(std::move(png_bytes));
    s.label = std::move(label);
    return s;
  }

  static StateObservation from_image(std::size_t index, const Image& image,
                                     std::optional<std::string> label = std::nullopt) {
    return from_png(index, encode_png(image), std::move(label));
  }

  std::string display_name() const { return label ? *label : digest.substr(0, 12); }
};

struct ActionRecord {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> params;
  std::size_t from_index = 0;
  std::size_t to_index = 1;

  /// Canonical `kind{k=v,...}` form with parameters sorted by key. Two
  /// actions with equal signatures are the same action for root-cause purposes.
  std::string signature() const {
    auto sorted = params;
    std::sort(sorted.begin(), sorted.end());
    std::string s = kind + "{";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i) s += ",";
      s += sorted[i].first + "=" + sorted[i].second;
    }
    return s + "}";
  }
};

struct Trace {
  std::string id;
  std::vector<StateObservation> states;
  std::vector<ActionRecord> actions;
  TraceRole role = TraceRole::Training;
  // Free-form string annotations (benchmark category, simulated self-report).
  std::map<std::string, std::string> metadata;

  std::size_t length() const { return states.size(); }
};

inline void check_trace_invariants(const Trace& t) {
  if (t.states.empty()) throw Error(ErrorCode::EmptyTrace, "trace '" + t.id + "' has no states");
  if (t.actions.size() != t.states.size() - 1) {
    throw Error(ErrorCode::InvalidTrace, "trace '" + t.id + "' has " + std::to_string(t.states.size()) +
                                             " states but " + std::to_string(t.actions.size()) +
                                             " actions (expected " + std::to_string(t.states.size() - 1) + ")");
  }
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    if (t.states[i].index != i) {
      throw Error(ErrorCode::InvalidTrace, "state indices of trace '" + t.id + "' are not consecutive");
    }
  }
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    if (t.actions[i].from_index != i || t.actions[i].to_index != i + 1) {
      throw Error(ErrorCode::InvalidTrace, "action " + std::to_string(i) + " of trace '" + t.id +
                                               "' does not connect consecutive states");
    }
  }
}

inline std::vector<std::string> trace_digest_sequence(const Trace& t) {
  std::vector<std::string> out;
  out.reserve(t.states.size());
  for (const auto& s : t.states) out.push_back(s.digest);
  return out;
}

namespace detail {

inline std::string param_value_string(const nlohmann::ordered_json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

inline const nlohmann::ordered_json& require_field(const nlohmann::ordered_json& obj, const char* key,
                                                   const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::ManifestParse, where + ": missing field '" + key + "'");
  return *it;
}

}  // namespace detail

/// Reads a trace manifest and every PNG it references. Images resolve
/// relative to the manifest's directory. A directory argument means
/// `<dir>/manifest.json`.
inline Trace load_trace(std::filesystem::path manifest_path) {
  namespace fs = std::filesystem;
  using ojson = nlohmann::ordered_json;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  const std::string where = manifest_path.string();

  ojson doc;
  try {
    auto bytes = read_file_bytes(manifest_path);
    doc = ojson::parse(bytes.begin(), bytes.end());
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::ManifestParse, where + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ManifestParse, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ManifestParse, where + ": manifest is not a JSON object");

  Trace t;
  try {
    t.id = detail::require_field(doc, "id", where).get<std::string>();
    const auto role = detail::require_field(doc, "role", where).get<std::string>();
    if (role == "training") {
      t.role = TraceRole::Training;
    } else if (role == "test") {
      t.role = TraceRole::Test;
    } else {
      throw Error(ErrorCode::ManifestParse, where + ": role must be 'training' or 'test'");
    }
    const auto& states = detail::require_field(doc, "states", where);
    const auto& actions = detail::require_field(doc, "actions", where);
    if (!states.is_array() || !actions.is_array()) {
      throw Error(ErrorCode::ManifestParse, where + ": 'states' and 'actions' must be arrays");
    }
    if (states.empty()) throw Error(ErrorCode::EmptyTrace, where + ": trace has no states");

    const fs::path base = manifest_path.parent_path();
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto rel = detail::require_field(states[i], "image", where).get<std::string>();
      const fs::path img_path = base / rel;
      if (!fs::is_regular_file(img_path)) {
        throw Error(ErrorCode::MissingImage, where + ": image '" + rel + "' not found");
      }
      std::optional<std::string> label;
      if (auto it = states[i].find("label"); it != states[i].end() && !it->is_null()) {
        label = it->get<std::string>();
      }
      auto obs = StateObservation::from_png(i, read_file_bytes(img_path), std::move(label));
      obs.image_path = rel;
      t.states.push_back(std::move(obs));
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
      ActionRecord a;
      a.kind = detail::require_field(actions[i], "kind", where).get<std::string>();
      if (auto it = actions[i].find("params"); it != actions[i].end()) {
        if (!it->is_object()) throw Error(ErrorCode::ManifestParse, where + ": action params must be an object");
        for (const auto& [k, v] : it->items()) a.params.emplace_back(k, detail::param_value_string(v));
      }
      a.from_index = i;
      a.to_index = i + 1;
      t.actions.push_back(std::move(a));
    }
    if (auto it = doc.find("metadata"); it != doc.end() && it->is_object()) {
      for (const auto& [k, v] : it->items()) t.metadata[k] = detail::param_value_string(v);
    }
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::ManifestParse, where + ": " + e.what());
  }
  check_trace_invariants(t);
  return t;
}

inline nlohmann::ordered_json trace_manifest_json(const Trace& t) {
  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["id"] = t.id;
  doc["role"] = to_string(t.role);
  ojson states = ojson::array();
  for (const auto& s : t.states) {
    ojson st;
    st["image"] = s.image_path;
    if (s.label) st["label"] = *s.label;
    states.push_back(std::move(st));
  }
  doc["states"] = std::move(states);
  ojson actions = ojson::array();
  for (const auto& a : t.actions) {
    ojson ac;
    ac["kind"] = a.kind;
    ojson params = ojson::object();
    for (const auto& [k, v] : a.params) params[k] = v;
    ac["params"] = std::move(params);
    actions.push_back(std::move(ac));
  }
  doc["actions"] = std::move(actions);
  if (!t.metadata.empty()) {
    ojson meta = ojson::object();
    for (const auto& [k, v] : t.metadata) meta[k] = v;
    doc["metadata"] = std::move(meta);
  }
  return doc;
}

/// Writes `dir/manifest.json` plus one PNG per state. States without an
/// image_path get `state_NNN.png`. Returns the manifest path.
inline std::filesystem::path save_trace(const Trace& t, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  check_trace_invariants(t);
  fs::create_directories(dir);
  Trace copy = t;
  for (auto& s : copy.states) {
    if (s.image_path.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "state_%03zu.png", s.index);
      s.image_path = name;
    }
    if (!s.png) throw Error(ErrorCode::InvalidTrace, "state without PNG payload cannot be saved");
    write_file_bytes(dir / s.image_path, *s.png);
  }
  const auto manifest = dir / "manifest.json";
  const std::string text = trace_manifest_json(copy).dump(2) + "\n";
  write_file_bytes(manifest, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return manifest;
}

}  // namespace tracedom
