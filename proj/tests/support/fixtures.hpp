#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tracedom/tracedom.hpp"

namespace fs = std::filesystem;

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("tracedom_test_" + std::to_string(rd()) + "_" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline tracedom::Image solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  tracedom::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, r, g, b);
  return img;
}

inline tracedom::Image random_image(std::mt19937_64& rng, int w, int h) {
  tracedom::Image img(w, h);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

/// Smooth random image: random 8x8 block colors, so hashes are not noise-dominated.
inline tracedom::Image blocky_image(std::mt19937_64& rng, int w, int h) {
  tracedom::Image img(w, h);
  std::vector<std::array<std::uint8_t, 3>> colors((w / 8 + 1) * (h / 8 + 1));
  for (auto& c : colors) c = {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& c = colors[(y / 8) * (w / 8 + 1) + x / 8];
      img.set(x, y, c[0], c[1], c[2]);
    }
  return img;
}

inline tracedom::Image add_noise(const tracedom::Image& src, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> noise(0.0, sigma);
  tracedom::Image out = src;
  for (auto& v : out.rgb) v = static_cast<std::uint8_t>(std::clamp(v + noise(rng), 0.0, 255.0));
  return out;
}

inline tracedom::StateObservation obs(const tracedom::Image& img, const std::string& label, std::size_t index = 0) {
  return tracedom::StateObservation::from_image(index, img, label);
}

/// Frame-level state by name, as the generator renders it.
inline tracedom::StateObservation state(const std::string& label, std::uint64_t jitter = 0) {
  return obs(tracedom::synth::render_frame(label, jitter), label);
}

/// Trace of rendered frames with default actions.
inline tracedom::Trace trace_of(const std::string& id, const std::vector<std::string>& labels, std::uint64_t seed = 0,
                                tracedom::TraceRole role = tracedom::TraceRole::Test) {
  tracedom::synth::TraceBuilder b(id, role);
  for (std::size_t i = 0; i < labels.size(); ++i) b.state(labels[i], seed == 0 ? 0 : seed + i);
  return b.build();
}

/// Model learned from the three-trace launch walkthrough.
inline tracedom::LearnedModel walkthrough_model(std::shared_ptr<tracedom::SemanticJudge> judge = nullptr) {
  if (!judge) judge = std::make_shared<tracedom::MockJudge>();
  tracedom::EquivalenceClassifier cls({}, judge, tracedom::ClassifierMode::Learning);
  return tracedom::learn_model(tracedom::synth::walkthrough_training_traces(), cls);
}

inline std::vector<std::string> names(const tracedom::LearnedModel& m, const std::vector<std::size_t>& nodes) {
  std::vector<std::string> out;
  for (auto n : nodes) out.push_back(m.graph.nodes[n].name());
  return out;
}

inline std::vector<std::string> essential_names(const tracedom::LearnedModel& m) {
  return names(m, m.tree.topo_order);
}

}  // namespace fixture
