#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tracedom/image.hpp"
#include "tracedom/trace.hpp"

// Deterministic synthetic screenshots and traces for tests and benchmarks.
namespace tracedom::synth {

inline constexpr int kFrameWidth = 128;
inline constexpr int kFrameHeight = 96;
inline constexpr int kTitleBarHeight = 8;
inline constexpr int kBlock = 8;

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

struct Glyph {
  char c;
  const char* rows;  // 5 rows of 3 columns, '#' = ink
};

inline constexpr std::array<Glyph, 40> kFont = {{
    {'a', ".#.#.#####.##.#"}, {'b', "##.#.###.#.###."}, {'c', ".###..#..#...##"}, {'d', "##.#.##.##.###."},
    {'e', "####..##.#..###"}, {'f', "####..##.#..#.."}, {'g', ".###..#.##.#.##"}, {'h', "#.##.#####.##.#"},
    {'i', "###.#..#..#.###"}, {'j', "..#..#..##.#.#."}, {'k', "#.##.###.#.##.#"}, {'l', "#..#..#..#..###"},
    {'m', "#.########.##.#"}, {'n', "##.#.##.##.##.#"}, {'o', ".#.#.##.##.#.#."}, {'p', "##.#.###.#..#.."},
    {'q', ".#.#.##.###..##"}, {'r', "##.#.###.#.##.#"}, {'s', ".###...#...###."}, {'t', "###.#..#..#..#."},
    {'u', "#.##.##.##.####"}, {'v', "#.##.##.##.#.#."}, {'w', "#.##.########.#"}, {'x', "#.##.#.#.#.##.#"},
    {'y', "#.##.#.#..#..#."}, {'z', "###..#.#.#..###"}, {'0', "####.##.##.####"}, {'1', ".#.##..#..#.###"},
    {'2', "##...#.#.#..###"}, {'3', "##...#.#...###."}, {'4', "#.##.####..#..#"}, {'5', "####..##...###."},
    {'6', ".###..####.####"}, {'7', "###..#.#..#..#."}, {'8', "####.#####.####"}, {'9', "####.####..###."},
    {'_', "............###"}, {':', "....#.....#...."}, {'-', "......###......"}, {' ', "..............."},
}};

inline const char* glyph_rows(char c) {
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const auto& g : kFont) {
    if (g.c == c) return g.rows;
  }
  return kFont.back().rows;
}

}  // namespace detail

/// Draws `text` with a 3x5 bitmap font, 1px letter spacing, clipped.
inline void draw_text(Image& img, int x, int y, std::string_view text, std::array<std::uint8_t, 3> ink) {
  for (char c : text) {
    const char* rows = detail::glyph_rows(c);
    const std::size_t len = std::char_traits<char>::length(rows);
    for (std::size_t i = 0; i < len && i < 15; ++i) {
      if (rows[i] != '#') continue;
      const int px = x + static_cast<int>(i % 3);
      const int py = y + static_cast<int>(i / 3);
      if (px >= 0 && py >= 0 && px < img.width && py < img.height) img.set(px, py, ink[0], ink[1], ink[2]);
    }
    x += 4;
  }
}

inline void fill_rect(Image& img, int x0, int y0, int w, int h, std::array<std::uint8_t, 3> c) {
  for (int y = std::max(0, y0); y < std::min(img.height, y0 + h); ++y)
    for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x) img.set(x, y, c[0], c[1], c[2]);
}

/// Splits "name#variant" into its state name and cosmetic variant.
inline std::pair<std::string, std::string> split_label(std::string_view label) {
  const auto pos = label.find('#');
  if (pos == std::string_view::npos) return {std::string(label), {}};
  return {std::string(label.substr(0, pos)), std::string(label.substr(pos + 1))};
}

/// Renders the screenshot of a logical UI state. The body is a block
/// pattern seeded by the state name, so different states are structurally
/// unrelated. A cosmetic variant ("#decor...") recolors the title bar; a
/// nonzero `jitter_seed` adds low-amplitude noise that stays well inside
/// the Tier-1 equal band.
inline Image render_frame(std::string_view label, std::uint64_t jitter_seed = 0) {
  const auto [name, variant] = split_label(label);
  std::mt19937_64 rng(stable_hash(name));
  Image img(kFrameWidth, kFrameHeight);

  // Body: grid of blocks, each with a random base color and a horizontal
  // or vertical split.
  for (int by = kTitleBarHeight; by < kFrameHeight; by += kBlock) {
    for (int bx = 0; bx < kFrameWidth; bx += kBlock) {
      const auto r = rng();
      const std::array<std::uint8_t, 3> c1 = {static_cast<std::uint8_t>(r & 0xff), static_cast<std::uint8_t>((r >> 8) & 0xff),
                                              static_cast<std::uint8_t>((r >> 16) & 0xff)};
      const std::array<std::uint8_t, 3> c2 = {static_cast<std::uint8_t>((r >> 24) & 0xff),
                                              static_cast<std::uint8_t>((r >> 32) & 0xff),
                                              static_cast<std::uint8_t>((r >> 40) & 0xff)};
      const bool vertical = (r >> 48) & 1;
      const int split = 2 + static_cast<int>((r >> 49) % 5);
      fill_rect(img, bx, by, kBlock, kBlock, c1);
      if (vertical) {
        fill_rect(img, bx + split, by, kBlock - split, kBlock, c2);
      } else {
        fill_rect(img, bx, by + split, kBlock, kBlock - split, c2);
      }
    }
  }

  // Title bar; the cosmetic variant only shifts its shade.
  std::uint8_t shade = 48;
  if (!variant.empty()) shade = static_cast<std::uint8_t>(64 + stable_hash(variant) % 96);
  fill_rect(img, 0, 0, kFrameWidth, kTitleBarHeight, {shade, shade, static_cast<std::uint8_t>(shade + 16)});
  draw_text(img, 2, 1, name, {230, 230, 230});

  if (jitter_seed != 0) {
    std::mt19937_64 jr(jitter_seed);
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
      const auto r = jr();
      if ((r & 0xf) != 0) continue;  // ~1/16 of the pixels
      const int delta = (r >> 4) & 1 ? 2 : -2;
      for (int c = 0; c < 3; ++c) {
        img.rgb[i + c] = static_cast<std::uint8_t>(std::clamp(int{img.rgb[i + c]} + delta, 0, 255));
      }
    }
  }
  return img;
}

/// Same frame with a clock widget in the bottom-right corner.
inline Image render_frame_with_clock(std::string_view label, std::string_view clock, std::uint64_t jitter_seed = 0) {
  Image img = render_frame(label, jitter_seed);
  const std::uint64_t h = stable_hash(clock);
  const std::uint8_t bg = static_cast<std::uint8_t>(20 + h % 40);
  fill_rect(img, kFrameWidth - 34, kFrameHeight - 10, 34, 10, {bg, bg, bg});
  draw_text(img, kFrameWidth - 32, kFrameHeight - 8, clock, {240, 240, 120});
  return img;
}

struct StepAction {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> params;

  ActionRecord record(std::size_t from) const { return {kind, params, from, from + 1}; }
};

/// One state of a scenario and the action that leads into it.
struct ScenarioStep {
  std::string name;
  bool optional = false;
  StepAction action;
};

/// The VS Code search walkthrough: the loading screen is the only
/// optional state.
inline std::vector<ScenarioStep> default_scenario() {
  return {
      {"start_menu", false, {"start", {}}},
      {"launch", false, {"type", {{"text", "vs code"}}}},
      {"loading", true, {"click", {{"target", "vscode_result"}}}},
      {"main_window", false, {"wait", {}}},
      {"search_dialog", false, {"key", {{"keys", "ctrl+shift+f"}}}},
      {"results", false, {"type", {{"text", "needle"}}}},
  };
}

/// Incrementally builds a trace of rendered frames.
class TraceBuilder {
 public:
  TraceBuilder(std::string id, TraceRole role) {
    trace_.id = std::move(id);
    trace_.role = role;
  }

  TraceBuilder& state(const std::string& label, std::uint64_t jitter_seed = 0,
                      std::optional<StepAction> into = std::nullopt) {
    return frame(render_frame(label, jitter_seed), label, std::move(into));
  }

  TraceBuilder& frame(const Image& img, const std::string& label, std::optional<StepAction> into = std::nullopt) {
    const std::size_t i = trace_.states.size();
    if (i > 0) trace_.actions.push_back(into.value_or(StepAction{"wait", {}}).record(i - 1));
    trace_.states.push_back(StateObservation::from_image(i, img, label));
    return *this;
  }

  TraceBuilder& observation(StateObservation obs, std::optional<StepAction> into = std::nullopt) {
    const std::size_t i = trace_.states.size();
    if (i > 0) trace_.actions.push_back(into.value_or(StepAction{"wait", {}}).record(i - 1));
    obs.index = i;
    trace_.states.push_back(std::move(obs));
    return *this;
  }

  TraceBuilder& meta(const std::string& k, const std::string& v) {
    trace_.metadata[k] = v;
    return *this;
  }

  Trace build() const {
    check_trace_invariants(trace_);
    return trace_;
  }

 private:
  Trace trace_;
};

/// Renders a scenario walk. `include[i]` selects optional steps; when
/// optional steps are skipped, the action of the first skipped step leads
/// into the next included one (the user's action is the same, the
/// transient screen just did not appear).
inline Trace scenario_trace(const std::string& id, TraceRole role, const std::vector<ScenarioStep>& steps,
                            const std::vector<bool>& include, std::uint64_t jitter_seed) {
  TraceBuilder b(id, role);
  std::optional<StepAction> pending;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!include[i]) {
      if (!pending) pending = steps[i].action;
      continue;
    }
    const auto into = pending.value_or(steps[i].action);
    pending.reset();
    b.state(steps[i].name, jitter_seed == 0 ? 0 : jitter_seed + i, into);
  }
  return b.build();
}

/// Writes a set of traces as `<root>/<trace id>/manifest.json` trees.
inline std::vector<std::filesystem::path> write_traces(const std::vector<Trace>& traces,
                                                       const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  for (const auto& t : traces) out.push_back(save_trace(t, root / t.id));
  return out;
}

/// The walkthrough walkthrough as three training traces: with, without,
/// and again with the loading screen.
inline std::vector<Trace> walkthrough_training_traces() {
  const auto steps = default_scenario();
  return {
      scenario_trace("t1_with_loading", TraceRole::Training, steps, {true, true, true, true, true, true}, 101),
      scenario_trace("t2_without_loading", TraceRole::Training, steps, {true, true, false, true, true, true}, 202),
      scenario_trace("t3_with_loading", TraceRole::Training, steps, {true, true, true, true, true, true}, 303),
  };
}

/// Launch straight to the search dialog: the main window never shows.
inline Trace walkthrough_skip_main_window() {
  TraceBuilder b("skip_main_window", TraceRole::Test);
  b.state("start_menu", 404)
      .state("launch", 405, StepAction{"type", {{"text", "vs code"}}})
      .state("search_dialog", 406, StepAction{"key", {{"keys", "ctrl+shift+f"}}})
      .state("results", 407, StepAction{"type", {{"text", "needle"}}});
  return b.build();
}

inline Trace walkthrough_without_loading() {
  return scenario_trace("no_loading", TraceRole::Test, default_scenario(), {true, true, false, true, true, true}, 505);
}

}  // namespace tracedom::synth
