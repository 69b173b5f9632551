#include <gtest/gtest.h>

#include <algorithm>

#include "support/fixtures.hpp"
#include "tracedom/trace.hpp"

using namespace tracedom;
using fixture::TempDir;

namespace {

void write_png(const fs::path& p, const Image& img) { write_file_bytes(p, encode_png(img)); }

std::string manifest(int states, int actions) {
  nlohmann::json doc = {{"id", "t"}, {"role", "training"}, {"states", nlohmann::json::array()}, {"actions", nlohmann::json::array()}};
  for (int i = 0; i < states; ++i) doc["states"].push_back({{"image", "s" + std::to_string(i) + ".png"}});
  for (int i = 0; i < actions; ++i) doc["actions"].push_back({{"kind", "click"}, {"params", {{"x", i}}}});
  return doc.dump();
}

void write_images(const TempDir& dir, int n) {
  for (int i = 0; i < n; ++i) write_png(dir / ("s" + std::to_string(i) + ".png"), fixture::solid(8, 8, i * 20, 0, 0));
}

ErrorCode load_error(const fs::path& p) {
  try {
    load_trace(p);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "load_trace did not throw";
  return ErrorCode::Io;
}

}  // namespace

TEST(LoadTrace, SevenStatesSixActions) {
  TempDir dir;
  write_images(dir, 7);
  fixture::write_text(dir / "manifest.json", manifest(7, 6));
  const auto t = load_trace(dir.path());
  EXPECT_EQ(t.states.size(), 7u);
  EXPECT_EQ(t.actions.size(), 6u);
  EXPECT_EQ(t.role, TraceRole::Training);
  EXPECT_EQ(t.actions[3].signature(), "click{x=3}");
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(t.states[i].digest.size(), 64u);
}

TEST(LoadTrace, ActionCountMustBeStatesMinusOne) {
  TempDir dir;
  write_images(dir, 2);
  fixture::write_text(dir / "manifest.json", manifest(2, 0));
  EXPECT_EQ(load_error(dir.path()), ErrorCode::InvalidTrace);
}

TEST(LoadTrace, MissingImageIsReported) {
  TempDir dir;
  write_images(dir, 2);
  fixture::write_text(dir / "manifest.json", manifest(3, 2));
  EXPECT_EQ(load_error(dir.path()), ErrorCode::MissingImage);
}

TEST(LoadTrace, EmptyTraceIsReported) {
  TempDir dir;
  fixture::write_text(dir / "manifest.json", manifest(0, 0));
  EXPECT_EQ(load_error(dir.path()), ErrorCode::EmptyTrace);
}

TEST(LoadTrace, MalformedManifests) {
  TempDir dir;
  write_images(dir, 1);
  fixture::write_text(dir / "a.json", "{not json");
  EXPECT_EQ(load_error(dir / "a.json"), ErrorCode::ManifestParse);
  fixture::write_text(dir / "b.json", R"({"id":"x","role":"training","states":[{"image":"s0.png"}]})");
  EXPECT_EQ(load_error(dir / "b.json"), ErrorCode::ManifestParse);
  fixture::write_text(dir / "c.json", R"({"id":"x","role":"golden","states":[{"image":"s0.png"}],"actions":[]})");
  EXPECT_EQ(load_error(dir / "c.json"), ErrorCode::ManifestParse);
  EXPECT_EQ(load_error(dir / "nope.json"), ErrorCode::ManifestParse);
}

TEST(LoadTrace, NonPngImagesAreRejected) {
  TempDir dir;
  fixture::write_text(dir / "s0.png", "GIF89a not a png");
  fixture::write_text(dir / "manifest.json", manifest(1, 0));
  EXPECT_EQ(load_error(dir.path()), ErrorCode::UnsupportedFormat);
}

TEST(LoadTrace, LabelsAndMetadataAreOptional) {
  TempDir dir;
  write_images(dir, 2);
  fixture::write_text(dir / "manifest.json",
                      R"({"id":"x","role":"test","states":[{"image":"s0.png","label":"home"},{"image":"s1.png"}],
                          "actions":[{"kind":"wait"}],"metadata":{"category":"passing"}})");
  const auto t = load_trace(dir / "manifest.json");
  EXPECT_EQ(t.role, TraceRole::Test);
  EXPECT_EQ(t.states[0].label, "home");
  EXPECT_FALSE(t.states[1].label.has_value());
  EXPECT_EQ(t.metadata.at("category"), "passing");
  EXPECT_EQ(t.actions[0].signature(), "wait{}");
}

TEST(LoadTrace, DeterministicAcrossLoads) {
  TempDir dir;
  write_images(dir, 3);
  fixture::write_text(dir / "manifest.json", manifest(3, 2));
  const auto a = load_trace(dir.path());
  const auto b = load_trace(dir.path());
  EXPECT_EQ(trace_digest_sequence(a), trace_digest_sequence(b));
  EXPECT_EQ(trace_manifest_json(a), trace_manifest_json(b));
}

TEST(TraceRoundTrip, GeneratedTraceSavesAndReloadsWithIdenticalDigests) {
  TempDir dir;
  const auto original = synth::walkthrough_training_traces().front();
  save_trace(original, dir / "t1");
  const auto loaded = load_trace(dir / "t1");
  EXPECT_EQ(trace_digest_sequence(loaded), trace_digest_sequence(original));
  ASSERT_EQ(loaded.actions.size(), original.actions.size());
  for (std::size_t i = 0; i < loaded.actions.size(); ++i) {
    EXPECT_EQ(loaded.actions[i].signature(), original.actions[i].signature());
  }
  for (std::size_t i = 0; i < loaded.states.size(); ++i) EXPECT_EQ(loaded.states[i].label, original.states[i].label);
}

TEST(DigestSequence, SingleState) {
  const auto t = fixture::trace_of("one", {"start_menu"});
  EXPECT_EQ(trace_digest_sequence(t).size(), 1u);
}

TEST(DigestSequence, IdenticalFilesGiveIdenticalSequences) {
  TempDir a, b;
  write_images(a, 3);
  write_images(b, 3);
  fixture::write_text(a / "manifest.json", manifest(3, 2));
  fixture::write_text(b / "manifest.json", manifest(3, 2));
  EXPECT_EQ(trace_digest_sequence(load_trace(a.path())), trace_digest_sequence(load_trace(b.path())));
}

TEST(DigestSequence, SwappingImagesPermutesDigests) {
  TempDir dir;
  write_images(dir, 3);
  fixture::write_text(dir / "manifest.json", manifest(3, 2));
  auto swapped = nlohmann::json::parse(manifest(3, 2));
  std::swap(swapped["states"][0], swapped["states"][2]);
  fixture::write_text(dir / "swapped.json", swapped.dump());
  auto expected = trace_digest_sequence(load_trace(dir / "manifest.json"));
  std::swap(expected[0], expected[2]);
  EXPECT_EQ(trace_digest_sequence(load_trace(dir / "swapped.json")), expected);
}

TEST(ActionSignature, ParamsSortedByKey) {
  ActionRecord a{"type", {{"z", "1"}, {"a", "2"}}, 0, 1};
  EXPECT_EQ(a.signature(), "type{a=2,z=1}");
}

TEST(TraceInvariants, PropertyRandomTracesRoundTrip) {
  std::mt19937_64 rng(7);
  TempDir dir;
  for (int iter = 0; iter < 10; ++iter) {
    const int m = 1 + static_cast<int>(rng() % 6);
    synth::TraceBuilder b("p" + std::to_string(iter), TraceRole::Test);
    for (int i = 0; i < m; ++i) b.frame(fixture::random_image(rng, 16, 12), "s" + std::to_string(i));
    const auto t = b.build();
    EXPECT_EQ(t.actions.size(), t.states.size() - 1);
    const auto loaded = load_trace(save_trace(t, dir / t.id));
    EXPECT_EQ(loaded.states.size(), static_cast<std::size_t>(m));
    EXPECT_EQ(trace_digest_sequence(loaded), trace_digest_sequence(t));
  }
}
