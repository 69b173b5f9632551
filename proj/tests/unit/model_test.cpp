#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "tracedom/model.hpp"

using namespace tracedom;

namespace {

const LearnedModel& model() {
  static const LearnedModel m = fixture::walkthrough_model();
  return m;
}

ErrorCode parse_error(const nlohmann::json& doc) {
  try {
    model_from_json(doc);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "model_from_json accepted a bad document";
  return ErrorCode::Io;
}

}  // namespace

TEST(Model, SerializationIsByteStable) {
  EXPECT_EQ(model_to_string(model()), model_to_string(fixture::walkthrough_model()));
}

TEST(Model, RoundTripPreservesEverything) {
  const auto text = model_to_string(model());
  const auto back = model_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(model_to_string(back), text);
  EXPECT_EQ(back.tree.topo_order, model().tree.topo_order);
  EXPECT_EQ(back.tree.nodes, model().tree.nodes);
  EXPECT_EQ(back.dominators, model().dominators);
  EXPECT_EQ(back.thresholds, model().thresholds);
  EXPECT_EQ(fixture::essential_names(back), fixture::essential_names(model()));
}

TEST(Model, DocumentShape) {
  const auto doc = model_to_json(model());
  EXPECT_EQ(doc["format"], "tracedom-model");
  EXPECT_EQ(doc["format_version"], kModelFormatVersion);
  EXPECT_EQ(doc["thresholds"]["ssim_equal_min"], 0.98);
  EXPECT_EQ(doc["graph"]["nodes"].size(), 6u);
  EXPECT_EQ(doc["tree"]["nodes"].size(), 5u);
  EXPECT_EQ(doc["classes"].size(), 17u);  // one digest per training observation
  const auto text = model_to_string(model());
  // Keys appear in sorted order at the top level.
  EXPECT_LT(text.find("\"classes\""), text.find("\"dominators\""));
  EXPECT_LT(text.find("\"format\""), text.find("\"graph\""));
}

TEST(Model, ThresholdsAreRoundedToSixDecimals) {
  EquivalenceThresholds th;
  th.ssim_equal_min = 0.98123456789;
  EquivalenceClassifier cls(th, std::make_shared<MockJudge>(), ClassifierMode::Learning);
  const auto m = learn_model({fixture::trace_of("a", {"home", "done"}, 1, TraceRole::Training)}, cls);
  EXPECT_EQ(model_to_json(m)["thresholds"]["ssim_equal_min"].get<double>(), 0.981235);
}

TEST(Model, VersionMismatchIsReported) {
  auto doc = model_to_json(model());
  doc["format_version"] = kModelFormatVersion + 1;
  EXPECT_EQ(parse_error(doc), ErrorCode::ModelVersion);
}

TEST(Model, CorruptDocumentsAreRejected) {
  auto doc = model_to_json(model());
  auto no_tree = doc;
  no_tree.erase("tree");
  EXPECT_EQ(parse_error(no_tree), ErrorCode::ModelFormat);

  auto wrong_format = doc;
  wrong_format["format"] = "other";
  EXPECT_EQ(parse_error(wrong_format), ErrorCode::ModelFormat);

  auto bad_digest = doc;
  bad_digest["graph"]["nodes"][0]["representative"]["digest"] = std::string(64, '0');
  EXPECT_EQ(parse_error(bad_digest), ErrorCode::ModelFormat);

  auto bad_edge = doc;
  bad_edge["graph"]["edges"][0]["to"] = 99;
  EXPECT_EQ(parse_error(bad_edge), ErrorCode::ModelFormat);

  auto bad_order = doc;
  std::swap(bad_order["tree"]["topo_order"][1], bad_order["tree"]["topo_order"][2]);
  EXPECT_EQ(parse_error(bad_order), ErrorCode::ModelFormat);

  EXPECT_EQ(parse_error(nlohmann::json::array()), ErrorCode::ModelFormat);
}

TEST(Model, SaveAndLoadFiles) {
  fixture::TempDir dir;
  save_model(model(), dir / "m.json");
  const auto loaded = load_model(dir / "m.json");
  EXPECT_EQ(model_to_string(loaded), model_to_string(model()));
  fixture::write_text(dir / "junk.json", "{ nope");
  EXPECT_THROW(load_model(dir / "junk.json"), Error);
}

TEST(Model, SingleTraceModelIsItsWholePath) {
  EquivalenceClassifier cls({}, std::make_shared<MockJudge>(), ClassifierMode::Learning);
  const auto m = learn_model({fixture::trace_of("only", {"a", "b", "c", "d"}, 4, TraceRole::Training)}, cls);
  EXPECT_EQ(fixture::essential_names(m), (std::vector<std::string>{"a", "b", "c", "d"}));
}
