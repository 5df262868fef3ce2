#include <gtest/gtest.h>

#include "vr_test_support.hpp"

using namespace vrtest;
using vr::Quadrant;
using vr::ValueId;

TEST(Taxonomy, NineteenValuesInCanonicalOrder) {
  const auto& t = vr::taxonomy();
  ASSERT_EQ(t.size(), 19u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(vr::index_of(t[i].id), i);
  EXPECT_EQ(t.front().schwartz_name, "Self-directed thoughts");
  EXPECT_EQ(t.front().title, "Independent thoughts");
  EXPECT_EQ(t.back().title, "Tolerance");
  EXPECT_EQ(vr::descriptor(ValueId::Stimulation).title, "Novelty");
  EXPECT_EQ(vr::descriptor(ValueId::Dominance).title, "Power");
  EXPECT_EQ(vr::descriptor(ValueId::RuleConformity).title, "Lawfulness");
  EXPECT_EQ(vr::descriptor(ValueId::InterpersonalConformity).title, "Respect");
  EXPECT_EQ(vr::descriptor(ValueId::PreservationOfNature).title, "Connection to nature");
  EXPECT_EQ(vr::descriptor(ValueId::Hedonism).definition, "Hedonism");
  EXPECT_EQ(vr::descriptor(ValueId::Face).definition,
            "Security and power through maintaining one's public image and avoiding humiliation");
  EXPECT_EQ(vr::descriptor(ValueId::UniversalConcern).definition,
            "Commitment to equality, justice, and protection for all people");
}

TEST(Taxonomy, ReturnsTheSameStorage) { EXPECT_EQ(&vr::taxonomy(), &vr::taxonomy()); }

TEST(Taxonomy, DualQuadrantValues) {
  auto quads = [](ValueId v) { return vr::descriptor(v).quadrants(); };
  EXPECT_EQ(quads(ValueId::Humility), (std::vector{Quadrant::SelfTranscendence, Quadrant::Conservation}));
  EXPECT_EQ(quads(ValueId::Face), (std::vector{Quadrant::SelfEnhancement, Quadrant::Conservation}));
  EXPECT_EQ(quads(ValueId::Hedonism), (std::vector{Quadrant::SelfEnhancement, Quadrant::OpennessToChange}));
  EXPECT_EQ(quads(ValueId::Caring), (std::vector{Quadrant::SelfTranscendence}));
}

TEST(Taxonomy, QuadrantMembershipCounts) {
  std::map<Quadrant, int> count;
  for (const auto& d : vr::taxonomy())
    for (auto q : d.quadrants()) ++count[q];
  EXPECT_EQ(count[Quadrant::SelfTranscendence], 6);
  EXPECT_EQ(count[Quadrant::OpennessToChange], 4);
  EXPECT_EQ(count[Quadrant::SelfEnhancement], 5);
  EXPECT_EQ(count[Quadrant::Conservation], 7);
}

TEST(Taxonomy, FocusPartitionCoversEveryValueOnce) {
  const auto fp = vr::focus_partition();
  EXPECT_EQ(fp.personal.size() + fp.social.size(), 19u);
  std::set<ValueId> all(fp.personal.begin(), fp.personal.end());
  all.insert(fp.social.begin(), fp.social.end());
  EXPECT_EQ(all.size(), 19u);
  EXPECT_FALSE(vr::descriptor(ValueId::Face).source_note.empty());
  EXPECT_FALSE(vr::descriptor(ValueId::Humility).source_note.empty());
  EXPECT_EQ(vr::descriptor(ValueId::Caring).focus, vr::Focus::Social);
  EXPECT_EQ(vr::descriptor(ValueId::Achievement).focus, vr::Focus::Personal);
}

TEST(Taxonomy, FindValueByTitleOrSchwartzName) {
  EXPECT_EQ(vr::find_value("Novelty"), ValueId::Stimulation);
  EXPECT_EQ(vr::find_value("Stimulation"), ValueId::Stimulation);
  EXPECT_EQ(vr::find_value("universal concern"), ValueId::UniversalConcern);
  EXPECT_EQ(vr::find_value("Equality"), ValueId::UniversalConcern);
  EXPECT_FALSE(vr::find_value("Benevolence").has_value());
}

TEST(Taxonomy, JsonDocument) {
  const auto j = vr::taxonomy_json();
  EXPECT_EQ(j.at("values").size(), 19u);
  EXPECT_EQ(j.at("values")[2].at("title"), "Novelty");
  EXPECT_EQ(j.at("values")[13].at("quadrants").size(), 2u);
  EXPECT_FALSE(j.at("version").get<std::string>().empty());
}

TEST(ValueScores, RejectsOutOfRange) {
  vr::ValueScores s;
  EXPECT_THROW(s.set(ValueId::Caring, 7), vr::Error);
  EXPECT_THROW(s.set(ValueId::Caring, -1), vr::Error);
  try {
    s.set(ValueId::Caring, 6.5);
  } catch (const vr::Error& e) {
    EXPECT_EQ(e.code(), vr::Errc::OutOfRange);
  }
}

TEST(ValueScores, JsonRoundTripByTitle) {
  const auto s = scores_with({{ValueId::Caring, 6}, {ValueId::Stimulation, 2}});
  const json j = s;
  EXPECT_EQ(j.at("Caring"), 6.0);
  EXPECT_EQ(j.at("Novelty"), 2.0);
  EXPECT_EQ(j.get<vr::ValueScores>(), s);
}

TEST(ValueScores, MissingValueInJson) {
  json j = scores_with({});
  j.erase("Tolerance");
  try {
    (void)j.get<vr::ValueScores>();
    FAIL();
  } catch (const vr::Error& e) {
    EXPECT_EQ(e.code(), vr::Errc::MissingValue);
    EXPECT_EQ(e.detail(), "Tolerance");
  }
}

TEST(WeightVector, RangeAndQuantization) {
  vr::WeightVector w;
  EXPECT_THROW(w.set(ValueId::Caring, 1.5), vr::Error);
  std::array<double, vr::kValueCount> raw{};
  raw[0] = 0.3;
  EXPECT_NO_THROW(vr::WeightVector(raw, vr::WeightMode::Free));
  try {
    vr::WeightVector(raw, vr::WeightMode::SliderQuantized);
    FAIL();
  } catch (const vr::Error& e) {
    EXPECT_EQ(e.code(), vr::Errc::QuantizationError);
  }
  raw[0] = -0.75;
  EXPECT_NO_THROW(vr::WeightVector(raw, vr::WeightMode::SliderQuantized));
}

TEST(WeightVector, JsonForms) {
  const auto full = json::parse(R"({"weights": {"Caring": 1, "Power": -0.5}, "mode": "slider"})").get<vr::WeightVector>();
  EXPECT_EQ(full[ValueId::Caring], 1.0);
  EXPECT_EQ(full[ValueId::Dominance], -0.5);
  EXPECT_EQ(full.mode(), vr::WeightMode::SliderQuantized);
  const auto bare = json::parse(R"({"Dominance": 0.25})").get<vr::WeightVector>();
  EXPECT_EQ(bare[ValueId::Dominance], 0.25);
  EXPECT_EQ(bare[ValueId::Caring], 0.0);
  EXPECT_EQ(json(full).get<vr::WeightVector>(), full);
  EXPECT_THROW(json::parse(R"({"Kindness": 1})").get<vr::WeightVector>(), vr::Error);
  EXPECT_THROW(json::parse("[1, 2]").get<vr::WeightVector>(), vr::Error);
}

TEST(Post, JsonRoundTrip) {
  vr::Post p;
  p.id = "a1";
  p.body = "hello";
  p.author = "me";
  p.kind = vr::PostKind::Quote;
  p.attachments.push_back({"https://example.org/x.png", "alt text"});
  p.link = vr::LinkCard{"T", "D"};
  auto q = std::make_shared<vr::Post>();
  q->id = "q1";
  q->body = "quoted";
  p.quoted = q;
  p.conversation.push_back(vr::Post{.id = "r1", .body = "reply"});
  const json j = p;
  EXPECT_EQ(j.get<vr::Post>(), p);
}

TEST(Post, RejectsRecordWithoutId) { EXPECT_THROW(json::parse(R"({"body": "x"})").get<vr::Post>(), vr::Error); }
