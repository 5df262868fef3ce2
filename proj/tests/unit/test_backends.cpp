#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "vr_test_support.hpp"

using namespace vrtest;
using vr::ValueId;

TEST(MockBackend, KeywordsScoreTwoPerHitAndClamp) {
  vr::MockBackend m;
  EXPECT_EQ(m.score_content("fun")[ValueId::Hedonism], 2.0);
  EXPECT_EQ(m.score_content("Fun, FUN!")[ValueId::Hedonism], 4.0);
  EXPECT_EQ(m.score_content("fun fun fun fun fun")[ValueId::Hedonism], 6.0);
  EXPECT_EQ(m.score_content("winning winners")[ValueId::Achievement], 4.0);
  EXPECT_EQ(m.score_content("funny")[ValueId::Hedonism], 0.0);
  EXPECT_EQ(m.score_content("talk about national security")[ValueId::SocietalSecurity], 2.0);
  EXPECT_EQ(m.score_content("nothing relevant"), vr::ValueScores{});
}

TEST(MockBackend, ReadsOnlyTheTweetSection) {
  vr::MockBackend m;
  const auto reply = m.complete(vr::build_prompt(vr::Post{.id = "a", .body = "party"}));
  const auto s = vr::parse_rating(reply);
  EXPECT_EQ(s, scores_with({{ValueId::Hedonism, 2}}));
}

TEST(MockBackend, PoisonMarkerYieldsUnparseableReply) {
  vr::MockBackend m;
  const auto reply = m.complete(vr::build_prompt(vr::Post{.id = "a", .body = "x __POISON__"}));
  EXPECT_THROW(vr::parse_rating(reply), vr::Error);
}

TEST(MockBackend, CustomLexicon) {
  const json lex = json::parse(R"({"model_id": "tiny", "points_per_hit": 3,
    "keywords": {"Caring": ["hug*"]},
    "fixtures": [{"match": "Exact Phrase", "rating": {"Power": 5}}]})");
  vr::MockBackend m(lex);
  EXPECT_EQ(m.model_id(), "tiny");
  EXPECT_EQ(m.score_content("hugs")[ValueId::Caring], 3.0);
  EXPECT_EQ(m.score_content("an exact phrase hugs"), scores_with({{ValueId::Dominance, 5}}));
  EXPECT_THROW(vr::MockBackend(json::parse(R"({"keywords": {"Kindness": ["x"]}})")), vr::Error);
}

TEST(MockBackend, LabelExamplesParseToExpectedVectors) {
  std::ifstream in(golden_path("label_examples.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    const auto want = j.at("expected").get<std::vector<double>>();
    const auto got = vr::parse_rating(j.at("raw").get<std::string>());
    EXPECT_EQ(std::vector<double>(got.ratings().begin(), got.ratings().end()), want) << "example " << n;
    ++n;
  }
  EXPECT_EQ(n, 5);
}

TEST(MakeBackend, ByName) {
  EXPECT_EQ(vr::make_backend("mock")->model_id(), "mock-lexicon");
  vr::OpenAICompatibleBackend::Config cfg;
  cfg.model = "m1";
  EXPECT_EQ(vr::make_backend("openai-compatible", cfg)->model_id(), "m1");
  EXPECT_THROW(vr::make_backend("carrier-pigeon"), vr::Error);
}

class OpenAIStub : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      last_body_ = json::parse(req.body);
      last_auth_ = req.get_header_value("Authorization");
      if (fail_) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
        return;
      }
      json reply{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content_}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
    ::unsetenv("VR_TEST_KEY");
  }

  vr::OpenAICompatibleBackend::Config config() const {
    vr::OpenAICompatibleBackend::Config cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_);
    cfg.model = "test-model";
    cfg.api_key_env = "VR_TEST_KEY";
    cfg.timeout_seconds = 5;
    return cfg;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  json last_body_;
  std::string last_auth_;
  std::string content_ = R"({"Rating": {"Caring": 3}})";
  bool fail_ = false;
};

TEST_F(OpenAIStub, SendsTextAndImagesAtTemperatureOne) {
  ::setenv("VR_TEST_KEY", "sekret", 1);
  vr::OpenAICompatibleBackend backend(config());
  vr::PromptBundle p;
  p.text = "hello";
  p.image_refs = {"https://img.example/a.png"};
  EXPECT_EQ(backend.complete(p), content_);
  std::lock_guard lock(mutex_);
  EXPECT_EQ(last_auth_, "Bearer sekret");
  EXPECT_EQ(last_body_.at("model"), "test-model");
  EXPECT_EQ(last_body_.at("temperature"), 1.0);
  const auto& content = last_body_.at("messages").at(0).at("content");
  ASSERT_EQ(content.size(), 2u);
  EXPECT_EQ(content[0].at("text"), "hello");
  EXPECT_EQ(content[1].at("image_url").at("url"), "https://img.example/a.png");
}

TEST_F(OpenAIStub, NoKeyNoAuthorizationHeader) {
  vr::OpenAICompatibleBackend backend(config());
  vr::PromptBundle p;
  p.text = "hello";
  backend.complete(p);
  std::lock_guard lock(mutex_);
  EXPECT_TRUE(last_auth_.empty());
}

TEST_F(OpenAIStub, HttpErrorIsBackendError) {
  fail_ = true;
  vr::OpenAICompatibleBackend backend(config());
  try {
    backend.complete(vr::PromptBundle{.text = "x"});
    FAIL();
  } catch (const vr::Error& e) {
    EXPECT_EQ(e.code(), vr::Errc::BackendError);
    EXPECT_EQ(e.detail(), "overloaded");
  }
}

TEST_F(OpenAIStub, ClassifyPostThroughHttp) {
  content_ = vr::serialize_rating(scores_with({{ValueId::Caring, 3}}));
  vr::OpenAICompatibleBackend backend(config());
  vr::MemoryLabelStore cache;
  EXPECT_EQ(vr::classify_post(vr::Post{.id = "a", .body = "x"}, backend, cache)[ValueId::Caring], 3.0);
  EXPECT_TRUE(cache.get({"a", "value-labeling-v1", "test-model"}).has_value());
}

TEST(OpenAIBackend, UnreachableServerIsBackendError) {
  vr::OpenAICompatibleBackend::Config cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.timeout_seconds = 2;
  vr::OpenAICompatibleBackend backend(cfg);
  try {
    backend.complete(vr::PromptBundle{.text = "x"});
    FAIL();
  } catch (const vr::Error& e) {
    EXPECT_EQ(e.code(), vr::Errc::BackendError);
  }
}
