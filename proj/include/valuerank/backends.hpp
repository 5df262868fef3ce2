#pragma once

#include <cctype>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "httplib.h"
#include "valuerank/assets.hpp"
#include "valuerank/classifier.hpp"

namespace valuerank {

/// Deterministic keyword scorer standing in for the LLM. Reads the post
/// content after the prompt's final "Tweet:" line, so it sees exactly what a
/// real model would be asked to rate.
///
/// Scoring per value: clamp(points_per_hit * keyword hits, 0, 6). A keyword is
/// a word sequence; a trailing `*` on a word makes it a prefix match. Fixture
/// phrases short-circuit the lexicon and return a fixed rating; a content
/// containing the poison marker gets an unparseable reply.
class MockBackend : public ChatBackend {
 public:
  MockBackend() : MockBackend(json::parse(assets::kMockLexicon)) {}

  explicit MockBackend(const json& lexicon) {
    model_id_ = lexicon.value("model_id", std::string("mock-lexicon"));
    points_per_hit_ = lexicon.value("points_per_hit", 2);
    poison_marker_ = lexicon.value("poison_marker", std::string{});
    for (const auto& f : lexicon.value("fixtures", json::array())) {
      std::array<double, kValueCount> r{};
      for (const auto& [key, val] : f.at("rating").items()) {
        auto id = find_value(key);
        if (!id) throw Error(Errc::InvalidArgument, "unknown value in mock fixture", key);
        r[index_of(*id)] = val.get<double>();
      }
      fixtures_.push_back({lower(f.at("match").get<std::string>()), ValueScores(r)});
    }
    for (const auto& [key, words] : lexicon.at("keywords").items()) {
      auto id = find_value(key);
      if (!id) throw Error(Errc::InvalidArgument, "unknown value in mock lexicon", key);
      for (const auto& w : words) keywords_[index_of(*id)].push_back(tokenize(w.get<std::string>(), true));
    }
  }

  std::string model_id() const override { return model_id_; }
  bool supports_images() const override { return false; }

  std::string complete(const PromptBundle& prompt) override { return serialize_rating_or_poison(content_of(prompt.text)); }

  /// Scores raw post content directly, bypassing the prompt.
  ValueScores score_content(std::string_view content) const {
    const std::string lowered = lower(content);
    for (const auto& f : fixtures_)
      if (lowered.find(f.match) != std::string::npos) return f.rating;
    const auto tokens = tokenize(content);
    std::array<double, kValueCount> r{};
    for (std::size_t v = 0; v < kValueCount; ++v) {
      int hits = 0;
      for (const auto& kw : keywords_[v]) hits += count_matches(tokens, kw);
      r[v] = std::clamp(static_cast<double>(hits * points_per_hit_), 0.0, 6.0);
    }
    return ValueScores(r);
  }

  static std::string content_of(std::string_view prompt) {
    constexpr std::string_view marker = "Tweet:\n";
    const auto at = prompt.rfind(marker);
    return std::string(at == std::string_view::npos ? prompt : prompt.substr(at + marker.size()));
  }

 private:
  struct Fixture {
    std::string match;
    ValueScores rating;
  };

  std::string serialize_rating_or_poison(const std::string& content) const {
    if (!poison_marker_.empty() && content.find(poison_marker_) != std::string::npos) {
      return "I cannot rate this post.";
    }
    return serialize_rating(score_content(content));
  }

  static std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }

  static std::vector<std::string> tokenize(std::string_view s, bool pattern = false) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      const auto c = static_cast<unsigned char>(ch);
      if (std::isalnum(c) || c == '\'' || c == '-' || (pattern && c == '*')) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }

  static bool word_matches(const std::string& token, const std::string& pattern) {
    if (!pattern.empty() && pattern.back() == '*') {
      return token.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0 &&
             token.size() >= pattern.size() - 1;
    }
    return token == pattern;
  }

  static int count_matches(const std::vector<std::string>& tokens, const std::vector<std::string>& kw) {
    if (kw.empty() || tokens.size() < kw.size()) return 0;
    int hits = 0;
    for (std::size_t i = 0; i + kw.size() <= tokens.size(); ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < kw.size() && ok; ++k) ok = word_matches(tokens[i + k], kw[k]);
      hits += ok ? 1 : 0;
    }
    return hits;
  }

  std::string model_id_;
  int points_per_hit_ = 2;
  std::string poison_marker_;
  std::vector<Fixture> fixtures_;
  std::array<std::vector<std::vector<std::string>>, kValueCount> keywords_;
};

/// Any server speaking the OpenAI chat-completions protocol.
class OpenAICompatibleBackend : public ChatBackend {
 public:
  struct Config {
    std::string base_url = "https://api.openai.com";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    bool images = true;
    int timeout_seconds = 60;
  };

  explicit OpenAICompatibleBackend(Config cfg) : cfg_(std::move(cfg)) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }

  std::string model_id() const override { return cfg_.model; }
  bool supports_images() const override { return cfg_.images; }

  json request_body(const PromptBundle& prompt) const {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt.text}});
    if (cfg_.images)
      for (const auto& url : prompt.image_refs) content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    return json{{"model", cfg_.model},
                {"temperature", prompt.temperature},
                {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
  }

  std::string complete(const PromptBundle& prompt) override {
    httplib::Client client(cfg_.base_url);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(cfg_.path, headers, request_body(prompt).dump(), "application/json");
    if (!res) throw Error(Errc::BackendError, "chat backend unreachable", httplib::to_string(res.error()));
    if (res->status != 200) {
      throw Error(Errc::BackendError, fmt::format("chat backend returned HTTP {}", res->status), res->body);
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) throw Error(Errc::BackendError, "chat backend reply is not JSON");
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(Errc::BackendError, "chat backend reply lacks choices[0].message.content", e.what());
    }
  }

 private:
  Config cfg_;
  std::string api_key_;
};

/// Backend selection by name: "mock" or "openai-compatible".
inline std::unique_ptr<ChatBackend> make_backend(std::string_view name, const OpenAICompatibleBackend::Config& cfg = {},
                                                 const json* mock_lexicon = nullptr) {
  if (name == "mock") return mock_lexicon ? std::make_unique<MockBackend>(*mock_lexicon) : std::make_unique<MockBackend>();
  if (name == "openai-compatible") return std::make_unique<OpenAICompatibleBackend>(cfg);
  throw Error(Errc::InvalidArgument, "unknown backend", std::string(name));
}

}  // namespace valuerank
