#pragma once

// Value labeling: prompt assembly, rating parsing and the classify_* drivers
// that sit between a chat backend and the label cache.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "valuerank/assets.hpp"
#include "valuerank/error.hpp"
#include "valuerank/ingest.hpp"
#include "valuerank/label_cache.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

struct PromptTemplate {
  std::string version;
  std::string text;  // contains ${conceptDefinitionsStr} and ${tweet}
};

inline const PromptTemplate& default_prompt_template() {
  static const PromptTemplate tmpl{"value-labeling-v1", std::string(assets::kPromptValueLabelingV1)};
  return tmpl;
}

struct PromptBundle {
  std::string text;
  std::vector<std::string> image_refs;
  std::string prompt_version;
  std::string model_id;
  double temperature = 1.0;
};

/// Post text with quote and link-card markers. Image URLs are not part of the
/// text; they travel in PromptBundle::image_refs.
inline std::string assemble_content(const Post& post) {
  std::string out = post.body;
  if (post.quoted) {
    out += "\nQUOTED: ";
    if (!post.quoted->author.empty()) out += "@" + post.quoted->author + " ";
    out += post.quoted->body;
  }
  if (post.link) {
    out += "\nLINK TITLE: " + post.link->title;
    out += "\nLINK DESCRIPTION: " + post.link->description;
  }
  return out;
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

inline std::vector<std::string> image_urls(const Post& post) {
  std::vector<std::string> out;
  for (const auto& a : post.attachments) out.push_back(a.url);
  if (post.quoted)
    for (const auto& a : post.quoted->attachments) out.push_back(a.url);
  return out;
}

}  // namespace detail

inline std::string concept_definitions(std::span<const ValueDescriptor> values) {
  std::string out;
  for (const auto& d : values) {
    if (!out.empty()) out += '\n';
    out += d.title;
    out += " : ";
    out += d.definition;
  }
  return out;
}

inline PromptBundle build_prompt(const Post& post, std::span<const ValueDescriptor> values,
                                 const PromptTemplate& tmpl = default_prompt_template()) {
  if (values.size() != kValueCount) {
    throw Error(Errc::InvalidTaxonomy, "prompt needs all 19 value descriptors", std::to_string(values.size()));
  }
  PromptBundle bundle;
  bundle.text = tmpl.text;
  // Substitute the tweet last so post text is never scanned for placeholders.
  detail::replace_all(bundle.text, "${conceptDefinitionsStr}", concept_definitions(values));
  const auto tweet_at = bundle.text.rfind("${tweet}");
  if (tweet_at == std::string::npos) throw Error(Errc::InvalidArgument, "prompt template lacks ${tweet}", tmpl.version);
  bundle.text.replace(tweet_at, std::string_view("${tweet}").size(), assemble_content(post));
  bundle.image_refs = detail::image_urls(post);
  bundle.prompt_version = tmpl.version;
  return bundle;
}

inline PromptBundle build_prompt(const Post& post, const PromptTemplate& tmpl = default_prompt_template()) {
  return build_prompt(post, std::span<const ValueDescriptor>(taxonomy()), tmpl);
}

// ---------------------------------------------------------------------------
// Rating wire format: {"Rating": {"<title>": <0..6>, ...}}

namespace detail {

/// Top-level balanced {...} spans, ignoring braces inside JSON strings.
inline std::vector<std::string_view> object_spans(std::string_view raw) {
  std::vector<std::string_view> out;
  int depth = 0;
  bool in_string = false, escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"' && depth > 0) in_string = true;
    else if (c == '{') {
      if (depth++ == 0) start = i;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) out.push_back(raw.substr(start, i - start + 1));
    }
  }
  return out;
}

inline bool is_flat_rating_map(const json& j) {
  if (!j.is_object() || j.empty()) return false;
  for (const auto& [key, val] : j.items())
    if (!find_value(key)) return false;
  return true;
}

}  // namespace detail

/// Extracts the single rating object from a model reply. Accepts the wrapped
/// `{"Rating": {...}}` form and a bare title map; keys may be user-facing
/// titles or Schwartz names.
inline ValueScores parse_rating(std::string_view raw) {
  std::vector<json> found;
  for (auto span : detail::object_spans(raw)) {
    json j = json::parse(span, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (j.contains("Rating") && j["Rating"].is_object()) found.push_back(j["Rating"]);
    else if (detail::is_flat_rating_map(j)) found.push_back(std::move(j));
  }
  if (found.empty()) throw Error(Errc::ParseError, "no rating object in reply");
  if (found.size() > 1) throw Error(Errc::ParseError, "more than one rating object in reply");

  std::array<std::optional<double>, kValueCount> ratings{};
  for (const auto& [key, val] : found.front().items()) {
    const auto id = find_value(key);
    if (!id) throw Error(Errc::ParseError, "unknown concept in rating", key);
    auto& slot = ratings[index_of(*id)];
    if (slot) throw Error(Errc::ParseError, "concept rated twice", key);
    if (!val.is_number() || val.get<double>() != std::floor(val.get<double>()) || val.get<double>() < 0 ||
        val.get<double>() > 6) {
      throw Error(Errc::OutOfRange, "rating must be an integer in 0..6",
                  std::string(descriptor(*id).title) + "=" + val.dump());
    }
    slot = val.get<double>();
  }
  std::array<double, kValueCount> out{};
  for (std::size_t i = 0; i < kValueCount; ++i) {
    if (!ratings[i]) throw Error(Errc::MissingValue, "rating object is missing a concept", std::string(taxonomy()[i].title));
    out[i] = *ratings[i];
  }
  return ValueScores(out);
}

/// Canonical-order rating object. Integer ratings print without a fraction.
inline std::string serialize_rating(const ValueScores& scores) {
  nlohmann::ordered_json inner = nlohmann::ordered_json::object();
  for (const auto& d : taxonomy()) {
    const double r = scores[d.id];
    if (r == std::floor(r)) inner[std::string(d.title)] = static_cast<int>(r);
    else inner[std::string(d.title)] = r;
  }
  nlohmann::ordered_json outer;
  outer["Rating"] = std::move(inner);
  return outer.dump();
}

// ---------------------------------------------------------------------------
// Backends

/// Chat-completion backend. Implementations must be safe to call from several
/// threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string model_id() const = 0;
  virtual bool supports_images() const = 0;
  /// Returns the raw reply text; transport failures throw BackendError.
  virtual std::string complete(const PromptBundle& prompt) = 0;
};

struct ClassifyOptions {
  PromptTemplate prompt = default_prompt_template();
  int max_attempts = 3;
};

/// Cache-first labeling of a single post.
inline ValueScores classify_post(const Post& post, ChatBackend& backend, LabelStore& cache,
                                 const ClassifyOptions& opts = {}) {
  const LabelKey key{post.id, opts.prompt.version, backend.model_id()};
  if (auto hit = cache.get(key)) return hit->scores;

  auto bundle = build_prompt(post, opts.prompt);
  bundle.model_id = backend.model_id();
  if (!bundle.image_refs.empty() && !backend.supports_images()) {
    spdlog::info("backend {} has no image input; dropping {} image(s) for post {}", bundle.model_id,
                 bundle.image_refs.size(), post.id);
    bundle.image_refs.clear();
  }

  std::string last_error;
  for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
    try {
      auto scores = parse_rating(backend.complete(bundle));
      cache.put(LabelCacheEntry{post.id, opts.prompt.version, bundle.model_id, scores, Clock::now()});
      return scores;
    } catch (const Error& e) {
      if (!is_retryable(e.code())) throw;
      last_error = fmt::format("{}: {} {}", to_string(e.code()), e.what(), e.detail());
      spdlog::debug("post {} attempt {}/{} failed: {}", post.id, attempt, opts.max_attempts, last_error);
    }
  }
  throw Error(Errc::ClassificationFailed,
              fmt::format("post {} failed after {} attempts: {}", post.id, opts.max_attempts, last_error), post.id);
}

/// Element-wise mean over every post of a conversation.
inline ValueScores classify_conversation(std::span<const Post> posts, ChatBackend& backend, LabelStore& cache,
                                         const ClassifyOptions& opts = {}) {
  if (posts.empty()) throw Error(Errc::InvalidArgument, "conversation is empty");
  std::array<double, kValueCount> sum{};
  for (const auto& p : posts) {
    ValueScores s;
    try {
      s = classify_post(p, backend, cache, opts);
    } catch (const Error& e) {
      if (e.code() != Errc::ClassificationFailed) throw;
      throw Error(Errc::ClassificationFailed, fmt::format("conversation member failed: {}", e.what()), posts.front().id);
    }
    for (std::size_t i = 0; i < kValueCount; ++i) sum[i] += s.at(i);
  }
  for (auto& v : sum) v /= static_cast<double>(posts.size());
  return ValueScores(sum);
}

/// The posts whose labels are averaged for `post`: the post itself followed by
/// its conversation. A post without conversation is its own single member.
inline std::vector<Post> conversation_members(const Post& post) {
  std::vector<Post> members;
  Post root = post;
  root.conversation.clear();
  members.push_back(std::move(root));
  members.insert(members.end(), post.conversation.begin(), post.conversation.end());
  return members;
}

struct ClassificationFailure {
  std::string post_id;
  std::string message;
};

struct InventoryLabels {
  std::map<std::string, ValueScores> labels;
  std::vector<ClassificationFailure> failures;  // inventory order
};

/// Labels every post with at most `parallelism` backend calls in flight. The
/// result does not depend on scheduling.
inline InventoryLabels classify_inventory(const Inventory& inv, ChatBackend& backend, LabelStore& cache,
                                          std::size_t parallelism, const ClassifyOptions& opts = {}) {
  if (parallelism < 1) throw Error(Errc::InvalidArgument, "parallelism must be at least 1");
  const std::size_t n = inv.posts.size();
  std::vector<std::optional<ValueScores>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const Post& post = inv.posts[i];
      try {
        if (post.conversation.empty()) {
          results[i] = classify_post(post, backend, cache, opts);
        } else {
          const auto members = conversation_members(post);
          results[i] = classify_conversation(members, backend, cache, opts);
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t workers = std::min(parallelism, std::max<std::size_t>(n, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  InventoryLabels out;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) out.labels.emplace(inv.posts[i].id, *results[i]);
    else out.failures.push_back({inv.posts[i].id, errors[i]});
  }
  return out;
}

/// Fills persistently failed posts with all-zero scores. Returns the ids that
/// were filled so the ranker can flag them.
inline std::vector<std::string> fill_unlabeled(InventoryLabels& labels) {
  std::vector<std::string> flagged;
  for (const auto& f : labels.failures) {
    labels.labels.try_emplace(f.post_id, ValueScores{});
    flagged.push_back(f.post_id);
  }
  return flagged;
}

}  // namespace valuerank
