#pragma once

// Value-aligned ranking: score = w . v, sorted descending, ties kept in
// engagement order.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "valuerank/error.hpp"
#include "valuerank/ingest.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

using LabelMap = std::map<std::string, ValueScores>;

/// Plain dot product over the canonical indices, summed in index order.
inline double score_post(const WeightVector& weights, const ValueScores& scores) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < kValueCount; ++i) s += weights.weights()[i] * scores.ratings()[i];
  return s;
}

struct RankedEntry {
  std::string post_id;
  double score = 0.0;
  std::size_t engagement_rank = 0;
  ValueScores value_scores;
  bool flagged_unlabeled = false;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedFeed {
  std::vector<RankedEntry> entries;
  WeightVector weights_used;
  std::string inventory_id;
  std::optional<std::size_t> k;

  std::vector<std::string> post_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.post_id);
    return ids;
  }

  std::vector<ValueScores> value_scores() const {
    std::vector<ValueScores> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.value_scores);
    return out;
  }

  friend bool operator==(const RankedFeed&, const RankedFeed&) = default;
};

struct RankOptions {
  /// Posts whose labels are all-zero placeholders for failed classification.
  std::set<std::string> flagged;
  /// Optional extra per-post term added to w . v. Off unless set.
  std::function<double(const Post&)> extra_term;
};

inline RankedFeed rank(const Inventory& inv, const LabelMap& labels, const WeightVector& weights,
                       const RankOptions& opts = {}) {
  RankedFeed feed;
  feed.weights_used = weights;
  feed.inventory_id = inv.id;
  feed.entries.reserve(inv.posts.size());
  for (const auto& post : inv.posts) {
    auto it = labels.find(post.id);
    if (it == labels.end()) throw Error(Errc::MissingLabel, "post has no label", post.id);
    double score = score_post(weights, it->second);
    if (opts.extra_term) score += opts.extra_term(post);
    feed.entries.push_back(
        RankedEntry{post.id, score, post.engagement_rank, it->second, opts.flagged.count(post.id) > 0});
  }
  // Engagement ranks are unique, so this comparator is a strict total order
  // and the result does not depend on the sort algorithm.
  std::sort(feed.entries.begin(), feed.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.engagement_rank < b.engagement_rank;
  });
  return feed;
}

/// Identity ranking of an inventory: the platform's own order, scored with
/// `weights` for display only.
inline RankedFeed engagement_feed(const Inventory& inv, const LabelMap& labels, const WeightVector& weights = {},
                                  const RankOptions& opts = {}) {
  RankedFeed feed;
  feed.weights_used = weights;
  feed.inventory_id = inv.id;
  for (const auto& post : inv.posts) {
    auto it = labels.find(post.id);
    if (it == labels.end()) throw Error(Errc::MissingLabel, "post has no label", post.id);
    feed.entries.push_back(RankedEntry{post.id, score_post(weights, it->second), post.engagement_rank, it->second,
                                       opts.flagged.count(post.id) > 0});
  }
  return feed;
}

inline RankedFeed top_k(RankedFeed feed, std::size_t k) {
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (feed.entries.size() > k) feed.entries.resize(k);
  feed.k = k;
  return feed;
}

inline void to_json(json& j, const RankedEntry& e) {
  j = json{{"post_id", e.post_id},
           {"score", e.score},
           {"engagement_rank", e.engagement_rank},
           {"value_scores", e.value_scores},
           {"flagged_unlabeled", e.flagged_unlabeled}};
}

inline void from_json(const json& j, RankedEntry& e) {
  e.post_id = j.at("post_id").get<std::string>();
  e.score = j.at("score").get<double>();
  e.engagement_rank = j.at("engagement_rank").get<std::size_t>();
  e.value_scores = j.at("value_scores").get<ValueScores>();
  e.flagged_unlabeled = j.value("flagged_unlabeled", false);
}

inline void to_json(json& j, const RankedFeed& f) {
  json flagged = json::array();
  for (const auto& e : f.entries)
    if (e.flagged_unlabeled) flagged.push_back(e.post_id);
  j = json{{"inventory_id", f.inventory_id},
           {"weights_used", f.weights_used},
           {"k", f.k ? json(*f.k) : json(nullptr)},
           {"entries", f.entries},
           {"provenance",
            {{"tie_break", "engagement_rank ascending"},
             {"flagged_unlabeled", flagged},
             {"note", "flagged posts carry all-zero scores after failed classification"}}}};
}

inline void from_json(const json& j, RankedFeed& f) {
  f.inventory_id = j.value("inventory_id", std::string{});
  f.weights_used = j.contains("weights_used") ? j["weights_used"].get<WeightVector>() : WeightVector{};
  f.k = j.contains("k") && !j["k"].is_null() ? std::optional<std::size_t>(j["k"].get<std::size_t>()) : std::nullopt;
  f.entries = j.at("entries").get<std::vector<RankedEntry>>();
}

}  // namespace valuerank
