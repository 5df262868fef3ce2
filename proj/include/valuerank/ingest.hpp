#pragma once

// Post inventories: ingestion from JSONL records, batch segmentation and
// per-trial window sampling.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <spdlog/spdlog.h>

#include "valuerank/error.hpp"
#include "valuerank/random.hpp"
#include "valuerank/util.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

/// Tunables that the studies describe only approximately.
struct WindowConfig {
  std::size_t batch_size = 30;
  std::size_t single_value_batches = 9;  // ~270 posts per trial
  std::size_t slider_batches = 7;        // ~210 posts per trial
};

enum class InventorySource : std::uint8_t { File, Api };

struct Inventory {
  std::string id;
  std::vector<Post> posts;  // engagement order
  InventorySource source = InventorySource::File;
  Timestamp fetched_at{};

  /// Equality that ignores `fetched_at`.
  friend bool same_content(const Inventory& a, const Inventory& b) {
    return a.id == b.id && a.posts == b.posts && a.source == b.source;
  }
};

struct Batch {
  std::size_t index = 0;
  std::vector<Post> posts;
};

namespace detail {

inline std::string inventory_id_for(std::span<const Post> posts) {
  std::uint64_t h = fnv1a("inventory");
  for (const auto& p : posts) {
    h = fnv1a(p.id, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return fmt::format("inv-{:016x}", h);
}

}  // namespace detail

/// Drops promoted posts and follow/subscribe recommendations, assigns
/// contiguous engagement ranks in arrival order and checks id uniqueness.
inline Inventory ingest(std::vector<Post> records, InventorySource source = InventorySource::File,
                        Timestamp fetched_at = Clock::now()) {
  Inventory inv;
  inv.source = source;
  inv.fetched_at = fetched_at;
  std::unordered_set<std::string> seen;
  for (auto& p : records) {
    if (p.promoted || p.recommendation) continue;
    if (!seen.insert(p.id).second) throw Error(Errc::DuplicateId, "duplicate post id", p.id);
    p.engagement_rank = inv.posts.size();
    inv.posts.push_back(std::move(p));
  }
  if (inv.posts.empty()) throw Error(Errc::EmptyInventory, "no rankable posts in input");
  inv.id = detail::inventory_id_for(inv.posts);
  return inv;
}

/// Parses one post per line. Blank lines are skipped; the first malformed
/// line aborts with its 1-based line number in the error detail.
inline std::vector<Post> read_post_records(std::istream& in) {
  std::vector<Post> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<Post>());
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, fmt::format("line {}: {}", line_no, e.what()),
                  fmt::format("line {}", line_no));
    } catch (const Error& e) {
      throw Error(Errc::MalformedRecord, fmt::format("line {}: {}", line_no, e.what()),
                  fmt::format("line {}", line_no));
    }
  }
  return out;
}

inline Inventory ingest_jsonl(std::istream& in, InventorySource source = InventorySource::File,
                              Timestamp fetched_at = Clock::now()) {
  return ingest(read_post_records(in), source, fetched_at);
}

inline std::vector<Batch> segment_batches(const Inventory& inv, std::size_t batch_size) {
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch size must be at least 1");
  std::vector<Batch> out;
  for (std::size_t start = 0, idx = 0; start < inv.posts.size(); start += batch_size, ++idx) {
    const auto end = std::min(start + batch_size, inv.posts.size());
    out.push_back(Batch{idx, {inv.posts.begin() + static_cast<std::ptrdiff_t>(start),
                              inv.posts.begin() + static_cast<std::ptrdiff_t>(end)}});
  }
  return out;
}

/// Number of disjoint windows of `n_batches` consecutive batches; the last
/// window may be short.
inline std::size_t window_count(const Inventory& inv, std::size_t n_batches, std::size_t batch_size = 30) {
  if (n_batches < 1) throw Error(Errc::InvalidArgument, "window must span at least one batch");
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch size must be at least 1");
  const std::size_t batches = (inv.posts.size() + batch_size - 1) / batch_size;
  return (batches + n_batches - 1) / n_batches;
}

namespace detail {

inline std::vector<std::size_t> window_order(std::size_t windows, std::uint64_t seed) {
  std::vector<std::size_t> order(windows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

inline Inventory window_at(const Inventory& inv, std::size_t slot, std::size_t n_batches, std::size_t batch_size) {
  const std::size_t span = n_batches * batch_size;
  const std::size_t start = slot * span;
  const std::size_t end = std::min(start + span, inv.posts.size());
  Inventory w;
  w.id = fmt::format("{}/w{}x{}", inv.id, slot, n_batches);
  w.source = inv.source;
  w.fetched_at = inv.fetched_at;
  w.posts.assign(inv.posts.begin() + static_cast<std::ptrdiff_t>(start),
                 inv.posts.begin() + static_cast<std::ptrdiff_t>(end));
  return w;
}

}  // namespace detail

/// Window of up to `n_batches` consecutive batches for one trial. The inventory
/// is cut into fixed window slots and a seed-determined permutation assigns
/// slots to trials, so distinct trials never share posts. Posts keep their
/// engagement ranks from the parent inventory.
inline Inventory sample_window(const Inventory& inv, std::size_t n_batches, std::size_t trial, std::uint64_t rng_seed,
                               std::size_t batch_size = 30) {
  const auto windows = window_count(inv, n_batches, batch_size);
  if (trial >= windows) {
    throw Error(Errc::WindowExhausted, fmt::format("inventory has {} windows, trial {} requested", windows, trial),
                std::to_string(windows));
  }
  return detail::window_at(inv, detail::window_order(windows, rng_seed)[trial], n_batches, batch_size);
}

/// Like sample_window, but cycles through earlier windows once all are used.
inline Inventory sample_window_or_reuse(const Inventory& inv, std::size_t n_batches, std::size_t trial,
                                        std::uint64_t rng_seed, std::size_t batch_size = 30) {
  const auto windows = window_count(inv, n_batches, batch_size);
  if (trial >= windows) {
    spdlog::warn("inventory {} exhausted after {} windows; reusing a window for trial {}", inv.id, windows, trial);
  }
  return detail::window_at(inv, detail::window_order(windows, rng_seed)[trial % windows], n_batches, batch_size);
}

inline void to_json(json& j, const Inventory& inv) {
  j = json{{"id", inv.id},
           {"source", inv.source == InventorySource::File ? "file" : "api"},
           {"fetched_at", format_timestamp(inv.fetched_at)},
           {"count", inv.posts.size()}};
}

}  // namespace valuerank
