#pragma once

// Label cache keyed by (post id, prompt version, model id). The storage
// interface is shared by the CLI, the classifier and the HTTP service, so
// implementations must tolerate concurrent callers.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "valuerank/error.hpp"
#include "valuerank/util.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

struct LabelKey {
  std::string post_id;
  std::string prompt_version;
  std::string model_id;

  friend auto operator<=>(const LabelKey&, const LabelKey&) = default;
};

struct LabelCacheEntry {
  std::string post_id;
  std::string prompt_version;
  std::string model_id;
  ValueScores scores;
  Timestamp created_at{};

  LabelKey key() const { return {post_id, prompt_version, model_id}; }
};

inline void to_json(json& j, const LabelCacheEntry& e) {
  j = json{{"post_id", e.post_id},
           {"prompt_version", e.prompt_version},
           {"model_id", e.model_id},
           {"ratings", e.scores},
           {"created_at", format_timestamp(e.created_at)}};
}

inline void from_json(const json& j, LabelCacheEntry& e) {
  e.post_id = j.at("post_id").get<std::string>();
  e.prompt_version = j.value("prompt_version", std::string{});
  e.model_id = j.value("model_id", std::string{});
  e.scores = j.at("ratings").get<ValueScores>();
  e.created_at = j.contains("created_at") ? parse_timestamp(j["created_at"].get<std::string>()) : Timestamp{};
}

class LabelStore {
 public:
  virtual ~LabelStore() = default;

  /// Absent on a miss; never throws for unknown keys.
  virtual std::optional<LabelCacheEntry> get(const LabelKey& key) const = 0;
  virtual void put(const LabelCacheEntry& entry) = 0;
  virtual std::size_t size() const = 0;
};

class MemoryLabelStore : public LabelStore {
 public:
  std::optional<LabelCacheEntry> get(const LabelKey& key) const override {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const LabelCacheEntry& entry) override {
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(entry.key(), entry);
  }

  std::size_t size() const override {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

 protected:
  void put_unlocked(const LabelCacheEntry& entry) { entries_.insert_or_assign(entry.key(), entry); }

  mutable std::shared_mutex mutex_;
  std::map<LabelKey, LabelCacheEntry> entries_;
};

/// Append-only JSONL file with an in-memory index. On open, later lines for a
/// key override earlier ones.
class JsonlLabelStore : public MemoryLabelStore {
 public:
  explicit JsonlLabelStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_);
      if (!in) throw Error(Errc::Io, "cannot read label cache", path_.string());
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          put_unlocked(json::parse(line).get<LabelCacheEntry>());
        } catch (const std::exception& e) {
          throw Error(Errc::MalformedRecord, fmt::format("{}:{}: {}", path_.string(), line_no, e.what()),
                      fmt::format("line {}", line_no));
        }
      }
    } else if (path_.has_parent_path()) {
      std::filesystem::create_directories(path_.parent_path());
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(Errc::Io, "cannot open label cache for append", path_.string());
  }

  void put(const LabelCacheEntry& entry) override {
    std::unique_lock lock(mutex_);
    out_ << json(entry).dump() << '\n';
    out_.flush();
    if (!out_) throw Error(Errc::Io, "label cache write failed", path_.string());
    put_unlocked(entry);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace valuerank
