#pragma once

// File formats shared by the CLI and the service. Every file error carries
// the path, and record errors carry path:line.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "valuerank/error.hpp"
#include "valuerank/ranker.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedRecord, fmt::format("{}: {}", path.string(), e.what()), path.string());
  }
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write file", path.string());
}

/// One label per post, in inventory order.
struct LabelRecord {
  std::string post_id;
  ValueScores ratings;
  bool flagged_unlabeled = false;
};

inline void to_json(json& j, const LabelRecord& r) {
  j = json{{"post_id", r.post_id}, {"ratings", r.ratings}};
  if (r.flagged_unlabeled) j["flagged_unlabeled"] = true;
}

inline void from_json(const json& j, LabelRecord& r) {
  r.post_id = j.at("post_id").get<std::string>();
  r.ratings = j.at("ratings").get<ValueScores>();
  r.flagged_unlabeled = j.value("flagged_unlabeled", false);
}

template <typename T>
std::vector<T> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open file", path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedRecord, fmt::format("{}:{}: {}", path.string(), line_no, e.what()),
                  fmt::format("{}:{}", path.string(), line_no));
    }
  }
  return out;
}

inline std::vector<LabelRecord> read_label_records(const std::filesystem::path& path) {
  return read_jsonl_file<LabelRecord>(path);
}

inline LabelMap to_label_map(const std::vector<LabelRecord>& records) {
  LabelMap out;
  for (const auto& r : records) out.insert_or_assign(r.post_id, r.ratings);
  return out;
}

/// A feed file is a RankedFeed JSON document, a JSON array of post ids, or a
/// labels JSONL file (its line order is the feed order).
struct FeedFile {
  std::vector<std::string> ids;
  std::vector<ValueScores> scores;  // empty for bare id lists
};

inline FeedFile read_feed_file(const std::filesystem::path& path) {
  const auto text = read_file(path);
  const json doc = json::parse(text, nullptr, false);
  FeedFile out;
  if (!doc.is_discarded() && doc.is_object() && doc.contains("entries")) {
    const auto feed = doc.get<RankedFeed>();
    out.ids = feed.post_ids();
    out.scores = feed.value_scores();
    return out;
  }
  if (!doc.is_discarded() && doc.is_array()) {
    out.ids = doc.get<std::vector<std::string>>();
    return out;
  }
  for (const auto& r : read_label_records(path)) {
    out.ids.push_back(r.post_id);
    out.scores.push_back(r.ratings);
  }
  return out;
}

}  // namespace valuerank
