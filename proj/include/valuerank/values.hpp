#pragma once

// Schwartz's refined theory of 19 basic human values, plus the score and
// weight vectors indexed by them. Every vector in the library uses the
// canonical order below.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "valuerank/error.hpp"

namespace valuerank {

using json = nlohmann::json;

inline constexpr std::size_t kValueCount = 19;

enum class ValueId : std::uint8_t {
  SelfDirectedThoughts,
  SelfDirectedActions,
  Stimulation,
  Hedonism,
  Achievement,
  Dominance,
  Resources,
  Face,
  PersonalSecurity,
  SocietalSecurity,
  Tradition,
  RuleConformity,
  InterpersonalConformity,
  Humility,
  Caring,
  Dependability,
  UniversalConcern,
  PreservationOfNature,
  Tolerance,
};

constexpr std::size_t index_of(ValueId v) noexcept { return static_cast<std::size_t>(v); }

inline ValueId value_at(std::size_t ordinal) {
  if (ordinal >= kValueCount) {
    throw Error(Errc::InvalidArgument, "value ordinal out of range", std::to_string(ordinal));
  }
  return static_cast<ValueId>(ordinal);
}

inline constexpr std::array<ValueId, kValueCount> all_values() noexcept {
  std::array<ValueId, kValueCount> out{};
  for (std::size_t i = 0; i < kValueCount; ++i) out[i] = static_cast<ValueId>(i);
  return out;
}

enum class Quadrant : std::uint8_t { SelfTranscendence, OpennessToChange, SelfEnhancement, Conservation };
enum class Focus : std::uint8_t { Personal, Social };

constexpr std::string_view to_string(Quadrant q) noexcept {
  switch (q) {
    case Quadrant::SelfTranscendence: return "SelfTranscendence";
    case Quadrant::OpennessToChange: return "OpennessToChange";
    case Quadrant::SelfEnhancement: return "SelfEnhancement";
    case Quadrant::Conservation: return "Conservation";
  }
  return "";
}

constexpr std::string_view to_string(Focus f) noexcept {
  return f == Focus::Personal ? "Personal" : "Social";
}

inline constexpr std::array<Quadrant, 4> kQuadrants{Quadrant::SelfTranscendence, Quadrant::OpennessToChange,
                                                     Quadrant::SelfEnhancement, Quadrant::Conservation};

struct ValueDescriptor {
  ValueId id;
  std::string_view schwartz_name;
  std::string_view title;  // user-facing
  std::string_view definition;
  std::array<Quadrant, 2> quadrant_slots;
  std::uint8_t quadrant_count;
  Focus focus;
  std::string_view source_note;  // set where the grouping is ambiguous

  std::vector<Quadrant> quadrants() const {
    return {quadrant_slots.begin(), quadrant_slots.begin() + quadrant_count};
  }
  bool in_quadrant(Quadrant q) const noexcept {
    return std::find(quadrant_slots.begin(), quadrant_slots.begin() + quadrant_count, q) !=
           quadrant_slots.begin() + quadrant_count;
  }
};

inline constexpr std::string_view kTaxonomyVersion = "schwartz-refined-19/1";

namespace detail {

using Q = Quadrant;
using F = Focus;

// Focus split follows the personal/social dotted line of the refined circle.
// Face and Humility sit on the boundary; they are assigned to the side their
// non-Conservation quadrant lies on and carry a note.
inline constexpr std::array<ValueDescriptor, kValueCount> kTaxonomy{{
    {ValueId::SelfDirectedThoughts, "Self-directed thoughts", "Independent thoughts",
     "The freedom to cultivate one's own ideas and abilities", {Q::OpennessToChange, Q::OpennessToChange}, 1,
     F::Personal, ""},
    {ValueId::SelfDirectedActions, "Self-directed actions", "Independent actions",
     "The freedom to determine one's own actions", {Q::OpennessToChange, Q::OpennessToChange}, 1, F::Personal, ""},
    {ValueId::Stimulation, "Stimulation", "Novelty", "Excitement, stimulation, and change",
     {Q::OpennessToChange, Q::OpennessToChange}, 1, F::Personal, ""},
    {ValueId::Hedonism, "Hedonism", "Pleasure", "Hedonism", {Q::SelfEnhancement, Q::OpennessToChange}, 2,
     F::Personal, ""},
    {ValueId::Achievement, "Achievement", "Achievement", "Success according to social standards",
     {Q::SelfEnhancement, Q::SelfEnhancement}, 1, F::Personal, ""},
    {ValueId::Dominance, "Dominance", "Power", "Influence and the right to command",
     {Q::SelfEnhancement, Q::SelfEnhancement}, 1, F::Personal, ""},
    {ValueId::Resources, "Resources", "Wealth", "Control of material and social resources",
     {Q::SelfEnhancement, Q::SelfEnhancement}, 1, F::Personal, ""},
    {ValueId::Face, "Face", "Reputation",
     "Security and power through maintaining one's public image and avoiding humiliation",
     {Q::SelfEnhancement, Q::Conservation}, 2, F::Personal,
     "dual-quadrant value on the focus boundary; placed with Self-Enhancement on the personal side"},
    {ValueId::PersonalSecurity, "Personal security", "Personal security", "Safety in one's immediate environment",
     {Q::Conservation, Q::Conservation}, 1, F::Personal, ""},
    {ValueId::SocietalSecurity, "Societal security", "Societal security",
     "Safety and stability in the wider society", {Q::Conservation, Q::Conservation}, 1, F::Social, ""},
    {ValueId::Tradition, "Tradition", "Tradition",
     "Maintaining and preserving cultural, family, or religious traditions", {Q::Conservation, Q::Conservation}, 1,
     F::Social, ""},
    {ValueId::RuleConformity, "Rule conformity", "Lawfulness",
     "Compliance with rules, laws, and formal obligations", {Q::Conservation, Q::Conservation}, 1, F::Social, ""},
    {ValueId::InterpersonalConformity, "Interpersonal conformity", "Respect",
     "Avoiding upsetting or harming other people", {Q::Conservation, Q::Conservation}, 1, F::Social, ""},
    {ValueId::Humility, "Humility", "Humility", "Being humble", {Q::SelfTranscendence, Q::Conservation}, 2,
     F::Social, "dual-quadrant value on the focus boundary; both of its quadrants are social-focus here"},
    {ValueId::Caring, "Caring", "Caring", "Devotion to those they care about",
     {Q::SelfTranscendence, Q::SelfTranscendence}, 1, F::Social, ""},
    {ValueId::Dependability, "Dependability", "Responsibility", "Being responsible and having loyalty to others",
     {Q::SelfTranscendence, Q::SelfTranscendence}, 1, F::Social, ""},
    {ValueId::UniversalConcern, "Universal concern", "Equality",
     "Commitment to equality, justice, and protection for all people",
     {Q::SelfTranscendence, Q::SelfTranscendence}, 1, F::Social, ""},
    {ValueId::PreservationOfNature, "Preservation of nature", "Connection to nature",
     "Preservation of the natural environment", {Q::SelfTranscendence, Q::SelfTranscendence}, 1, F::Social, ""},
    {ValueId::Tolerance, "Tolerance", "Tolerance", "Acceptance and understanding of those different from oneself",
     {Q::SelfTranscendence, Q::SelfTranscendence}, 1, F::Social, ""},
}};

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace detail

/// The 19 descriptors in canonical order. Static data; every call returns the
/// same storage.
inline const std::array<ValueDescriptor, kValueCount>& taxonomy() noexcept { return detail::kTaxonomy; }

inline const ValueDescriptor& descriptor(ValueId v) noexcept { return detail::kTaxonomy[index_of(v)]; }

struct FocusPartition {
  std::vector<ValueId> personal;
  std::vector<ValueId> social;
};

inline FocusPartition focus_partition() {
  FocusPartition out;
  for (const auto& d : taxonomy()) (d.focus == Focus::Personal ? out.personal : out.social).push_back(d.id);
  return out;
}

/// Resolves a user-facing title or a Schwartz name. Exact matches win over
/// case-insensitive ones.
inline std::optional<ValueId> find_value(std::string_view name) {
  for (const auto& d : taxonomy())
    if (d.title == name || d.schwartz_name == name) return d.id;
  for (const auto& d : taxonomy())
    if (detail::iequals(d.title, name) || detail::iequals(d.schwartz_name, name)) return d.id;
  return std::nullopt;
}

inline ValueId value_from_json(const json& j) {
  if (j.is_number_integer()) return value_at(j.get<std::size_t>());
  if (j.is_string()) {
    if (auto v = find_value(j.get<std::string>())) return *v;
    throw Error(Errc::InvalidArgument, "unknown value name", j.get<std::string>());
  }
  throw Error(Errc::InvalidArgument, "value must be an ordinal or a name", j.dump());
}

/// Versioned taxonomy document served to UI tooltips.
inline json taxonomy_json() {
  json values = json::array();
  for (const auto& d : taxonomy()) {
    json quads = json::array();
    for (auto q : d.quadrants()) quads.push_back(to_string(q));
    json entry{{"id", index_of(d.id)},
               {"schwartz_name", d.schwartz_name},
               {"title", d.title},
               {"definition", d.definition},
               {"quadrants", quads},
               {"focus", to_string(d.focus)}};
    if (!d.source_note.empty()) entry["note"] = d.source_note;
    values.push_back(std::move(entry));
  }
  return json{{"version", kTaxonomyVersion}, {"values", values}};
}

/// Per-post ratings, one per value, each within [0, 6].
class ValueScores {
 public:
  static constexpr double kMin = 0.0;
  static constexpr double kMax = 6.0;

  ValueScores() = default;

  explicit ValueScores(const std::array<double, kValueCount>& ratings) : ratings_(ratings) {
    for (std::size_t i = 0; i < kValueCount; ++i) check(i, ratings_[i]);
  }

  double operator[](ValueId v) const noexcept { return ratings_[index_of(v)]; }
  double at(std::size_t i) const { return ratings_.at(i); }

  void set(ValueId v, double rating) {
    check(index_of(v), rating);
    ratings_[index_of(v)] = rating;
  }

  const std::array<double, kValueCount>& ratings() const noexcept { return ratings_; }

  bool all_integral() const noexcept {
    return std::all_of(ratings_.begin(), ratings_.end(), [](double r) { return r == std::floor(r); });
  }

  friend bool operator==(const ValueScores&, const ValueScores&) = default;

 private:
  static void check(std::size_t i, double r) {
    if (!std::isfinite(r) || r < kMin || r > kMax) {
      throw Error(Errc::OutOfRange, "value score outside [0, 6]",
                  std::string(taxonomy()[i].title) + "=" + std::to_string(r));
    }
  }

  std::array<double, kValueCount> ratings_{};
};

enum class WeightMode : std::uint8_t { Free, SliderQuantized };

/// Uprank (positive) and downrank (negative) intensities in [-1, 1].
class WeightVector {
 public:
  static constexpr double kSliderStep = 0.25;

  WeightVector() = default;

  explicit WeightVector(const std::array<double, kValueCount>& weights, WeightMode mode = WeightMode::Free)
      : weights_(weights), mode_(mode) {
    for (std::size_t i = 0; i < kValueCount; ++i) check(i, weights_[i]);
  }

  static WeightVector one_hot(ValueId v, double weight = 1.0) {
    std::array<double, kValueCount> w{};
    w[index_of(v)] = weight;
    return WeightVector(w);
  }

  static bool is_quantized(double x) noexcept {
    const double scaled = x * 4.0;
    return std::isfinite(scaled) && scaled == std::round(scaled);
  }

  double operator[](ValueId v) const noexcept { return weights_[index_of(v)]; }
  const std::array<double, kValueCount>& weights() const noexcept { return weights_; }
  WeightMode mode() const noexcept { return mode_; }

  void set(ValueId v, double w) {
    check(index_of(v), w);
    weights_[index_of(v)] = w;
  }

  bool is_zero() const noexcept {
    return std::all_of(weights_.begin(), weights_.end(), [](double w) { return w == 0.0; });
  }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  void check(std::size_t i, double w) const {
    const std::string who = std::string(taxonomy()[i].title) + "=" + std::to_string(w);
    if (!std::isfinite(w) || w < -1.0 || w > 1.0) throw Error(Errc::OutOfRange, "weight outside [-1, 1]", who);
    if (mode_ == WeightMode::SliderQuantized && !is_quantized(w)) {
      throw Error(Errc::QuantizationError, "slider weight is not a multiple of 0.25", who);
    }
  }

  std::array<double, kValueCount> weights_{};
  WeightMode mode_ = WeightMode::Free;
};

// JSON: both vectors serialize as an object keyed by user-facing title, in
// canonical order. Parsing also accepts Schwartz names and plain arrays.

inline void to_json(json& j, const ValueScores& s) {
  j = json::object();
  for (const auto& d : taxonomy()) j[std::string(d.title)] = s[d.id];
}

namespace detail {

inline std::array<double, kValueCount> parse_value_map(const json& j, bool require_all, const char* what) {
  std::array<double, kValueCount> out{};
  if (j.is_array()) {
    if (j.size() != kValueCount) {
      throw Error(Errc::InvalidArgument, std::string(what) + " array must have 19 entries",
                  std::to_string(j.size()));
    }
    for (std::size_t i = 0; i < kValueCount; ++i) {
      if (!j[i].is_number()) throw Error(Errc::InvalidArgument, std::string(what) + " entry is not a number");
      out[i] = j[i].get<double>();
    }
    return out;
  }
  if (!j.is_object()) throw Error(Errc::InvalidArgument, std::string(what) + " must be an object or array");
  std::array<bool, kValueCount> seen{};
  for (const auto& [key, val] : j.items()) {
    auto id = find_value(key);
    if (!id) throw Error(Errc::InvalidArgument, std::string("unknown value in ") + what, key);
    if (seen[index_of(*id)]) throw Error(Errc::InvalidArgument, std::string("value given twice in ") + what, key);
    if (!val.is_number()) throw Error(Errc::InvalidArgument, std::string(what) + " entry is not a number", key);
    seen[index_of(*id)] = true;
    out[index_of(*id)] = val.get<double>();
  }
  if (require_all) {
    for (std::size_t i = 0; i < kValueCount; ++i)
      if (!seen[i]) throw Error(Errc::MissingValue, std::string(what) + " missing value", std::string(taxonomy()[i].title));
  }
  return out;
}

}  // namespace detail

inline void from_json(const json& j, ValueScores& s) {
  s = ValueScores(detail::parse_value_map(j, true, "ratings"));
}

inline void to_json(json& j, const WeightVector& w) {
  json weights = json::object();
  for (const auto& d : taxonomy()) weights[std::string(d.title)] = w[d.id];
  j = json{{"weights", weights}, {"mode", w.mode() == WeightMode::Free ? "free" : "slider"}};
}

/// Accepts `{"weights": {...}, "mode": "free"|"slider"}`, a bare title map
/// (missing values default to 0), or a 19-element array.
inline void from_json(const json& j, WeightVector& w) {
  WeightMode mode = WeightMode::Free;
  const json* body = &j;
  if (j.is_object() && j.contains("weights")) {
    body = &j.at("weights");
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "slider") mode = WeightMode::SliderQuantized;
      else if (m != "free") throw Error(Errc::InvalidArgument, "unknown weight mode", m);
    }
  }
  w = WeightVector(detail::parse_value_map(*body, false, "weights"), mode);
}

// ---------------------------------------------------------------------------
// Posts

enum class PostKind : std::uint8_t { Original, Repost, Reply, Quote };

struct ImageRef {
  std::string url;
  std::optional<std::string> alt;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct LinkCard {
  std::string title;
  std::string description;
  friend bool operator==(const LinkCard&, const LinkCard&) = default;
};

struct Post {
  std::string id;
  std::string body;
  std::string author;
  std::vector<ImageRef> attachments;
  std::optional<LinkCard> link;
  std::shared_ptr<const Post> quoted;
  std::vector<Post> conversation;  // replies, in thread order
  PostKind kind = PostKind::Original;
  bool promoted = false;
  bool recommendation = false;  // follow/subscribe suggestion card
  std::size_t engagement_rank = 0;

  friend bool operator==(const Post& a, const Post& b) {
    const bool quotes_equal = (!a.quoted && !b.quoted) || (a.quoted && b.quoted && *a.quoted == *b.quoted);
    return a.id == b.id && a.body == b.body && a.author == b.author && a.attachments == b.attachments &&
           a.link == b.link && quotes_equal && a.conversation == b.conversation && a.kind == b.kind &&
           a.promoted == b.promoted && a.recommendation == b.recommendation &&
           a.engagement_rank == b.engagement_rank;
  }
};

constexpr std::string_view to_string(PostKind k) noexcept {
  switch (k) {
    case PostKind::Original: return "original";
    case PostKind::Repost: return "repost";
    case PostKind::Reply: return "reply";
    case PostKind::Quote: return "quote";
  }
  return "";
}

inline PostKind post_kind_from_string(std::string_view s) {
  for (auto k : {PostKind::Original, PostKind::Repost, PostKind::Reply, PostKind::Quote})
    if (detail::iequals(to_string(k), s)) return k;
  throw Error(Errc::MalformedRecord, "unknown post kind", std::string(s));
}

inline void to_json(json& j, const Post& p) {
  j = json{{"id", p.id}, {"body", p.body}, {"author", p.author}, {"kind", to_string(p.kind)}};
  if (!p.attachments.empty()) {
    json imgs = json::array();
    for (const auto& a : p.attachments) {
      json img{{"url", a.url}};
      if (a.alt) img["alt"] = *a.alt;
      imgs.push_back(std::move(img));
    }
    j["attachments"] = std::move(imgs);
  }
  if (p.link) j["link"] = json{{"title", p.link->title}, {"description", p.link->description}};
  if (p.quoted) j["quoted"] = *p.quoted;
  if (!p.conversation.empty()) j["conversation"] = p.conversation;
  if (p.promoted) j["promoted"] = true;
  if (p.recommendation) j["recommendation"] = true;
  j["engagement_rank"] = p.engagement_rank;
}

inline void from_json(const json& j, Post& p) {
  if (!j.is_object()) throw Error(Errc::MalformedRecord, "post record must be a JSON object");
  if (!j.contains("id") || !(j["id"].is_string() || j["id"].is_number_integer())) {
    throw Error(Errc::MalformedRecord, "post record needs an id");
  }
  p = Post{};
  p.id = j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(j["id"].get<long long>());
  p.body = j.value("body", std::string{});
  p.author = j.value("author", std::string{});
  if (j.contains("kind")) p.kind = post_kind_from_string(j["kind"].get<std::string>());
  if (j.contains("attachments")) {
    for (const auto& a : j["attachments"]) {
      ImageRef img;
      if (a.is_string()) {
        img.url = a.get<std::string>();
      } else {
        img.url = a.at("url").get<std::string>();
        if (a.contains("alt") && a["alt"].is_string()) img.alt = a["alt"].get<std::string>();
      }
      p.attachments.push_back(std::move(img));
    }
  }
  if (j.contains("link") && !j["link"].is_null()) {
    p.link = LinkCard{j["link"].value("title", std::string{}), j["link"].value("description", std::string{})};
  }
  if (j.contains("quoted") && !j["quoted"].is_null()) p.quoted = std::make_shared<const Post>(j["quoted"].get<Post>());
  if (j.contains("conversation")) p.conversation = j["conversation"].get<std::vector<Post>>();
  p.promoted = j.value("promoted", false);
  p.recommendation = j.value("recommendation", false);
  p.engagement_rank = j.value("engagement_rank", std::size_t{0});
}

}  // namespace valuerank
