#pragma once

// Experiment sessions: PVQ, slider training, blinded side-by-side trials and
// the closing survey. Ground truth lives only in the server-side Session.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valuerank/elicitation.hpp"
#include "valuerank/error.hpp"
#include "valuerank/ingest.hpp"
#include "valuerank/random.hpp"
#include "valuerank/ranker.hpp"

namespace valuerank {

enum class Phase : std::uint8_t { Pvq, Training, Testing, Survey, Done };
enum class StudyMode : std::uint8_t { SingleValue, Sliders };
enum class Side : std::uint8_t { Left, Right };

constexpr std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Pvq: return "pvq";
    case Phase::Training: return "training";
    case Phase::Testing: return "testing";
    case Phase::Survey: return "survey";
    case Phase::Done: return "done";
  }
  return "";
}

constexpr std::string_view to_string(StudyMode m) noexcept {
  return m == StudyMode::SingleValue ? "single_value" : "sliders";
}

constexpr std::string_view to_string(Side s) noexcept { return s == Side::Left ? "Left" : "Right"; }

inline Side side_from_string(std::string_view s) {
  if (s == "Left" || s == "left" || s == "Feed A") return Side::Left;
  if (s == "Right" || s == "right" || s == "Feed B") return Side::Right;
  throw Error(Errc::InvalidArgument, "side must be Left or Right", std::string(s));
}

struct SessionConfig {
  WindowConfig windows;
  std::size_t max_trials = 4;
  std::size_t feed_k = 20;
  bool allow_window_reuse = true;
  int survey_min = 1;
  int survey_max = 7;
};

struct Trial {
  std::size_t index = 0;
  std::string window_id;
  RankedFeed left;
  RankedFeed right;
  Side value_feed_side = Side::Left;
  std::optional<Side> choice;
  std::optional<bool> correct;
  std::optional<ValueId> target_value;  // single-value sessions only
};

struct Session {
  std::string id;
  std::string inventory_id;
  StudyMode mode = StudyMode::Sliders;
  int condition_limit = 19;
  std::optional<PvqProfile> pvq;
  std::optional<SliderState> slider_state;
  std::vector<Trial> trials;
  std::map<std::string, int> survey_answers;
  std::uint64_t rng_seed = 0;
  Phase phase = Phase::Pvq;
};

inline void require_phase(const Session& s, Phase expected) {
  if (s.phase != expected) {
    throw Error(Errc::InvalidPhase,
                fmt::format("session {} is in phase {}, request needs {}", s.id, to_string(s.phase), to_string(expected)),
                std::string(to_string(s.phase)));
  }
}

inline LabelMap labels_for(const Inventory& window, const LabelMap& labels) {
  LabelMap out;
  for (const auto& p : window.posts) {
    auto it = labels.find(p.id);
    if (it == labels.end()) throw Error(Errc::MissingLabel, "post has no label", p.id);
    out.emplace(p.id, it->second);
  }
  return out;
}

inline std::size_t window_batches(const Session& s, const SessionConfig& cfg) {
  return s.mode == StudyMode::SingleValue ? cfg.windows.single_value_batches : cfg.windows.slider_batches;
}

/// Window ranked by live previews during training. Drawn from its own seed
/// stream, independent of the trial windows.
inline Inventory training_window(const Session& s, const Inventory& inv, const SessionConfig& cfg) {
  return sample_window_or_reuse(inv, cfg.windows.slider_batches, 0, mix_seed(s.rng_seed, 1), cfg.windows.batch_size);
}

/// Weights the next trial ranks by: the committed sliders, or in
/// single-value sessions the next PVQ-ranked value the inventory expresses.
inline std::pair<WeightVector, std::optional<ValueId>> trial_weights(const Session& s, const LabelMap& inventory_labels,
                                                                     std::size_t trial_index) {
  if (s.mode == StudyMode::Sliders) {
    if (!s.slider_state) throw Error(Errc::InvalidPhase, "sliders not committed");
    return {s.slider_state->weights, std::nullopt};
  }
  if (!s.pvq) throw Error(Errc::InvalidPhase, "PVQ not submitted");
  auto [value, weights] = derive_single_value_weights(*s.pvq, inventory_labels, trial_index);
  return {weights, value};
}

/// Builds the next trial: a fresh window, its engagement feed and its
/// value-ranked feed (both top-k), placed left/right by the session seed.
inline Trial create_trial(Session& s, const Inventory& inv, const LabelMap& labels, const WeightVector& weights,
                          std::size_t k, const SessionConfig& cfg, std::optional<ValueId> target = std::nullopt) {
  require_phase(s, Phase::Testing);
  if (!s.trials.empty() && !s.trials.back().choice) {
    throw Error(Errc::InvalidPhase, "previous trial is unanswered", std::to_string(s.trials.back().index));
  }
  if (s.trials.size() >= cfg.max_trials) {
    throw Error(Errc::InvalidPhase, "all trials already created", std::to_string(cfg.max_trials));
  }
  if (weights.is_zero()) throw Error(Errc::DegenerateWeights, "all-zero weights give two identical feeds");

  const std::size_t index = s.trials.size();
  const std::size_t n_batches = window_batches(s, cfg);
  const Inventory window = cfg.allow_window_reuse
                               ? sample_window_or_reuse(inv, n_batches, index, s.rng_seed, cfg.windows.batch_size)
                               : sample_window(inv, n_batches, index, s.rng_seed, cfg.windows.batch_size);
  const LabelMap window_labels = labels_for(window, labels);

  RankedFeed engagement = top_k(engagement_feed(window, window_labels, weights), k);
  RankedFeed value = top_k(rank(window, window_labels, weights), k);
  if (engagement.post_ids() == value.post_ids()) {
    throw Error(Errc::DegenerateWeights, "value ranking leaves the top of the feed unchanged", window.id);
  }

  Trial t;
  t.index = index;
  t.window_id = window.id;
  t.target_value = target;
  Rng side_rng(mix_seed(s.rng_seed, 1000 + index));
  t.value_feed_side = side_rng.coin() ? Side::Left : Side::Right;
  if (t.value_feed_side == Side::Left) {
    t.left = std::move(value);
    t.right = std::move(engagement);
  } else {
    t.left = std::move(engagement);
    t.right = std::move(value);
  }
  s.trials.push_back(t);
  return t;
}

/// Records a choice and returns whether it picked the value-ranked feed.
inline bool submit_choice(Session& s, std::size_t trial_index, Side side, const SessionConfig& cfg) {
  if (trial_index >= s.trials.size()) throw Error(Errc::UnknownTrial, "no such trial", std::to_string(trial_index));
  Trial& t = s.trials[trial_index];
  if (t.choice) throw Error(Errc::AlreadyAnswered, "trial already answered", std::to_string(trial_index));
  require_phase(s, Phase::Testing);
  t.choice = side;
  t.correct = side == t.value_feed_side;
  if (s.trials.size() >= cfg.max_trials &&
      std::all_of(s.trials.begin(), s.trials.end(), [](const Trial& x) { return x.choice.has_value(); })) {
    s.phase = Phase::Survey;
  }
  return *t.correct;
}

/// Ranks the training window with candidate slider weights. Pure.
inline RankedFeed live_preview(const Session& s, const Inventory& inv, const LabelMap& labels,
                               const SliderState& sliders, std::size_t k, const SessionConfig& cfg) {
  require_phase(s, Phase::Training);
  if (sliders.condition_limit != s.condition_limit) {
    throw Error(Errc::InvalidArgument, "slider state is for a different condition", std::to_string(sliders.condition_limit));
  }
  validate_sliders(sliders);
  const Inventory window = training_window(s, inv, cfg);
  return top_k(rank(window, labels_for(window, labels), sliders.weights), k);
}

inline std::vector<bool> answered_outcomes(const Session& s) {
  std::vector<bool> out;
  for (const auto& t : s.trials)
    if (t.correct) out.push_back(*t.correct);
  return out;
}

// ---------------------------------------------------------------------------
// JSON. The full form is for server-side persistence only; clients see
// blinded_trial_json.

inline json post_view(const Post& p) {
  json j{{"id", p.id}, {"body", p.body}, {"author", p.author}, {"kind", to_string(p.kind)}};
  if (!p.attachments.empty()) {
    json imgs = json::array();
    for (const auto& a : p.attachments) imgs.push_back(a.alt ? json{{"url", a.url}, {"alt", *a.alt}} : json{{"url", a.url}});
    j["attachments"] = imgs;
  }
  if (p.link) j["link"] = {{"title", p.link->title}, {"description", p.link->description}};
  if (p.quoted) j["quoted"] = post_view(*p.quoted);
  return j;
}

/// Client view of a trial. Before a choice it carries only post content under
/// the generic labels "Feed A" (left) and "Feed B" (right).
inline json blinded_trial_json(const Trial& t, const std::map<std::string, const Post*>& posts) {
  auto feed_view = [&](const RankedFeed& f, std::string_view label) {
    json items = json::array();
    for (const auto& e : f.entries) {
      auto it = posts.find(e.post_id);
      items.push_back(it != posts.end() ? post_view(*it->second) : json{{"id", e.post_id}});
    }
    return json{{"label", label}, {"posts", items}};
  };
  json j{{"index", t.index},
         {"feeds", json::array({feed_view(t.left, "Feed A"), feed_view(t.right, "Feed B")})},
         {"answered", t.choice.has_value()}};
  if (t.target_value) {
    const auto& d = descriptor(*t.target_value);
    j["question"] = fmt::format("Which feed contains more content reflecting {}?", d.title);
    j["target_value"] = d.title;
    j["definition"] = d.definition;
  }
  if (t.choice) {
    j["choice"] = to_string(*t.choice);
    j["correct"] = *t.correct;
    j["value_feed_side"] = to_string(t.value_feed_side);
  }
  return j;
}

inline void to_json(json& j, const Trial& t) {
  j = json{{"index", t.index},
           {"window_id", t.window_id},
           {"left", t.left},
           {"right", t.right},
           {"value_feed_side", to_string(t.value_feed_side)},
           {"choice", t.choice ? json(to_string(*t.choice)) : json(nullptr)},
           {"correct", t.correct ? json(*t.correct) : json(nullptr)},
           {"target_value", t.target_value ? json(index_of(*t.target_value)) : json(nullptr)}};
}

inline void from_json(const json& j, Trial& t) {
  t.index = j.at("index").get<std::size_t>();
  t.window_id = j.at("window_id").get<std::string>();
  t.left = j.at("left").get<RankedFeed>();
  t.right = j.at("right").get<RankedFeed>();
  t.value_feed_side = side_from_string(j.at("value_feed_side").get<std::string>());
  t.choice = j["choice"].is_null() ? std::nullopt : std::optional<Side>(side_from_string(j["choice"].get<std::string>()));
  t.correct = j["correct"].is_null() ? std::nullopt : std::optional<bool>(j["correct"].get<bool>());
  t.target_value = j["target_value"].is_null() ? std::nullopt : std::optional<ValueId>(value_from_json(j["target_value"]));
}

inline void to_json(json& j, const Session& s) {
  j = json{{"id", s.id},
           {"inventory_id", s.inventory_id},
           {"mode", to_string(s.mode)},
           {"condition_limit", s.condition_limit},
           {"pvq", s.pvq ? json(*s.pvq) : json(nullptr)},
           {"slider_state", s.slider_state ? json(*s.slider_state) : json(nullptr)},
           {"trials", s.trials},
           {"survey_answers", s.survey_answers},
           {"rng_seed", s.rng_seed},
           {"phase", to_string(s.phase)}};
}

inline void from_json(const json& j, Session& s) {
  s.id = j.at("id").get<std::string>();
  s.inventory_id = j.at("inventory_id").get<std::string>();
  s.mode = j.at("mode").get<std::string>() == "single_value" ? StudyMode::SingleValue : StudyMode::Sliders;
  s.condition_limit = j.at("condition_limit").get<int>();
  s.pvq = j["pvq"].is_null() ? std::nullopt : std::optional<PvqProfile>(j["pvq"].get<PvqProfile>());
  s.slider_state = j["slider_state"].is_null() ? std::nullopt : std::optional<SliderState>(j["slider_state"].get<SliderState>());
  s.trials = j.at("trials").get<std::vector<Trial>>();
  s.survey_answers = j.at("survey_answers").get<std::map<std::string, int>>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const auto phase = j.at("phase").get<std::string>();
  for (auto p : {Phase::Pvq, Phase::Training, Phase::Testing, Phase::Survey, Phase::Done})
    if (to_string(p) == phase) s.phase = p;
}

}  // namespace valuerank
