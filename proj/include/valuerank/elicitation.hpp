#pragma once

// Turning survey answers and slider positions into weight vectors.

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "valuerank/error.hpp"
#include "valuerank/ranker.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

inline constexpr std::size_t kPvqItemCount = 57;

struct PvqItem {
  std::size_t index = 0;
  std::string text;
  ValueId value{};
};

/// Questionnaire definition: item texts, the item -> value map and the
/// answer scale. Ships as external configuration.
struct PvqInstrument {
  std::vector<PvqItem> items;  // sorted by index
  int scale_min = 1;
  int scale_max = 6;

  std::vector<ValueId> item_map() const {
    std::vector<ValueId> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.value);
    return out;
  }
};

inline void from_json(const json& j, PvqInstrument& inst) {
  inst = PvqInstrument{};
  for (const auto& it : j.at("items")) {
    inst.items.push_back(
        PvqItem{it.at("index").get<std::size_t>(), it.value("text", std::string{}), value_from_json(it.at("value_id"))});
  }
  std::sort(inst.items.begin(), inst.items.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < inst.items.size(); ++i) {
    if (inst.items[i].index != i) throw Error(Errc::InvalidArgument, "PVQ item indices must be 0..n-1", std::to_string(i));
  }
  if (j.contains("scale")) {
    inst.scale_min = j["scale"].value("min", 1);
    inst.scale_max = j["scale"].value("max", 6);
  }
}

inline void to_json(json& j, const PvqInstrument& inst) {
  json items = json::array();
  for (const auto& it : inst.items)
    items.push_back({{"index", it.index}, {"text", it.text}, {"value_id", index_of(it.value)}});
  j = json{{"items", items}, {"scale", {{"min", inst.scale_min}, {"max", inst.scale_max}}}};
}

/// Placeholder instrument with three items per value (item i measures value
/// i mod 19). The real item texts are licensed separately.
inline PvqInstrument synthetic_pvq_instrument() {
  PvqInstrument inst;
  for (std::size_t i = 0; i < kPvqItemCount; ++i) {
    const auto v = value_at(i % kValueCount);
    inst.items.push_back({i, "Item " + std::to_string(i + 1) + " (" + std::string(descriptor(v).title) + ")", v});
  }
  return inst;
}

struct PvqResponse {
  std::vector<int> item_answers;
  std::vector<ValueId> item_map;
  int scale_min = 1;
  int scale_max = 6;

  static PvqResponse for_instrument(const PvqInstrument& inst, std::vector<int> answers) {
    return PvqResponse{std::move(answers), inst.item_map(), inst.scale_min, inst.scale_max};
  }
};

struct PvqProfile {
  std::array<double, kValueCount> raw_means{};
  std::array<double, kValueCount> centered{};
  std::vector<ValueId> ranking;  // most important first
};

inline void to_json(json& j, const PvqProfile& p) {
  json ranking = json::array();
  for (auto v : p.ranking) ranking.push_back(descriptor(v).title);
  j = json{{"raw_means", p.raw_means}, {"centered", p.centered}, {"ranking", ranking}};
}

inline void from_json(const json& j, PvqProfile& p) {
  p.raw_means = j.at("raw_means").get<std::array<double, kValueCount>>();
  p.centered = j.at("centered").get<std::array<double, kValueCount>>();
  p.ranking.clear();
  for (const auto& v : j.at("ranking")) p.ranking.push_back(value_from_json(v));
}

/// Per-value item means, centered on the mean of the 19 value means, ranked
/// descending with canonical order breaking ties.
inline PvqProfile score_pvq(const PvqResponse& resp) {
  if (resp.item_map.size() != kPvqItemCount) {
    throw Error(Errc::InvalidArgument, "PVQ instrument must have 57 items", std::to_string(resp.item_map.size()));
  }
  if (resp.item_answers.size() < resp.item_map.size()) {
    throw Error(Errc::InvalidResponse, "PVQ answer missing", std::to_string(resp.item_answers.size()));
  }
  if (resp.item_answers.size() > resp.item_map.size()) {
    throw Error(Errc::InvalidResponse, "more PVQ answers than items", std::to_string(resp.item_map.size()));
  }
  std::array<double, kValueCount> sums{};
  std::array<int, kValueCount> counts{};
  for (std::size_t i = 0; i < resp.item_answers.size(); ++i) {
    const int a = resp.item_answers[i];
    if (a < resp.scale_min || a > resp.scale_max) {
      throw Error(Errc::InvalidResponse, "PVQ answer off scale", std::to_string(i));
    }
    sums[index_of(resp.item_map[i])] += a;
    ++counts[index_of(resp.item_map[i])];
  }
  PvqProfile p;
  for (std::size_t v = 0; v < kValueCount; ++v) {
    if (counts[v] == 0) {
      throw Error(Errc::InvalidArgument, "PVQ instrument has no item for a value", std::string(taxonomy()[v].title));
    }
    p.raw_means[v] = sums[v] / counts[v];
  }
  const double grand = std::accumulate(p.raw_means.begin(), p.raw_means.end(), 0.0) / kValueCount;
  for (std::size_t v = 0; v < kValueCount; ++v) p.centered[v] = p.raw_means[v] - grand;
  const auto values = all_values();
  p.ranking.assign(values.begin(), values.end());
  std::stable_sort(p.ranking.begin(), p.ranking.end(),
                   [&](ValueId a, ValueId b) { return p.centered[index_of(a)] > p.centered[index_of(b)]; });
  return p;
}

/// A value counts as expressible when some labeled post scores it at least 1.
inline bool is_expressed(ValueId v, const LabelMap& labels) {
  return std::any_of(labels.begin(), labels.end(), [v](const auto& kv) { return kv.second[v] >= 1.0; });
}

/// One-hot weights on the (trial+1)-th highest ranked value that the labeled
/// inventory expresses.
inline std::pair<ValueId, WeightVector> derive_single_value_weights(const PvqProfile& profile, const LabelMap& labels,
                                                                    std::size_t trial) {
  std::size_t surviving = 0;
  for (auto v : profile.ranking) {
    if (!is_expressed(v, labels)) continue;
    if (surviving++ == trial) return {v, WeightVector::one_hot(v)};
  }
  throw Error(Errc::NoExpressibleValue,
              fmt::format("only {} ranked values are expressed in the inventory; trial {} needs one more", surviving, trial),
              std::to_string(trial));
}

inline constexpr std::array<int, 6> kConditionLimits{1, 2, 3, 4, 5, 19};

inline bool is_condition_limit(int limit) {
  return std::find(kConditionLimits.begin(), kConditionLimits.end(), limit) != kConditionLimits.end();
}

struct SliderState {
  WeightVector weights;
  int condition_limit = 19;
  std::set<ValueId> changed;

  /// Changed set derived from the nonzero sliders.
  static SliderState from_weights(const WeightVector& w, int condition_limit) {
    SliderState s{w, condition_limit, {}};
    for (auto v : all_values())
      if (w[v] != 0.0) s.changed.insert(v);
    return s;
  }
};

/// Throws QuantizationError, NothingChanged, TooManyChanged or
/// InvalidArgument; returns normally when the state may be ranked.
inline void validate_sliders(const SliderState& state) {
  if (!is_condition_limit(state.condition_limit)) {
    throw Error(Errc::InvalidArgument, "condition limit must be one of 1, 2, 3, 4, 5, 19",
                std::to_string(state.condition_limit));
  }
  for (auto v : all_values()) {
    const double w = state.weights[v];
    if (w < -1.0 || w > 1.0 || !WeightVector::is_quantized(w)) {
      throw Error(Errc::QuantizationError, "slider weight must be a multiple of 0.25 in [-1, 1]",
                  std::string(descriptor(v).title));
    }
  }
  std::set<ValueId> nonzero;
  for (auto v : all_values())
    if (state.weights[v] != 0.0) nonzero.insert(v);
  if (state.changed.empty() && nonzero.empty()) throw Error(Errc::NothingChanged, "change at least one slider");
  if (state.changed.size() > static_cast<std::size_t>(state.condition_limit) ||
      nonzero.size() > static_cast<std::size_t>(state.condition_limit)) {
    throw Error(Errc::TooManyChanged, fmt::format("at most {} sliders may change", state.condition_limit),
                std::to_string(state.condition_limit));
  }
  if (state.changed != nonzero) {
    throw Error(Errc::InvalidArgument, "changed sliders must be exactly the nonzero sliders");
  }
}

inline void to_json(json& j, const SliderState& s) {
  j = s.weights;
  j["mode"] = "slider";
  j["condition_limit"] = s.condition_limit;
  json changed = json::array();
  for (auto v : s.changed) changed.push_back(descriptor(v).title);
  j["changed"] = changed;
}

inline void from_json(const json& j, SliderState& s) {
  s.weights = j.get<WeightVector>();
  s.condition_limit = j.value("condition_limit", 19);
  s.changed.clear();
  if (j.contains("changed")) {
    for (const auto& v : j["changed"]) s.changed.insert(value_from_json(v));
  } else {
    s = SliderState::from_weights(s.weights, s.condition_limit);
  }
}

}  // namespace valuerank
