#pragma once

// Feed- and study-level measures: discounted value strength, rank
// correlation, annotator agreement, recognizability and the usual tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "valuerank/error.hpp"
#include "valuerank/random.hpp"
#include "valuerank/ranker.hpp"
#include "valuerank/values.hpp"

namespace valuerank {

using PerValue = std::array<double, kValueCount>;

// ---------------------------------------------------------------------------
// Value strength

/// Position-discounted sum per value: sum_i score_i / log2(i + 2), i from 0.
inline PerValue value_strength(std::span<const ValueScores> feed) {
  if (feed.empty()) throw Error(Errc::EmptyFeed, "value strength of an empty feed");
  PerValue out{};
  for (std::size_t i = 0; i < feed.size(); ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    for (std::size_t v = 0; v < kValueCount; ++v) out[v] += feed[i].ratings()[v] / discount;
  }
  return out;
}

inline PerValue value_strength(const RankedFeed& feed) { return value_strength(feed.value_scores()); }

struct StrengthReport {
  PerValue per_value{};
  std::map<Quadrant, double> by_quadrant;  // mean over member values
  std::map<Focus, double> by_focus;
};

inline StrengthReport summarize_strength(const PerValue& per_value) {
  StrengthReport r;
  r.per_value = per_value;
  for (auto q : kQuadrants) {
    double sum = 0.0;
    int n = 0;
    for (const auto& d : taxonomy())
      if (d.in_quadrant(q)) {
        sum += per_value[index_of(d.id)];
        ++n;
      }
    r.by_quadrant[q] = sum / n;
  }
  for (auto f : {Focus::Personal, Focus::Social}) {
    double sum = 0.0;
    int n = 0;
    for (const auto& d : taxonomy())
      if (d.focus == f) {
        sum += per_value[index_of(d.id)];
        ++n;
      }
    r.by_focus[f] = sum / n;
  }
  return r;
}

/// strength(value_feed) - strength(engagement_feed), with group means.
inline StrengthReport strength_delta(std::span<const ValueScores> engagement_feed,
                                     std::span<const ValueScores> value_feed) {
  const auto before = value_strength(engagement_feed);
  const auto after = value_strength(value_feed);
  PerValue delta{};
  for (std::size_t v = 0; v < kValueCount; ++v) delta[v] = after[v] - before[v];
  return summarize_strength(delta);
}

inline void to_json(json& j, const StrengthReport& r) {
  json per = json::object();
  for (const auto& d : taxonomy()) per[std::string(d.title)] = r.per_value[index_of(d.id)];
  json quad = json::object();
  for (const auto& [q, v] : r.by_quadrant) quad[std::string(to_string(q))] = v;
  json focus = json::object();
  for (const auto& [f, v] : r.by_focus) focus[std::string(to_string(f))] = v;
  j = json{{"per_value", per}, {"by_quadrant", quad}, {"by_focus", focus}};
}

// ---------------------------------------------------------------------------
// Kendall's tau-a between two orderings of the same ids

namespace detail {

// Counts inversions with a merge sort; O(n log n).
inline std::uint64_t count_inversions(std::vector<std::size_t>& a, std::vector<std::size_t>& scratch, std::size_t lo,
                                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(a, scratch, lo, mid) + count_inversions(a, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[i] <= a[j]) scratch[k++] = a[i++];
    else {
      inv += mid - i;
      scratch[k++] = a[j++];
    }
  }
  while (i < mid) scratch[k++] = a[i++];
  while (j < hi) scratch[k++] = a[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace detail

inline double kendall_tau(std::span<const std::string> order_a, std::span<const std::string> order_b) {
  if (order_a.size() != order_b.size()) {
    throw Error(Errc::DomainMismatch, "orderings have different lengths",
                fmt::format("{} vs {}", order_a.size(), order_b.size()));
  }
  std::unordered_map<std::string_view, std::size_t> pos_b;
  for (std::size_t i = 0; i < order_b.size(); ++i) {
    if (!pos_b.emplace(order_b[i], i).second) throw Error(Errc::DomainMismatch, "duplicate id in ordering", order_b[i]);
  }
  std::vector<std::size_t> seq;
  seq.reserve(order_a.size());
  std::unordered_map<std::string_view, bool> seen_a;
  for (const auto& id : order_a) {
    auto it = pos_b.find(id);
    if (it == pos_b.end()) throw Error(Errc::DomainMismatch, "id missing from second ordering", id);
    if (!seen_a.emplace(id, true).second) throw Error(Errc::DomainMismatch, "duplicate id in ordering", id);
    seq.push_back(it->second);
  }
  const std::size_t n = seq.size();
  if (n < 2) throw Error(Errc::InvalidArgument, "tau needs at least two items", std::to_string(n));
  std::vector<std::size_t> scratch(n);
  const auto discordant = static_cast<double>(detail::count_inversions(seq, scratch, 0, n));
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return (pairs - 2.0 * discordant) / pairs;
}

// ---------------------------------------------------------------------------
// Annotator agreement

/// Mean over annotators of |own label - mean of the other labels|.
inline double human_consensus_mae(std::span<const double> labels) {
  const std::size_t n = labels.size();
  if (n < 2) throw Error(Errc::InsufficientAnnotators, "consensus needs at least two annotators", std::to_string(n));
  const double total = std::accumulate(labels.begin(), labels.end(), 0.0);
  double err = 0.0;
  for (double own : labels) err += std::fabs(own - (total - own) / static_cast<double>(n - 1));
  return err / static_cast<double>(n);
}

inline double llm_consensus_mae(double machine, std::span<const double> labels) {
  if (labels.empty()) throw Error(Errc::InsufficientAnnotators, "consensus needs at least one annotator", "0");
  const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
  return std::fabs(machine - mean);
}

struct AnnotationRecord {
  std::string post_id;
  ValueId value{};
  std::vector<double> human_labels;
  std::optional<double> machine_label;
};

inline void from_json(const json& j, AnnotationRecord& r) {
  r.post_id = j.at("post_id").get<std::string>();
  r.value = value_from_json(j.at("value"));
  r.human_labels.clear();
  for (const auto& l : j.at("human_labels")) {
    const double x = l.get<double>();
    if (x < 0 || x > 6 || x != std::floor(x)) throw Error(Errc::OutOfRange, "human label off scale", l.dump());
    r.human_labels.push_back(x);
  }
  r.machine_label.reset();
  if (j.contains("machine_label") && !j["machine_label"].is_null()) r.machine_label = j["machine_label"].get<double>();
}

inline std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<AnnotationRecord>());
    } catch (const std::exception& e) {
      throw Error(Errc::MalformedRecord, fmt::format("line {}: {}", line_no, e.what()), fmt::format("line {}", line_no));
    }
  }
  return out;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for fewer than two items
  std::size_t n = 0;
};

inline MeanSd mean_sd(std::span<const double> xs) {
  MeanSd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

struct MaeRow {
  MeanSd human;
  MeanSd llm;
};

struct MaeReport {
  std::array<MaeRow, kValueCount> per_value;
  MaeRow overall;
};

/// Human- and LLM-consensus MAE per value and overall. The machine label
/// comes from `machine` when it has the post, else from the record itself.
inline MaeReport mae_report(std::span<const AnnotationRecord> records, const LabelMap* machine = nullptr) {
  std::array<std::vector<double>, kValueCount> human, llm;
  std::vector<double> all_human, all_llm;
  for (const auto& r : records) {
    const auto v = index_of(r.value);
    if (r.human_labels.size() >= 2) {
      const double e = human_consensus_mae(r.human_labels);
      human[v].push_back(e);
      all_human.push_back(e);
    }
    std::optional<double> m = r.machine_label;
    if (machine) {
      if (auto it = machine->find(r.post_id); it != machine->end()) m = it->second[r.value];
    }
    if (m && !r.human_labels.empty()) {
      const double e = llm_consensus_mae(*m, r.human_labels);
      llm[v].push_back(e);
      all_llm.push_back(e);
    }
  }
  MaeReport rep;
  for (std::size_t v = 0; v < kValueCount; ++v) rep.per_value[v] = {mean_sd(human[v]), mean_sd(llm[v])};
  rep.overall = {mean_sd(all_human), mean_sd(all_llm)};
  return rep;
}

/// Plain-text table: one row per value (Schwartz names) then "Overall".
inline std::string format_mae_table(const MaeReport& rep) {
  auto cell = [](const MeanSd& m) { return m.n == 0 ? std::string("-") : fmt::format("{:.2f}±{:.2f}", m.mean, m.sd); };
  std::string out = fmt::format("{:<26}{:>22}{:>22}\n", "Value", "Human-Consensus MAE", "LLM-Consensus MAE");
  for (const auto& d : taxonomy()) {
    const auto& row = rep.per_value[index_of(d.id)];
    out += fmt::format("{:<26}{:>22}{:>22}\n", d.schwartz_name, cell(row.human), cell(row.llm));
  }
  out += fmt::format("{:<26}{:>22}{:>22}\n", "Overall", cell(rep.overall.human), cell(rep.overall.llm));
  return out;
}

inline void to_json(json& j, const MeanSd& m) { j = json{{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}}; }

inline void to_json(json& j, const MaeReport& rep) {
  json rows = json::array();
  for (const auto& d : taxonomy()) {
    const auto& row = rep.per_value[index_of(d.id)];
    rows.push_back({{"value", d.schwartz_name}, {"title", d.title}, {"human_consensus_mae", row.human},
                    {"llm_consensus_mae", row.llm}});
  }
  j = json{{"rows", rows},
           {"overall", {{"human_consensus_mae", rep.overall.human}, {"llm_consensus_mae", rep.overall.llm}}}};
}

// ---------------------------------------------------------------------------
// Recognizability and significance

inline double recognizability(std::size_t correct, std::size_t total) {
  if (total == 0) throw Error(Errc::NoTrials, "recognizability of zero trials");
  if (correct > total) throw Error(Errc::InvalidArgument, "more correct trials than trials");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

inline double recognizability(std::span<const bool> chose_value_feed) {
  return recognizability(static_cast<std::size_t>(std::count(chose_value_feed.begin(), chose_value_feed.end(), true)),
                         chose_value_feed.size());
}

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Survival function of the chi-square distribution with one degree of
/// freedom: P(X > x) = erfc(sqrt(x / 2)).
inline double chi_square_sf_1df(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }

/// Two-cell goodness of fit of `correct` successes in `total` trials against
/// success probability `p0`.
inline ChiSquareResult chi_square_gof(std::size_t correct, std::size_t total, double p0) {
  if (total == 0 || correct > total) throw Error(Errc::InvalidArgument, "need 0 <= correct <= total and total > 0");
  if (!(p0 > 0.0 && p0 < 1.0)) throw Error(Errc::InvalidArgument, "p0 must lie strictly between 0 and 1");
  const double n = static_cast<double>(total);
  const double obs[2] = {static_cast<double>(correct), static_cast<double>(total - correct)};
  const double exp[2] = {n * p0, n * (1.0 - p0)};
  double stat = 0.0;
  for (int c = 0; c < 2; ++c) stat += (obs[c] - exp[c]) * (obs[c] - exp[c]) / exp[c];
  return {stat, chi_square_sf_1df(stat)};
}

inline double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Percentile bootstrap interval. Endpoints are order statistics of the
/// resampled statistic at floor(a*B) and ceil((1-a)*B)-1, a = (1-level)/2.
template <typename Statistic = double (*)(std::span<const double>)>
std::pair<double, double> bootstrap_ci(std::span<const double> samples, std::size_t iterations, double level,
                                       std::uint64_t seed, Statistic statistic = &mean_of) {
  if (samples.empty()) throw Error(Errc::NoData, "bootstrap of an empty sample");
  if (iterations < 1) throw Error(Errc::InvalidArgument, "bootstrap needs at least one iteration");
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::InvalidArgument, "confidence level must be in (0, 1)");
  Rng rng(seed);
  std::vector<double> resample(samples.size());
  std::vector<double> stats;
  stats.reserve(iterations);
  for (std::size_t b = 0; b < iterations; ++b) {
    for (auto& x : resample) x = samples[rng.below(samples.size())];
    stats.push_back(statistic(std::span<const double>(resample)));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto B = static_cast<double>(iterations);
  auto lo = static_cast<std::size_t>(std::floor(alpha * B));
  auto hi_raw = std::ceil((1.0 - alpha) * B);
  auto hi = hi_raw < 1.0 ? std::size_t{0} : static_cast<std::size_t>(hi_raw) - 1;
  lo = std::min(lo, iterations - 1);
  hi = std::min(hi, iterations - 1);
  return {stats[lo], stats[hi]};
}

// ---------------------------------------------------------------------------
// Correlation and reliability

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(Errc::InvalidArgument, "pearson_r needs two equal-length samples of size >= 2");
  }
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::UndefinedCorrelation, "a sample has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double fisher_z(double r) {
  if (!(std::fabs(r) < 1.0)) throw Error(Errc::DomainError, "fisher_z needs |r| < 1", std::to_string(r));
  return std::atanh(r);
}

/// Rows are respondents, columns items.
inline double cronbach_alpha(const std::vector<std::vector<double>>& items) {
  const std::size_t n = items.size();
  if (n < 2) throw Error(Errc::InvalidArgument, "cronbach_alpha needs at least two respondents");
  const std::size_t k = items.front().size();
  if (k < 2) throw Error(Errc::InvalidArgument, "cronbach_alpha needs at least two items");
  for (const auto& row : items)
    if (row.size() != k) throw Error(Errc::InvalidArgument, "ragged response matrix");
  auto variance = [n](const std::vector<double>& xs) {
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(n - 1);
  };
  double item_var = 0.0;
  std::vector<double> column(n), totals(n, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      column[r] = items[r][c];
      totals[r] += items[r][c];
    }
    item_var += variance(column);
  }
  const double total_var = variance(totals);
  if (total_var == 0.0) throw Error(Errc::UndefinedAlpha, "total score has zero variance");
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var / total_var);
}

}  // namespace valuerank
