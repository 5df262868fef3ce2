// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>

#include "vr_test_support.hpp"

using namespace vrtest;
using vr::ValueId;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::string first_failure;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      first_failure = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Outcome worked_examples() {
  const auto t0 = Clock::now();
  Check c;

  // A post with Caring = 6 scores +6 for Jeanne's direction and -6 for Jeff's.
  const auto caring6 = scores_with({{ValueId::Caring, 6}});
  c.require(vr::score_post(weights_with({{ValueId::Caring, 1.0}}), caring6) == 6.0, "Caring +1 gives 6");
  c.require(vr::score_post(weights_with({{ValueId::Caring, -1.0}}), caring6) == -6.0, "Caring -1 gives -6");
  const auto jeanne = vr::read_json_file(data_path("weights/jeanne.json")).get<vr::WeightVector>();
  const auto jeff = vr::read_json_file(data_path("weights/jeff.json")).get<vr::WeightVector>();
  c.require(vr::score_post(jeanne, caring6) == 6.0, "Jeanne file scores the Caring post 6");
  c.require(vr::score_post(jeff, caring6) == -6.0, "Jeff file scores the Caring post -6");

  // Opposite extremes in a small inventory.
  auto inv = plain_inventory(5);
  vr::LabelMap labels;
  labels["p0"] = scores_with({{ValueId::Achievement, 3}});
  labels["p1"] = scores_with({{ValueId::Tradition, 2}});
  labels["p2"] = caring6;
  labels["p3"] = scores_with({{ValueId::Dominance, 4}, {ValueId::Caring, 1}});
  labels["p4"] = vr::ValueScores{};
  c.require(vr::rank(inv, labels, jeanne).entries.front().post_id == "p2", "Caring post first for Jeanne");
  c.require(vr::rank(inv, labels, jeff).entries.back().post_id == "p2", "Caring post last for Jeff");

  // Tradition weight 1 against Personal security weight 0.25: four times the
  // Personal security score ties, and engagement order breaks the tie.
  const auto w = weights_with({{ValueId::Tradition, 1.0}, {ValueId::PersonalSecurity, 0.25}});
  const auto trad = scores_with({{ValueId::Tradition, 1}});
  const auto sec = scores_with({{ValueId::PersonalSecurity, 4}});
  c.require(vr::score_post(w, trad) == vr::score_post(w, sec), "four-times equivalence is an exact tie");
  auto two = plain_inventory(2);
  const auto ab = vr::rank(two, {{"p0", trad}, {"p1", sec}}, w);
  const auto ba = vr::rank(two, {{"p0", sec}, {"p1", trad}}, w);
  c.require(ab.post_ids() == std::vector<std::string>{"p0", "p1"}, "tie keeps engagement order (Tradition first)");
  c.require(ba.post_ids() == std::vector<std::string>{"p0", "p1"}, "tie keeps engagement order (security first)");

  const double secs = seconds_since(t0);
  c.require(secs < 1.0, "runtime under 1 s");
  return {c.ok, c.ok ? fmt::format("+6/-6 exact, four-times tie exact, {:.3f} s", secs) : c.first_failure};
}

Outcome zero_weight_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(20240801);
  std::uniform_int_distribution<std::size_t> size(1, 100);
  Check c;
  const vr::WeightVector zero;
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const auto rc = random_case(gen, size(gen));
    const auto ranked = vr::rank(rc.inv, rc.labels, zero);
    std::vector<std::string> expected;
    for (const auto& p : rc.inv.posts) expected.push_back(p.id);
    c.require(json(ranked.post_ids()).dump() == json(expected).dump(), fmt::format("case {} reordered", i));
    c.require(json(ranked).dump() == json(vr::engagement_feed(rc.inv, rc.labels, zero)).dump(),
              fmt::format("case {} serialized feed differs from engagement feed", i));
  }
  const double secs = seconds_since(t0);
  c.require(secs < 10.0, "runtime under 10 s");
  return {c.ok, c.ok ? fmt::format("1000 inventories byte-identical, {:.2f} s", secs) : c.first_failure};
}

Outcome ranking_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(77);
  const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  Check c;
  std::size_t comparisons = 0;
  for (std::size_t n = 1; n <= 8 && c.ok; ++n) {
    for (int rep = 0; rep < 150 && c.ok; ++rep) {
      // Three active values; small label ranges make ties common.
      auto vals = vr::all_values();
      std::shuffle(vals.begin(), vals.end(), gen);
      const int top = rep % 3 == 0 ? 1 : (rep % 3 == 1 ? 2 : 6);
      std::uniform_int_distribution<int> level(0, top);
      auto inv = plain_inventory(n);
      vr::LabelMap labels;
      for (const auto& p : inv.posts)
        labels[p.id] = scores_with({{vals[0], level(gen)}, {vals[1], level(gen)}, {vals[2], level(gen)}});
      for (double a : grid)
        for (double b : grid)
          for (double d : grid) {
            const auto w = weights_with({{vals[0], a}, {vals[1], b}, {vals[2], d}});
            ++comparisons;
            if (vr::rank(inv, labels, w).post_ids() != oracle_rank(inv, labels, w)) {
              c.require(false, fmt::format("mismatch at n={} rep={} w=({}, {}, {})", n, rep, a, b, d));
            }
          }
    }
  }
  const double secs = seconds_since(t0);
  c.require(secs < 60.0, "runtime under 60 s");
  return {c.ok, c.ok ? fmt::format("{} rankings match the brute-force oracle, {:.2f} s", comparisons, secs)
                     : c.first_failure};
}

Outcome weight_monotonicity() {
  std::mt19937_64 gen(4242);
  std::uniform_int_distribution<std::size_t> size(2, 40);
  std::uniform_int_distribution<int> sixtyfourths(-64, 64);
  Check c;
  for (int i = 0; i < 10000 && c.ok; ++i) {
    auto rc = random_case(gen, size(gen), 0.4);
    // Multiples of 1/64 keep every score exact in binary floating point.
    vr::WeightVector w;
    for (auto v : vr::all_values()) w.set(v, sixtyfourths(gen) / 64.0);
    const auto v = vr::value_at(gen() % vr::kValueCount);
    if (w[v] == 1.0) w.set(v, 63 / 64.0);
    const int base = static_cast<int>(w[v] * 64.0);
    std::uniform_int_distribution<int> up(base + 1, 64);
    vr::WeightVector raised = w;
    raised.set(v, up(gen) / 64.0);

    const auto before = vr::rank(rc.inv, rc.labels, w).value_scores();
    const auto after = vr::rank(rc.inv, rc.labels, raised).value_scores();
    for (std::size_t k = 1; k <= before.size(); ++k) {
      const auto sb = vr::value_strength(std::span(before).first(k))[vr::index_of(v)];
      const auto sa = vr::value_strength(std::span(after).first(k))[vr::index_of(v)];
      if (sa < sb) {
        c.require(false, fmt::format("case {}: strength of {} fell from {} to {} at k={}", i,
                                     vr::descriptor(v).title, sb, sa, k));
        break;
      }
    }
  }
  return {c.ok, c.ok ? "10000 cases, full feed and every top-k prefix, no decrease" : c.first_failure};
}

Outcome strength_constant() {
  std::vector<vr::ValueScores> feed(20, scores_with({{ValueId::Caring, 6}}));
  const double s = vr::value_strength(feed)[vr::index_of(ValueId::Caring)];
  constexpr double reported = 42.4;
  const bool ok = std::fabs(s - 42.24) <= 0.01 && std::fabs(s - reported) <= 0.5;
  return {ok, fmt::format("strength {:.6f}; reported constant {} differs by {:.3f}", s, reported, reported - s)};
}

Outcome chi_square() {
  const auto r = vr::chi_square_gof(429, 564, 0.5);
  const bool ok = std::fabs(r.statistic - 153.26) <= 0.05 && r.p_value < 0.001;
  return {ok, fmt::format("chi2 = {:.4f}, p = {:.3g}", r.statistic, r.p_value)};
}

Outcome mae_formulas() {
  Check c;
  std::ifstream in(data_path("annotations_synthetic.jsonl"));
  const auto records = vr::read_annotations(in);
  // Hand-computed per-record errors (exact fractions).
  const double human[] = {4.0 / 3, 0.5, 2.0 / 3, 2.0 / 3, 1.1, 1.0, 4.0 / 3, 0.5, 4.0 / 3, 4.0 / 3, 4.0 / 3, 0.5};
  const double llm[] = {0.5, 0.25, 1.0, 1.0, 0.4, 0.75, 2.5, 0.25, 0.5, 1.5, 0.5, 0.25};
  c.require(records.size() == 12, "fixture has 12 records");
  for (std::size_t i = 0; i < records.size() && c.ok; ++i) {
    c.require(std::fabs(vr::human_consensus_mae(records[i].human_labels) - human[i]) <= 1e-9,
              fmt::format("human MAE of record {}", i));
    c.require(std::fabs(vr::llm_consensus_mae(*records[i].machine_label, records[i].human_labels) - llm[i]) <= 1e-9,
              fmt::format("LLM MAE of record {}", i));
  }
  const auto rep = vr::mae_report(records);
  c.require(std::fabs(rep.overall.human.mean - 29.0 / 30) <= 1e-9, "overall human mean");
  c.require(std::fabs(rep.overall.human.sd - 0.3722712164348173) <= 1e-9, "overall human sd");
  c.require(std::fabs(rep.overall.llm.mean - 47.0 / 60) <= 1e-9, "overall LLM mean");
  c.require(std::fabs(rep.overall.llm.sd - 0.6603488517901777) <= 1e-9, "overall LLM sd");
  const auto& hed = rep.per_value[vr::index_of(ValueId::Hedonism)];
  c.require(std::fabs(hed.human.mean - 1.0) <= 1e-9 && std::fabs(hed.llm.mean - 0.75) <= 1e-9, "Hedonism row");

  // Exhaustive permutation invariance: every label vector on 0..6 for n = 2..5
  // annotators, every ordering of those annotators.
  std::size_t vectors = 0;
  for (std::size_t n = 2; n <= 5 && c.ok; ++n) {
    std::vector<double> labels(n, 0.0);
    while (c.ok) {
      const double h = vr::human_consensus_mae(labels);
      const double l = vr::llm_consensus_mae(3.0, labels);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      while (std::next_permutation(perm.begin(), perm.end())) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = labels[perm[i]];
        if (std::fabs(vr::human_consensus_mae(p) - h) > 1e-9 || std::fabs(vr::llm_consensus_mae(3.0, p) - l) > 1e-9) {
          c.require(false, fmt::format("permutation changed MAE for n={}", n));
          break;
        }
      }
      ++vectors;
      std::size_t d = 0;
      while (d < n && labels[d] == 6.0) labels[d++] = 0.0;
      if (d == n) break;
      labels[d] += 1.0;
    }
  }
  return {c.ok, c.ok ? fmt::format("12 records within 1e-9; {} label vectors permutation invariant", vectors)
                     : c.first_failure};
}

Outcome kendall() {
  Check c;
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("p" + std::to_string(i));
  const std::vector<std::string> rev(ids.rbegin(), ids.rend());
  c.require(vr::kendall_tau(ids, ids) == 1.0, "identity gives 1");
  c.require(vr::kendall_tau(ids, rev) == -1.0, "reversal gives -1");
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<std::size_t> size(2, 10);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    std::vector<std::string> a(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(size(gen)));
    auto b = a;
    std::shuffle(a.begin(), a.end(), gen);
    std::shuffle(b.begin(), b.end(), gen);
    c.require(vr::kendall_tau(a, b) == oracle_tau(a, b), fmt::format("pair {} disagrees with the oracle", i));
  }
  return {c.ok, c.ok ? "identity 1, reversal -1, 1000 random pairs equal to the pair-counting oracle" : c.first_failure};
}

Outcome prompt_and_parse_golden() {
  Check c;
  vr::Post post;
  post.id = "golden";
  post.body = "In retrospect, all the 'double-jointed' '12,000 calorie diet' and '6’8 wingspan' claims were blatant "
              "misdirection";
  auto quoted = std::make_shared<vr::Post>();
  quoted->id = "golden-q";
  quoted->author = "Srirachachau";
  quoted->body = "Take away these medals that only happened because of biological advantages";
  post.quoted = quoted;
  post.link = vr::LinkCard{"Olympic records under review", "A look back at decades of disputed results"};
  const auto bundle = vr::build_prompt(post);
  const auto golden = vr::read_file(golden_path("prompt_fixture.txt"));
  c.require(bundle.text == golden, "prompt differs from the golden file");

  std::ifstream in(golden_path("label_examples.jsonl"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = json::parse(line);
    const auto parsed = vr::parse_rating(row.at("raw").get<std::string>());
    const auto expected = row.at("expected").get<std::vector<double>>();
    c.require(std::vector<double>(parsed.ratings().begin(), parsed.ratings().end()) == expected,
              fmt::format("label example {} parsed differently", rows));
    ++rows;
  }
  c.require(rows == 5, "five label examples");
  return {c.ok, c.ok ? fmt::format("prompt byte-exact ({} bytes); 5 label objects exact", golden.size())
                     : c.first_failure};
}

Outcome conversation_averaging() {
  Check c;
  auto run = [&](std::vector<double> caring) {
    std::vector<std::string> replies;
    std::vector<vr::Post> posts;
    for (std::size_t i = 0; i < caring.size(); ++i) {
      replies.push_back(rating_reply(scores_with({{ValueId::Caring, caring[i]}})));
      posts.push_back(vr::Post{.id = "c" + std::to_string(i), .body = "member " + std::to_string(i)});
    }
    ScriptedBackend backend(replies);
    vr::MemoryLabelStore cache;
    return vr::classify_conversation(posts, backend, cache)[ValueId::Caring];
  };
  const double a = run({0, 6});
  const double b = run({1, 2, 3});
  c.require(a == 3.0, "[0,6] averages to 3");
  c.require(b == 2.0, "[1,2,3] averages to 2");
  return {c.ok, fmt::format("[0,6] -> {}, [1,2,3] -> {}", a, b)};
}

// ---------------------------------------------------------------------------
// Simulated single-value study through the service router.

struct StudyResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t sessions = 0;
  std::string error;
};

vr::HttpResponse call(vr::Service& svc, std::string_view method, const std::string& path, const json& body = nullptr) {
  return svc.handle(method, path, body.is_null() ? std::string{} : body.dump());
}

StudyResult simulate_study(vr::Service& svc, const std::string& inventory_id, bool ideal, std::uint64_t seed,
                           std::size_t sessions) {
  StudyResult out;
  const vr::MockBackend self_scorer;
  std::mt19937_64 pvq_gen(seed);
  for (std::size_t s = 0; s < sessions; ++s) {
    auto created = call(svc, "POST", "/sessions",
                        {{"inventory_id", inventory_id}, {"mode", "single_value"}, {"condition_limit", 1},
                         {"rng_seed", vr::mix_seed(seed, s)}});
    if (created.status != 201) {
      out.error = created.body.dump();
      return out;
    }
    const auto sid = created.body.at("id").get<std::string>();
    auto pvq = call(svc, "POST", "/sessions/" + sid + "/pvq", {{"answers", random_pvq_answers(pvq_gen)}});
    if (pvq.status != 200) {
      out.error = pvq.body.dump();
      return out;
    }
    vr::Rng chooser(vr::mix_seed(seed ^ 0xabcdefULL, s));
    for (int t = 0; t < 4; ++t) {
      auto trial = call(svc, "POST", "/sessions/" + sid + "/trials", json::object());
      if (trial.status != 201) {
        out.error = trial.body.dump();
        return out;
      }
      std::string side;
      if (ideal) {
        // The participant reads the blinded posts and scores them for the
        // value the question names.
        const auto target = *vr::find_value(trial.body.at("target_value").get<std::string>());
        double sums[2] = {0.0, 0.0};
        for (int f = 0; f < 2; ++f)
          for (const auto& p : trial.body.at("feeds")[f].at("posts"))
            sums[f] += self_scorer.score_content(p.at("body").get<std::string>())[target];
        if (sums[0] != sums[1]) side = sums[0] > sums[1] ? "Left" : "Right";
        else side = chooser.coin() ? "Left" : "Right";
      } else {
        side = chooser.coin() ? "Left" : "Right";
      }
      auto choice = call(svc, "POST", fmt::format("/sessions/{}/trials/{}/choice", sid, t), {{"side", side}});
      if (choice.status != 200) {
        out.error = choice.body.dump();
        return out;
      }
    }
    auto results = call(svc, "GET", "/sessions/" + sid + "/results");
    out.correct += results.body.at("correct").get<std::size_t>();
    out.total += results.body.at("total").get<std::size_t>();
    ++out.sessions;
  }
  return out;
}

Outcome simulated_study() {
  const auto t0 = Clock::now();
  vr::ServiceConfig cfg;
  cfg.parallelism = 2;
  vr::Service svc(cfg, std::make_shared<vr::MockBackend>());
  // 36 batches of 30: four 9-batch windows, one per trial.
  const auto added = call(svc, "POST", "/inventories", json(synthetic_corpus(1080, 2024)));
  if (added.status != 201) return {false, "inventory rejected: " + added.body.dump()};
  const auto inv_id = added.body.at("id").get<std::string>();
  call(svc, "POST", "/inventories/" + inv_id + "/classify");
  svc.wait_idle();
  const auto status = call(svc, "GET", "/inventories/" + inv_id + "/classify/status");
  if (status.body.at("state") != "done" || !status.body.at("failures").empty()) {
    return {false, "classification incomplete: " + status.body.dump()};
  }

  const auto ideal = simulate_study(svc, inv_id, true, 1, 500);
  const auto random = simulate_study(svc, inv_id, false, 2, 500);
  if (!ideal.error.empty()) return {false, "ideal participant run failed: " + ideal.error};
  if (!random.error.empty()) return {false, "random participant run failed: " + random.error};
  const double r_ideal = vr::recognizability(ideal.correct, ideal.total);
  const double r_random = vr::recognizability(random.correct, random.total);
  const bool ok = ideal.sessions == 500 && random.sessions == 500 && r_ideal > 95.0 && std::fabs(r_random - 50.0) <= 5.0;
  return {ok, fmt::format("self-scoring participant {:.2f}% ({}/{}), random participant {:.2f}% ({}/{}), {:.1f} s",
                          r_ideal, ideal.correct, ideal.total, r_random, random.correct, random.total,
                          seconds_since(t0))};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"worked-example fidelity", worked_examples},
      {"zero-weight identity", zero_weight_identity},
      {"ranking oracle equivalence", ranking_oracle},
      {"weight monotonicity", weight_monotonicity},
      {"value-strength constant", strength_constant},
      {"chi-square reproduction", chi_square},
      {"consensus MAE formulas", mae_formulas},
      {"Kendall tau", kendall},
      {"prompt and parse golden files", prompt_and_parse_golden},
      {"conversation averaging", conversation_averaging},
      {"simulated recognizability", simulated_study},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS  " : "FAIL  ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
