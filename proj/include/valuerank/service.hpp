#pragma once

// HTTP+JSON service over inventories, classification jobs, ranking, sessions
// and analytics. `Service::handle` is transport independent; `bind_http`
// attaches it to a cpp-httplib server.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "valuerank/analytics.hpp"
#include "valuerank/backends.hpp"
#include "valuerank/classifier.hpp"
#include "valuerank/elicitation.hpp"
#include "valuerank/ingest.hpp"
#include "valuerank/label_cache.hpp"
#include "valuerank/ranker.hpp"
#include "valuerank/session.hpp"

namespace valuerank {

struct ServiceConfig {
  SessionConfig session;
  std::size_t parallelism = 4;
  ClassifyOptions classify;
  PvqInstrument pvq = synthetic_pvq_instrument();
  std::optional<std::filesystem::path> data_dir;
  std::string bearer_token;  // empty disables auth
};

struct HttpResponse {
  int status = 200;
  json body;
};

using QueryParams = std::multimap<std::string, std::string>;

inline int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownSession:
    case Errc::UnknownInventory:
    case Errc::UnknownTrial: return 404;
    case Errc::InvalidPhase:
    case Errc::AlreadyAnswered:
    case Errc::JobNotReady:
    case Errc::WindowExhausted:
    case Errc::DuplicateId: return 409;
    case Errc::ParseError: return 400;
    case Errc::Io:
    case Errc::ClassificationFailed: return 500;
    case Errc::BackendError: return 502;
    default: return 422;
  }
}

inline HttpResponse problem(int status, std::string_view code, std::string_view message, std::string_view detail = {}) {
  return {status, json{{"code", code}, {"message", message}, {"detail", detail}}};
}

class Service {
 public:
  Service(ServiceConfig cfg, std::shared_ptr<ChatBackend> backend, std::shared_ptr<LabelStore> cache = nullptr)
      : cfg_(std::move(cfg)), backend_(std::move(backend)), cache_(std::move(cache)) {
    if (cfg_.data_dir) {
      std::filesystem::create_directories(*cfg_.data_dir / "inventories");
      if (!cache_) cache_ = std::make_shared<JsonlLabelStore>(*cfg_.data_dir / "labels.jsonl");
      load_state();
    }
    if (!cache_) cache_ = std::make_shared<MemoryLabelStore>();
  }

  ~Service() { wait_idle(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocks until every background classification job has finished.
  void wait_idle() {
    std::vector<std::jthread> jobs;
    {
      std::lock_guard lock(jobs_mutex_);
      jobs.swap(jobs_);
    }
    jobs.clear();
  }

  const ServiceConfig& config() const noexcept { return cfg_; }

  // -------------------------------------------------------------------------
  // Inventories

  /// Registers an inventory. Re-posting identical content is a no-op that
  /// returns the existing entry. `labels`, when given, completes
  /// classification immediately.
  json add_inventory(Inventory inv, std::optional<LabelMap> labels = std::nullopt) {
    std::shared_ptr<InventoryEntry> entry;
    {
      std::unique_lock lock(inventories_mutex_);
      if (auto it = inventories_.find(inv.id); it != inventories_.end()) return inventory_summary(*it->second);
      entry = std::make_shared<InventoryEntry>(std::move(inv));
      inventories_.emplace(entry->inv.id, entry);
    }
    persist_inventory(*entry);
    if (labels) {
      std::lock_guard lock(entry->mutex);
      for (const auto& p : entry->inv.posts)
        if (!labels->count(p.id)) throw Error(Errc::MissingLabel, "supplied labels miss a post", p.id);
      entry->labels = std::move(*labels);
      entry->state = JobState::Done;
      persist_labels(*entry);
    }
    return inventory_summary(*entry);
  }

  json start_classification(const std::string& inventory_id) {
    auto entry = inventory(inventory_id);
    {
      std::lock_guard lock(entry->mutex);
      if (entry->state == JobState::Running || entry->state == JobState::Done) return status_json(*entry);
      entry->state = JobState::Running;
    }
    std::lock_guard lock(jobs_mutex_);
    jobs_.emplace_back([this, entry] { run_classification(entry); });
    return json{{"inventory_id", inventory_id}, {"state", "running"}};
  }

  json classification_status(const std::string& inventory_id) {
    auto entry = inventory(inventory_id);
    std::lock_guard lock(entry->mutex);
    return status_json(*entry);
  }

  RankedFeed rank_inventory(const std::string& inventory_id, const WeightVector& weights, std::optional<std::size_t> k) {
    auto entry = inventory(inventory_id);
    auto [labels, flagged] = completed_labels(*entry);
    RankOptions opts;
    opts.flagged = std::move(flagged);
    auto feed = rank(entry->inv, labels, weights, opts);
    return k ? top_k(std::move(feed), *k) : feed;
  }

  // -------------------------------------------------------------------------
  // Sessions

  json create_session(const std::string& inventory_id, int condition_limit, StudyMode mode,
                      std::optional<std::uint64_t> seed) {
    inventory(inventory_id);
    if (!is_condition_limit(condition_limit)) {
      throw Error(Errc::InvalidArgument, "condition_limit must be one of 1, 2, 3, 4, 5, 19",
                  std::to_string(condition_limit));
    }
    auto entry = std::make_shared<SessionEntry>();
    {
      std::unique_lock lock(sessions_mutex_);
      entry->s.id = fmt::format("s{}", ++session_counter_);
      entry->s.inventory_id = inventory_id;
      entry->s.condition_limit = condition_limit;
      entry->s.mode = mode;
      entry->s.rng_seed = seed ? *seed : mix_seed(fnv1a(entry->s.id), 0);
      sessions_.emplace(entry->s.id, entry);
    }
    std::lock_guard lock(entry->mutex);
    persist_session(entry->s, "created");
    return session_summary(entry->s);
  }

  json submit_pvq(const std::string& session_id, std::vector<int> answers) {
    return with_session(session_id, [&](Session& s) {
      require_phase(s, Phase::Pvq);
      s.pvq = score_pvq(PvqResponse::for_instrument(cfg_.pvq, std::move(answers)));
      s.phase = s.mode == StudyMode::Sliders ? Phase::Training : Phase::Testing;
      persist_session(s, "pvq");
      return json{{"phase", to_string(s.phase)}, {"pvq", *s.pvq}};
    });
  }

  RankedFeed preview(const std::string& session_id, SliderState sliders, std::optional<std::size_t> k) {
    auto entry = session(session_id);
    Session snapshot;
    {
      std::lock_guard lock(entry->mutex);
      snapshot = entry->s;
    }
    sliders.condition_limit = snapshot.condition_limit;
    auto inv = inventory(snapshot.inventory_id);
    auto [labels, flagged] = completed_labels(*inv);
    return live_preview(snapshot, inv->inv, labels, sliders, k.value_or(cfg_.session.feed_k), cfg_.session);
  }

  json commit_sliders(const std::string& session_id, SliderState sliders) {
    return with_session(session_id, [&](Session& s) {
      require_phase(s, Phase::Training);
      sliders.condition_limit = s.condition_limit;
      validate_sliders(sliders);
      s.slider_state = sliders;
      s.phase = Phase::Testing;
      persist_session(s, "sliders");
      return json{{"phase", to_string(s.phase)}};
    });
  }

  json new_trial(const std::string& session_id, std::optional<std::size_t> k) {
    return with_session(session_id, [&](Session& s) {
      require_phase(s, Phase::Testing);
      auto inv = inventory(s.inventory_id);
      auto [labels, flagged] = completed_labels(*inv);
      auto [weights, target] = trial_weights(s, labels, s.trials.size());
      const auto trial = create_trial(s, inv->inv, labels, weights, k.value_or(cfg_.session.feed_k), cfg_.session, target);
      persist_session(s, "trial");
      return blinded_trial_json(trial, inv->by_id);
    });
  }

  json get_trial(const std::string& session_id, std::size_t index) {
    return with_session(session_id, [&](Session& s) {
      if (index >= s.trials.size()) throw Error(Errc::UnknownTrial, "no such trial", std::to_string(index));
      return blinded_trial_json(s.trials[index], inventory(s.inventory_id)->by_id);
    });
  }

  json choose(const std::string& session_id, std::size_t index, Side side) {
    return with_session(session_id, [&](Session& s) {
      const bool correct = submit_choice(s, index, side, cfg_.session);
      persist_session(s, "choice");
      return json{{"correct", correct}, {"phase", to_string(s.phase)}};
    });
  }

  json submit_survey(const std::string& session_id, const std::map<std::string, int>& answers) {
    return with_session(session_id, [&](Session& s) {
      require_phase(s, Phase::Survey);
      if (answers.empty()) throw Error(Errc::InvalidArgument, "survey has no answers");
      for (const auto& [q, a] : answers) {
        if (a < cfg_.session.survey_min || a > cfg_.session.survey_max) {
          throw Error(Errc::InvalidResponse, "survey answers use a 7-point scale", q);
        }
      }
      s.survey_answers = answers;
      s.phase = Phase::Done;
      persist_session(s, "survey");
      return json{{"phase", to_string(s.phase)}};
    });
  }

  json results(const std::string& session_id) {
    return with_session(session_id, [&](Session& s) {
      const auto outcomes = answered_outcomes(s);
      const auto correct = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), true));
      json trials = json::array();
      auto inv = inventory(s.inventory_id);
      for (const auto& t : s.trials)
        if (t.choice) trials.push_back(blinded_trial_json(t, inv->by_id));
      json out{{"session", session_summary(s)},
               {"correct", correct},
               {"total", outcomes.size()},
               {"recognizability", outcomes.empty() ? json(nullptr) : json(recognizability(correct, outcomes.size()))},
               {"trials", trials},
               {"survey_answers", s.survey_answers}};
      if (!s.survey_answers.empty()) {
        double sum = 0.0;
        for (const auto& [q, a] : s.survey_answers) sum += a;
        out["complexity"] = sum / static_cast<double>(s.survey_answers.size());
      }
      if (s.pvq) out["pvq"] = *s.pvq;
      if (s.slider_state) out["slider_state"] = *s.slider_state;
      return out;
    });
  }

  /// Full server-side session including ground truth. Never routed to clients.
  Session session_state(const std::string& session_id) {
    auto entry = session(session_id);
    std::lock_guard lock(entry->mutex);
    return entry->s;
  }

  // -------------------------------------------------------------------------
  // Routing

  HttpResponse handle(std::string_view method, std::string_view path, const std::string& body,
                      const QueryParams& query = {}, std::string_view authorization = {}) {
    try {
      if (!cfg_.bearer_token.empty() && authorization != "Bearer " + cfg_.bearer_token) {
        return problem(401, "Unauthorized", "missing or wrong bearer token");
      }
      return route(method, split_path(path), body, query);
    } catch (const Error& e) {
      return problem(http_status(e.code()), to_string(e.code()), e.what(), e.detail());
    } catch (const json::parse_error& e) {
      return problem(400, "ParseError", "request body is not valid JSON", e.what());
    } catch (const json::exception& e) {
      return problem(422, "InvalidArgument", "request body does not match the schema", e.what());
    } catch (const std::exception& e) {
      return problem(500, "Internal", e.what());
    }
  }

 private:
  enum class JobState { Idle, Running, Done };

  struct InventoryEntry {
    explicit InventoryEntry(Inventory i) : inv(std::move(i)) {
      for (const auto& p : inv.posts) by_id.emplace(p.id, &p);
    }
    const Inventory inv;
    std::map<std::string, const Post*> by_id;
    std::mutex mutex;
    JobState state = JobState::Idle;
    LabelMap labels;
    std::set<std::string> flagged;
    std::vector<ClassificationFailure> failures;
  };

  struct SessionEntry {
    std::mutex mutex;
    Session s;
  };

  std::shared_ptr<InventoryEntry> inventory(const std::string& id) {
    std::shared_lock lock(inventories_mutex_);
    auto it = inventories_.find(id);
    if (it == inventories_.end()) throw Error(Errc::UnknownInventory, "unknown inventory", id);
    return it->second;
  }

  std::shared_ptr<SessionEntry> session(const std::string& id) {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::UnknownSession, "unknown session", id);
    return it->second;
  }

  /// Runs `fn` with the session locked; changes are kept only if it succeeds.
  template <typename Fn>
  json with_session(const std::string& id, Fn&& fn) {
    auto entry = session(id);
    std::lock_guard lock(entry->mutex);
    Session working = entry->s;
    json out = fn(working);
    entry->s = std::move(working);
    return out;
  }

  std::pair<LabelMap, std::set<std::string>> completed_labels(InventoryEntry& entry) {
    std::lock_guard lock(entry.mutex);
    if (entry.state != JobState::Done) throw Error(Errc::JobNotReady, "inventory is not classified yet", entry.inv.id);
    return {entry.labels, entry.flagged};
  }

  void run_classification(const std::shared_ptr<InventoryEntry>& entry) {
    InventoryLabels result;
    try {
      result = classify_inventory(entry->inv, *backend_, *cache_, cfg_.parallelism, cfg_.classify);
    } catch (const std::exception& e) {
      spdlog::error("classification of {} aborted: {}", entry->inv.id, e.what());
      for (const auto& p : entry->inv.posts) result.failures.push_back({p.id, e.what()});
    }
    const auto flagged = fill_unlabeled(result);
    std::lock_guard lock(entry->mutex);
    entry->labels = std::move(result.labels);
    entry->failures = std::move(result.failures);
    entry->flagged = {flagged.begin(), flagged.end()};
    entry->state = JobState::Done;
    persist_labels(*entry);
  }

  static json status_json(const InventoryEntry& e) {
    static constexpr std::string_view names[] = {"idle", "running", "done"};
    json failures = json::array();
    for (const auto& f : e.failures) failures.push_back({{"post_id", f.post_id}, {"message", f.message}});
    return json{{"inventory_id", e.inv.id},
                {"state", names[static_cast<int>(e.state)]},
                {"total", e.inv.posts.size()},
                {"labeled", e.state == JobState::Done ? e.labels.size() - e.flagged.size() : 0},
                {"failures", failures}};
  }

  json inventory_summary(InventoryEntry& e) {
    json j = e.inv;
    std::lock_guard lock(e.mutex);
    j["classification"] = status_json(e)["state"];
    return j;
  }

  static json session_summary(const Session& s) {
    const auto answered = std::count_if(s.trials.begin(), s.trials.end(), [](const Trial& t) { return t.choice.has_value(); });
    return json{{"id", s.id},
                {"inventory_id", s.inventory_id},
                {"mode", to_string(s.mode)},
                {"condition_limit", s.condition_limit},
                {"phase", to_string(s.phase)},
                {"trials_created", s.trials.size()},
                {"trials_answered", answered}};
  }

  static std::vector<std::string> split_path(std::string_view path) {
    if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= path.size()) {
      auto end = path.find('/', start);
      if (end == std::string_view::npos) end = path.size();
      if (end > start) out.emplace_back(path.substr(start, end - start));
      start = end + 1;
    }
    return out;
  }

  static json parse_body(const std::string& body) { return body.empty() ? json::object() : json::parse(body); }

  static std::optional<std::size_t> opt_k(const json& j) {
    if (!j.contains("k") || j["k"].is_null()) return std::nullopt;
    const auto k = j["k"].get<long long>();
    if (k < 1) throw Error(Errc::InvalidArgument, "k must be at least 1", std::to_string(k));
    return static_cast<std::size_t>(k);
  }

  static std::size_t parse_index(const std::string& s) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(Errc::UnknownTrial, "trial index must be a non-negative integer", s);
  }

  HttpResponse route(std::string_view method, const std::vector<std::string>& seg, const std::string& body,
                     const QueryParams& query) {
    const bool get = method == "GET", post = method == "POST";
    const std::size_t n = seg.size();
    auto not_allowed = [&] { return problem(405, "MethodNotAllowed", "method not allowed on this path"); };

    if (n == 1 && seg[0] == "taxonomy") return get ? HttpResponse{200, taxonomy_json()} : not_allowed();

    if (n >= 1 && seg[0] == "inventories") {
      if (n == 1) return post ? HttpResponse{201, create_inventory_from_body(body)} : not_allowed();
      if (n == 2) return get ? HttpResponse{200, inventory_summary(*inventory(seg[1]))} : not_allowed();
      if (n == 3 && seg[2] == "classify") return post ? HttpResponse{202, start_classification(seg[1])} : not_allowed();
      if (n == 4 && seg[2] == "classify" && seg[3] == "status")
        return get ? HttpResponse{200, classification_status(seg[1])} : not_allowed();
    }

    if (n == 1 && seg[0] == "rank") {
      if (!post) return not_allowed();
      const json req = parse_body(body);
      return {200, rank_inventory(req.at("inventory_id").get<std::string>(), req.at("weights").get<WeightVector>(),
                                  opt_k(req))};
    }

    if (n >= 1 && seg[0] == "sessions") {
      if (n == 1) {
        if (!post) return not_allowed();
        const json req = parse_body(body);
        const auto mode = req.value("mode", std::string("sliders")) == "single_value" ? StudyMode::SingleValue
                                                                                       : StudyMode::Sliders;
        std::optional<std::uint64_t> seed;
        if (req.contains("rng_seed")) seed = req["rng_seed"].get<std::uint64_t>();
        return {201, create_session(req.at("inventory_id").get<std::string>(), req.value("condition_limit", 19), mode,
                                    seed)};
      }
      const std::string& sid = seg[1];
      if (n == 2) {
        if (!get) return not_allowed();
        auto entry = session(sid);
        std::lock_guard lock(entry->mutex);
        return {200, session_summary(entry->s)};
      }
      const std::string& what = seg[2];
      if (n == 3 && what == "pvq") {
        if (!post) return not_allowed();
        return {200, submit_pvq(sid, parse_body(body).at("answers").get<std::vector<int>>())};
      }
      if (n == 3 && what == "preview") {
        if (!post) return not_allowed();
        const json req = parse_body(body);
        return {200, preview(sid, req.get<SliderState>(), opt_k(req))};
      }
      if (n == 3 && what == "sliders") {
        if (!post) return not_allowed();
        return {200, commit_sliders(sid, parse_body(body).get<SliderState>())};
      }
      if (n == 3 && what == "trials") {
        if (!post) return not_allowed();
        return {201, new_trial(sid, opt_k(parse_body(body)))};
      }
      if (n == 4 && what == "trials") return get ? HttpResponse{200, get_trial(sid, parse_index(seg[3]))} : not_allowed();
      if (n == 5 && what == "trials" && seg[4] == "choice") {
        if (!post) return not_allowed();
        const auto side = side_from_string(parse_body(body).at("side").get<std::string>());
        return {200, choose(sid, parse_index(seg[3]), side)};
      }
      if (n == 3 && what == "survey") {
        if (!post) return not_allowed();
        return {200, submit_survey(sid, parse_body(body).at("answers").get<std::map<std::string, int>>())};
      }
      if (n == 3 && what == "results") return get ? HttpResponse{200, results(sid)} : not_allowed();
    }

    if (n == 2 && seg[0] == "analytics") {
      if (!get && !post) return not_allowed();
      json req = json::object();
      if (post) req = parse_body(body);
      else if (auto it = query.find("q"); it != query.end()) req = json::parse(it->second);
      return {200, analytics(seg[1], req)};
    }

    return problem(404, "NotFound", "no such endpoint");
  }

  json create_inventory_from_body(const std::string& body) {
    std::vector<Post> posts;
    std::optional<LabelMap> labels;
    const json parsed = json::parse(body, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_array()) {
      posts = parsed.get<std::vector<Post>>();
    } else if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("posts")) {
      posts = parsed["posts"].get<std::vector<Post>>();
      if (parsed.contains("labels")) labels = parsed["labels"].get<LabelMap>();
    } else {
      std::istringstream in(body);
      posts = read_post_records(in);
    }
    return add_inventory(ingest(std::move(posts), InventorySource::Api), std::move(labels));
  }

  /// Feed inputs for strength/delta/tau: explicit score lists or a stored,
  /// already answered trial.
  std::pair<RankedFeed, RankedFeed> answered_trial_feeds(const json& req) {
    const auto sid = req.at("session_id").get<std::string>();
    const auto idx = req.at("trial").get<std::size_t>();
    const Session s = session_state(sid);
    if (idx >= s.trials.size()) throw Error(Errc::UnknownTrial, "no such trial", std::to_string(idx));
    const Trial& t = s.trials[idx];
    if (!t.choice) throw Error(Errc::InvalidPhase, "trial feeds are revealed after the choice", std::to_string(idx));
    const bool value_left = t.value_feed_side == Side::Left;
    return {value_left ? t.right : t.left, value_left ? t.left : t.right};  // {engagement, value}
  }

  json analytics(const std::string& kind, const json& req) {
    auto scores_of = [](const json& arr) { return arr.get<std::vector<ValueScores>>(); };
    auto truncate = [&req](std::vector<ValueScores> v) {
      if (auto k = opt_k(req); k && v.size() > *k) v.resize(*k);
      return v;
    };
    if (kind == "strength") {
      std::vector<ValueScores> feed;
      if (req.contains("feed")) feed = scores_of(req["feed"]);
      else {
        auto [engagement, value] = answered_trial_feeds(req);
        feed = (req.value("which", std::string("value")) == "engagement" ? engagement : value).value_scores();
      }
      return summarize_strength(value_strength(truncate(std::move(feed))));
    }
    if (kind == "delta") {
      std::vector<ValueScores> a, b;
      if (req.contains("engagement")) {
        a = scores_of(req.at("engagement"));
        b = scores_of(req.at("value"));
      } else {
        auto [engagement, value] = answered_trial_feeds(req);
        a = engagement.value_scores();
        b = value.value_scores();
      }
      return strength_delta(truncate(std::move(a)), truncate(std::move(b)));
    }
    if (kind == "tau") {
      std::vector<std::string> a, b;
      if (req.contains("a")) {
        a = req.at("a").get<std::vector<std::string>>();
        b = req.at("b").get<std::vector<std::string>>();
      } else {
        // Rank correlation of the value ordering against engagement order
        // over the value feed's posts.
        auto [engagement, value] = answered_trial_feeds(req);
        a = value.post_ids();
        std::vector<RankedEntry> by_rank = value.entries;
        std::sort(by_rank.begin(), by_rank.end(),
                  [](const auto& x, const auto& y) { return x.engagement_rank < y.engagement_rank; });
        for (const auto& e : by_rank) b.push_back(e.post_id);
      }
      return json{{"tau", kendall_tau(a, b)}, {"n", a.size()}};
    }
    if (kind == "mae") {
      std::vector<AnnotationRecord> records = req.at("annotations").get<std::vector<AnnotationRecord>>();
      std::optional<LabelMap> machine;
      if (req.contains("labels")) machine = req["labels"].get<LabelMap>();
      const auto rep = mae_report(records, machine ? &*machine : nullptr);
      json out = rep;
      out["table"] = format_mae_table(rep);
      return out;
    }
    if (kind == "chisq") {
      const auto r = chi_square_gof(req.at("correct").get<std::size_t>(), req.at("total").get<std::size_t>(),
                                    req.value("p0", 0.5));
      return json{{"statistic", r.statistic}, {"p_value", r.p_value}};
    }
    throw Error(Errc::InvalidArgument, "unknown analytics measure", kind);
  }

  // -------------------------------------------------------------------------
  // Persistence: inventories as JSONL plus a metadata file, finished labels
  // as a snapshot, sessions as an append-only event log of full snapshots.

  std::filesystem::path inventory_path(const std::string& id, std::string_view suffix) const {
    return *cfg_.data_dir / "inventories" / (id + std::string(suffix));
  }

  void persist_inventory(const InventoryEntry& e) {
    if (!cfg_.data_dir) return;
    std::ofstream posts(inventory_path(e.inv.id, ".jsonl"));
    for (const auto& p : e.inv.posts) posts << json(p).dump() << '\n';
    std::ofstream meta(inventory_path(e.inv.id, ".meta.json"));
    meta << json(e.inv).dump() << '\n';
    if (!posts || !meta) throw Error(Errc::Io, "cannot persist inventory", e.inv.id);
  }

  void persist_labels(const InventoryEntry& e) {
    if (!cfg_.data_dir) return;
    json failures = json::array();
    for (const auto& f : e.failures) failures.push_back({{"post_id", f.post_id}, {"message", f.message}});
    std::ofstream out(inventory_path(e.inv.id, ".labels.json"));
    out << json{{"labels", e.labels}, {"flagged", e.flagged}, {"failures", failures}}.dump() << '\n';
    if (!out) spdlog::error("cannot persist labels for {}", e.inv.id);
  }

  void persist_session(const Session& s, std::string_view event) {
    if (!cfg_.data_dir) return;
    std::lock_guard lock(log_mutex_);
    std::ofstream out(*cfg_.data_dir / "sessions.jsonl", std::ios::app);
    out << json{{"seq", ++event_seq_}, {"session_id", s.id}, {"event", event}, {"snapshot", s}}.dump() << '\n';
    if (!out) throw Error(Errc::Io, "cannot append to session log", s.id);
  }

  void load_state() {
    namespace fs = std::filesystem;
    for (const auto& f : fs::directory_iterator(*cfg_.data_dir / "inventories")) {
      const auto name = f.path().filename().string();
      if (name.size() < 10 || name.substr(name.size() - 10) != ".meta.json") continue;
      const std::string id = name.substr(0, name.size() - 10);
      std::ifstream meta_in(f.path());
      const json meta = json::parse(meta_in);
      std::ifstream posts_in(inventory_path(id, ".jsonl"));
      Inventory inv;
      inv.id = id;
      inv.posts = read_post_records(posts_in);
      inv.source = meta.value("source", std::string("file")) == "api" ? InventorySource::Api : InventorySource::File;
      inv.fetched_at = parse_timestamp(meta.value("fetched_at", std::string{}));
      auto entry = std::make_shared<InventoryEntry>(std::move(inv));
      if (fs::exists(inventory_path(id, ".labels.json"))) {
        std::ifstream lin(inventory_path(id, ".labels.json"));
        const json lj = json::parse(lin);
        entry->labels = lj.at("labels").get<LabelMap>();
        entry->flagged = lj.at("flagged").get<std::set<std::string>>();
        for (const auto& fj : lj.at("failures"))
          entry->failures.push_back({fj.at("post_id").get<std::string>(), fj.at("message").get<std::string>()});
        entry->state = JobState::Done;
      }
      inventories_.emplace(id, std::move(entry));
    }
    const auto log = *cfg_.data_dir / "sessions.jsonl";
    if (!fs::exists(log)) return;
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json ev = json::parse(line);
      event_seq_ = std::max(event_seq_, ev.at("seq").get<std::uint64_t>());
      auto snapshot = ev.at("snapshot").get<Session>();
      if (snapshot.id.size() > 1 && snapshot.id[0] == 's') {
        session_counter_ = std::max<std::uint64_t>(session_counter_, std::stoull(snapshot.id.substr(1)));
      }
      auto& slot = sessions_[snapshot.id];
      if (!slot) slot = std::make_shared<SessionEntry>();
      slot->s = std::move(snapshot);
    }
  }

  ServiceConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<LabelStore> cache_;

  std::shared_mutex inventories_mutex_;
  std::map<std::string, std::shared_ptr<InventoryEntry>> inventories_;
  std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::uint64_t session_counter_ = 0;

  std::mutex log_mutex_;
  std::uint64_t event_seq_ = 0;

  std::mutex jobs_mutex_;
  std::vector<std::jthread> jobs_;
};

/// Installs catch-all GET/POST/OPTIONS handlers that forward to `service`.
inline void bind_http(httplib::Server& server, Service& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    QueryParams query(req.params.begin(), req.params.end());
    const auto auth = req.get_header_value("Authorization");
    const auto out = service.handle(req.method, req.path, req.body, query, auth);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out.body.dump(), out.status >= 400 ? "application/problem+json" : "application/json");
  };
  server.Get(".*", forward);
  server.Post(".*", forward);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

}  // namespace valuerank
