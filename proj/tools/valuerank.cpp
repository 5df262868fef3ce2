// valuerank: batch driver for classification, ranking, validation, analytics
// and the HTTP service.
//
// Exit codes: 0 ok, 1 domain failure, 2 usage or I/O error.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "valuerank/io.hpp"
#include "valuerank/valuerank.hpp"

namespace vr = valuerank;
using vr::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct BackendFlags {
  std::string backend = "mock";
  std::string model = "gpt-4o";
  std::string base_url = "https://api.openai.com";
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t parallelism = 4;
  std::string prompt_version = "value-labeling-v1";
  std::string prompt_file;
  int max_attempts = 3;
};

void add_backend_flags(CLI::App& cmd, BackendFlags& f) {
  cmd.add_option("--backend", f.backend, "Labeling backend")->check(CLI::IsMember({"mock", "openai-compatible"}));
  cmd.add_option("--model", f.model, "Model id for the openai-compatible backend");
  cmd.add_option("--base-url", f.base_url, "Server for the openai-compatible backend");
  cmd.add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
  cmd.add_option("--parallelism", f.parallelism, "Concurrent backend calls")->check(CLI::PositiveNumber);
  cmd.add_option("--prompt-version", f.prompt_version, "Prompt template version");
  cmd.add_option("--prompt-file", f.prompt_file, "Custom prompt template (version taken from --prompt-version)");
  cmd.add_option("--max-attempts", f.max_attempts, "Attempts per post before giving up")->check(CLI::PositiveNumber);
}

std::unique_ptr<vr::ChatBackend> backend_from(const BackendFlags& f) {
  vr::OpenAICompatibleBackend::Config cfg;
  cfg.base_url = f.base_url;
  cfg.model = f.model;
  cfg.api_key_env = f.api_key_env;
  return vr::make_backend(f.backend, cfg);
}

vr::ClassifyOptions classify_options(const BackendFlags& f) {
  vr::ClassifyOptions opts;
  opts.max_attempts = f.max_attempts;
  if (!f.prompt_file.empty()) {
    opts.prompt = vr::PromptTemplate{f.prompt_version, vr::read_file(f.prompt_file)};
  } else if (f.prompt_version != vr::default_prompt_template().version) {
    throw CLI::ValidationError("--prompt-version", "unknown prompt version " + f.prompt_version +
                                                       " (use --prompt-file for custom templates)");
  }
  return opts;
}

void emit(const json& j, bool as_json, const std::string& text) {
  if (as_json) std::cout << j.dump(2) << '\n';
  else std::cout << text;
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
  std::string in, out, cache;
  bool strict = false;
};

int cmd_classify(const ClassifyArgs& a, const BackendFlags& f, bool as_json) {
  const auto opts = classify_options(f);
  std::ifstream in(a.in);
  if (!in) throw vr::Error(vr::Errc::Io, "cannot open input", a.in);
  vr::Inventory inv;
  try {
    inv = vr::ingest_jsonl(in);
  } catch (const vr::Error& e) {
    if (e.code() != vr::Errc::MalformedRecord) throw;
    throw vr::Error(vr::Errc::MalformedRecord, fmt::format("{}:{}", a.in, e.what()), a.in + ":" + e.detail());
  }
  auto backend = backend_from(f);
  vr::JsonlLabelStore cache(a.cache.empty() ? a.out + ".cache.jsonl" : a.cache);
  auto result = vr::classify_inventory(inv, *backend, cache, f.parallelism, opts);
  const auto flagged_ids = vr::fill_unlabeled(result);
  const std::set<std::string> flagged(flagged_ids.begin(), flagged_ids.end());

  std::ofstream out(a.out);
  if (!out) throw vr::Error(vr::Errc::Io, "cannot write output", a.out);
  for (const auto& p : inv.posts) {
    out << json(vr::LabelRecord{p.id, result.labels.at(p.id), flagged.count(p.id) > 0}).dump() << '\n';
  }
  if (!out) throw vr::Error(vr::Errc::Io, "write failed", a.out);

  json failures = json::array();
  for (const auto& fl : result.failures) {
    failures.push_back({{"post_id", fl.post_id}, {"message", fl.message}});
    std::cerr << "unlabeled: " << fl.post_id << ": " << fl.message << '\n';
  }
  emit(json{{"inventory_id", inv.id}, {"posts", inv.posts.size()}, {"failures", failures}}, as_json,
       fmt::format("labeled {} of {} posts into {}\n", inv.posts.size() - result.failures.size(), inv.posts.size(),
                   a.out));
  return a.strict && !result.failures.empty() ? kExitDomain : kExitOk;
}

struct RankArgs {
  std::string labels, posts, weights, out;
  std::optional<std::size_t> k;
};

int cmd_rank(const RankArgs& a) {
  const auto records = vr::read_label_records(a.labels);
  std::vector<vr::Post> posts;
  if (!a.posts.empty()) {
    posts = vr::read_jsonl_file<vr::Post>(a.posts);
  } else {
    for (const auto& r : records) posts.push_back(vr::Post{.id = r.post_id});
  }
  const auto inv = vr::ingest(std::move(posts));
  vr::RankOptions opts;
  for (const auto& r : records)
    if (r.flagged_unlabeled) opts.flagged.insert(r.post_id);
  const auto weights = vr::read_json_file(a.weights).get<vr::WeightVector>();
  auto feed = vr::rank(inv, vr::to_label_map(records), weights, opts);
  if (a.k) feed = vr::top_k(std::move(feed), *a.k);
  const auto text = json(feed).dump(2) + "\n";
  if (a.out.empty()) std::cout << text;
  else vr::write_file(a.out, text);
  return kExitOk;
}

struct ValidateArgs {
  std::string labels, annotations;
};

int cmd_validate(const ValidateArgs& a, bool as_json) {
  const auto records = vr::read_jsonl_file<vr::AnnotationRecord>(a.annotations);
  std::optional<vr::LabelMap> machine;
  if (!a.labels.empty()) machine = vr::to_label_map(vr::read_label_records(a.labels));
  const auto rep = vr::mae_report(records, machine ? &*machine : nullptr);
  emit(rep, as_json, vr::format_mae_table(rep));
  return kExitOk;
}

struct AnalyzeArgs {
  std::string feed, engagement, value, a, b, outcomes;
  std::optional<std::size_t> k;
  std::size_t correct = 0, total = 0;
  double p0 = 0.5;
  std::size_t iterations = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

std::vector<vr::ValueScores> feed_scores(const std::string& path, std::optional<std::size_t> k) {
  auto f = vr::read_feed_file(path);
  if (f.scores.empty() && !f.ids.empty()) {
    throw vr::Error(vr::Errc::InvalidArgument, "feed file has ids but no value scores", path);
  }
  if (k && f.scores.size() > *k) f.scores.resize(*k);
  return f.scores;
}

std::string strength_text(const vr::StrengthReport& r) {
  std::string out;
  for (const auto& d : vr::taxonomy())
    out += fmt::format("{:<26}{:>10.4f}\n", d.title, r.per_value[vr::index_of(d.id)]);
  for (auto q : vr::kQuadrants)
    out += fmt::format("{:<26}{:>10.4f}\n", vr::to_string(q), r.by_quadrant.at(q));
  return out;
}

std::vector<double> read_outcomes(const std::string& path) {
  const auto text = vr::read_file(path);
  const json doc = json::parse(text, nullptr, false);
  std::vector<double> out;
  if (!doc.is_discarded() && doc.is_array()) {
    for (const auto& x : doc) out.push_back(x.is_boolean() ? (x.get<bool>() ? 1.0 : 0.0) : x.get<double>());
    return out;
  }
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw vr::Error(vr::Errc::MalformedRecord, "outcome is not a number", path + ": " + tok);
    }
  }
  return out;
}

int cmd_analyze(const std::string& which, const AnalyzeArgs& a, bool as_json) {
  if (which == "strength") {
    const auto r = vr::summarize_strength(vr::value_strength(feed_scores(a.feed, a.k)));
    emit(r, as_json, strength_text(r));
  } else if (which == "delta") {
    const auto r = vr::strength_delta(feed_scores(a.engagement, a.k), feed_scores(a.value, a.k));
    emit(r, as_json, strength_text(r));
  } else if (which == "tau") {
    const auto fa = vr::read_feed_file(a.a), fb = vr::read_feed_file(a.b);
    const double tau = vr::kendall_tau(fa.ids, fb.ids);
    emit(json{{"tau", tau}, {"n", fa.ids.size()}}, as_json, fmt::format("{:.6f}\n", tau));
  } else if (which == "chisq") {
    const auto r = vr::chi_square_gof(a.correct, a.total, a.p0);
    emit(json{{"statistic", r.statistic}, {"p_value", r.p_value}}, as_json,
         fmt::format("chi2(1, N={}) = {:.2f}, p = {:.3g}\n", a.total, r.statistic, r.p_value));
  } else if (which == "bootstrap") {
    const auto xs = read_outcomes(a.outcomes);
    const auto [lower, upper] = vr::bootstrap_ci(std::span<const double>(xs), a.iterations, a.level, a.seed);
    const double estimate = vr::mean_of(xs);
    emit(json{{"estimate", estimate}, {"lower", lower}, {"upper", upper}, {"level", a.level}}, as_json,
         fmt::format("{:.4f} [{:.4f}, {:.4f}]\n", estimate, lower, upper));
  }
  return kExitOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  std::string token_env = "VALUERANK_TOKEN";
  std::size_t feed_k = 20;
};

int cmd_serve(const ServeArgs& a, const BackendFlags& f) {
  vr::ServiceConfig cfg;
  cfg.parallelism = f.parallelism;
  cfg.classify = classify_options(f);
  cfg.session.feed_k = a.feed_k;
  if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
  if (const char* tok = std::getenv(a.token_env.c_str())) cfg.bearer_token = tok;
  std::shared_ptr<vr::ChatBackend> backend = backend_from(f);
  vr::Service service(cfg, backend);
  httplib::Server server;
  vr::bind_http(server, service);
  spdlog::info("listening on {}:{}", a.host, a.port);
  if (!server.listen(a.host, a.port)) throw vr::Error(vr::Errc::Io, "cannot listen", fmt::format("{}:{}", a.host, a.port));
  return kExitOk;
}

int exit_code_for(const vr::Error& e) {
  switch (e.code()) {
    case vr::Errc::Io:
    case vr::Errc::MalformedRecord: return kExitUsage;
    default: return kExitDomain;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-aligned feed re-ranking"};
  app.require_subcommand(1);
  bool as_json = false;
  std::string log_level = "warn";
  std::uint64_t seed = 0;
  app.add_flag("--json", as_json, "Structured JSON output");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");
  app.add_option("--seed", seed, "Seed for randomized analyses");

  BackendFlags backend_flags;

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "Label posts with value scores");
  classify->add_option("--in", classify_args.in, "Posts JSONL")->required();
  classify->add_option("--out", classify_args.out, "Labels JSONL")->required();
  classify->add_option("--cache", classify_args.cache, "Label cache (default: <out>.cache.jsonl)");
  classify->add_flag("--strict", classify_args.strict, "Exit 1 when any post stays unlabeled");
  add_backend_flags(*classify, backend_flags);

  RankArgs rank_args;
  auto* rank = app.add_subcommand("rank", "Rank labeled posts by a weight vector");
  rank->add_option("--labels", rank_args.labels, "Labels JSONL in engagement order")->required();
  rank->add_option("--weights", rank_args.weights, "Weight vector JSON")->required();
  rank->add_option("--posts", rank_args.posts, "Posts JSONL (engagement order); defaults to the labels order");
  rank->add_option("-k,--top-k", rank_args.k, "Keep only the first k posts")->check(CLI::PositiveNumber);
  rank->add_option("--out", rank_args.out, "Write the ranked feed here instead of stdout");

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Consensus MAE against human annotations");
  validate->add_option("--annotations", validate_args.annotations, "Annotation JSONL")->required();
  validate->add_option("--labels", validate_args.labels, "Machine labels JSONL (overrides machine_label)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Feed and study statistics");
  analyze->require_subcommand(1);
  auto* strength = analyze->add_subcommand("strength", "Discounted value strength of a feed");
  strength->add_option("feed", an.feed, "Ranked feed JSON or labels JSONL")->required();
  strength->add_option("-k,--top-k", an.k)->check(CLI::PositiveNumber);
  auto* delta = analyze->add_subcommand("delta", "Value strength of a value feed minus its engagement feed");
  delta->add_option("engagement", an.engagement)->required();
  delta->add_option("value", an.value)->required();
  delta->add_option("-k,--top-k", an.k)->check(CLI::PositiveNumber);
  auto* tau = analyze->add_subcommand("tau", "Kendall tau between two orderings of the same posts");
  tau->add_option("a", an.a)->required();
  tau->add_option("b", an.b)->required();
  auto* chisq = analyze->add_subcommand("chisq", "Goodness of fit of a correct/total count against p0");
  chisq->add_option("correct", an.correct)->required();
  chisq->add_option("total", an.total)->required();
  chisq->add_option("--p0", an.p0);
  auto* boot = analyze->add_subcommand("bootstrap", "Percentile bootstrap CI of a mean");
  boot->add_option("outcomes", an.outcomes, "Numbers, whitespace separated or a JSON array")->required();
  boot->add_option("--iterations", an.iterations)->check(CLI::PositiveNumber);
  boot->add_option("--level", an.level)->check(CLI::Range(0.0, 1.0));

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--host", serve_args.host);
  serve->add_option("--port", serve_args.port);
  serve->add_option("--data-dir", serve_args.data_dir, "Persist inventories, labels and sessions here");
  serve->add_option("--token-env", serve_args.token_env, "Environment variable holding the bearer token");
  serve->add_option("--feed-k", serve_args.feed_k)->check(CLI::PositiveNumber);
  add_backend_flags(*serve, backend_flags);

  auto* taxonomy = app.add_subcommand("taxonomy", "Print the 19 values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("valuerank"));
  spdlog::set_level(spdlog::level::from_str(log_level));
  an.seed = seed;

  try {
    if (*classify) return cmd_classify(classify_args, backend_flags, as_json);
    if (*rank) return cmd_rank(rank_args);
    if (*validate) return cmd_validate(validate_args, as_json);
    if (*analyze) {
      for (const auto* sub : analyze->get_subcommands()) return cmd_analyze(sub->get_name(), an, as_json);
    }
    if (*serve) return cmd_serve(serve_args, backend_flags);
    if (*taxonomy) {
      const json t = vr::taxonomy_json();
      std::string text;
      for (const auto& d : vr::taxonomy()) text += fmt::format("{:<22} {}\n", d.title, d.definition);
      emit(t, as_json, text);
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const vr::Error& e) {
    std::cerr << "error: " << vr::to_string(e.code()) << ": " << e.what();
    if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
    std::cerr << '\n';
    return exit_code_for(e);
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
