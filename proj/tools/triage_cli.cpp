// triage: command-line entry point for ingest, train, evaluate, predict and serve.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "triage/classifier.hpp"
#include "triage/corpus.hpp"
#include "triage/error.hpp"
#include "triage/evaluation.hpp"
#include "triage/ingest.hpp"
#include "triage/pipeline.hpp"
#include "triage/service/server.hpp"
#include "triage/service/webhook.hpp"
#include "triage/triage.hpp"

namespace {

using namespace triage;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct IngestArgs {
  std::string languages;
  std::size_t repos_per_language = 200;
  std::string out;
  std::string api_base = "https://api.github.com";
  std::string label_map;
  std::size_t sample = 0;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string task = "labels";
  std::string backend = "transformer";
  std::string data;
  std::string out;
  std::string test_out;
  std::size_t epochs = 5;
  double lr = 0.0;  // 0 = backend default
  std::size_t batch = 8;
  std::size_t max_seq_len = 128;
  double split = 0.8;
  std::uint64_t seed = 0;
  std::size_t min_frequency = 2;
  std::size_t max_vocab = 30000;
  std::size_t min_assigned = 50;
  int window_days = 365;
  std::size_t layers = 2, hidden = 64, heads = 4, ff = 256;
  double dropout = 0.1;
  std::uint64_t buckets = LinearConfig{}.buckets;
};

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string format = "text";
  double threshold = 0.5;
  double min_confidence = 0.0;
};

struct PredictArgs {
  std::string model;
  std::string assign_model;
  std::string task;
  std::string title;
  std::string body;
  double threshold = 0.5;
  double min_confidence = 0.0;
};

struct ServeArgs {
  std::string model;
  std::string assign_model;
  std::string policy;
  std::string host = "0.0.0.0";
  int port = 8080;
  bool dry_run = false;
  double threshold = 0.5;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

Task task_flag(const std::string& s) {
  if (s == "labels") return Task::kMultilabel;
  if (s == "assign") return Task::kMulticlass;
  throw ConfigError("unknown task '" + s + "' (expected labels or assign)");
}

int run_ingest(const IngestArgs& a) {
  const auto languages = split_list(a.languages);
  if (languages.empty()) throw ConfigError("--languages must name at least one language");
  LabelAliasMap aliases = LabelAliasMap::defaults();
  if (!a.label_map.empty()) {
    std::ifstream in(a.label_map);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (!in || j.is_discarded()) throw ConfigError("cannot read label map " + a.label_map);
    aliases = LabelAliasMap::from_json(j);
  }
  const char* token = std::getenv("TRIAGE_GH_TOKEN");
  auto transport = std::make_shared<HttplibTransport>(ApiBase::parse(a.api_base).origin);
  TrackerClient api(transport, a.api_base, token ? token : "");
  std::vector<IssueRecord> all;
  std::set<std::uint64_t> seen;
  std::size_t prs = 0, malformed = 0;
  for (const auto& lang : languages) {
    const auto repos = search_top_repos(lang, a.repos_per_language, api);
    spdlog::info("{}: {} repositories", canonical_language(lang), repos.size());
    for (const auto& repo : repos) {
      try {
        auto r = fetch_issues(repo.full_name, api, canonical_language(lang), aliases);
        prs += r.pull_requests;
        malformed += r.malformed;
        for (auto& rec : r.records)
          if (seen.insert(rec.id).second) all.push_back(std::move(rec));
        spdlog::info("  {}: {} issues", repo.full_name, r.records.size());
      } catch (const NotFoundError& e) {
        spdlog::warn("  {}: skipped ({})", repo.full_name, e.what());
      }
    }
  }
  if (a.sample > 0 && a.sample < all.size()) all = sample_dataset(std::move(all), a.sample, a.seed);
  std::sort(all.begin(), all.end(), [](const IssueRecord& x, const IssueRecord& y) { return x.id < y.id; });
  write_dataset(a.out, all);
  std::cout << "wrote " << all.size() << " issues to " << a.out << " (dropped " << prs << " pull requests, "
            << malformed << " malformed items)\n";
  return kExitOk;
}

int run_train(const TrainArgs& a) {
  const Backend backend = backend_from_string(a.backend);
  const Task task = task_flag(a.task);
  TrainConfig cfg = TrainConfig::defaults_for(backend);
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.max_seq_len = a.max_seq_len;
  cfg.seed = a.seed;
  if (a.lr > 0.0) cfg.learning_rate = a.lr;
  cfg.validate();
  ModelOptions opt;
  opt.encoder.layers = a.layers;
  opt.encoder.hidden_dim = a.hidden;
  opt.encoder.heads = a.heads;
  opt.encoder.ff_dim = a.ff;
  opt.encoder.dropout = a.dropout;
  opt.linear.buckets = a.buckets;
  opt.encoder.validate();
  opt.linear.validate();

  const auto records = read_dataset(a.data);
  TaskConfig task_cfg = TaskConfig::labelling();
  std::vector<IssueRecord> usable;
  if (task == Task::kMultilabel) {
    usable = labelled_only(records);
  } else {
    auto cand = filter_candidates(records, a.min_assigned, trailing_window(records, a.window_days));
    task_cfg = TaskConfig::assignment(cand.roster);
    usable = std::move(cand.records);
  }
  std::vector<IssueRecord> train_set = usable;
  if (a.split < 1.0) {
    auto split = split_dataset(usable, a.split, a.seed);
    train_set = std::move(split.train);
    if (!a.test_out.empty()) write_dataset(a.test_out, split.test);
    std::cout << "split: " << train_set.size() << " train / " << split.test.size() << " test\n";
  }
  const auto result = fit(backend, task_cfg, train_set, cfg, opt, VocabOptions{a.min_frequency, a.max_vocab},
                          [](std::size_t epoch, double loss) {
                            char line[64];
                            std::snprintf(line, sizeof line, "epoch %zu loss %.6f", epoch, loss);
                            std::cout << line << std::endl;
                          });
  save_model(result.model, a.out);
  std::cout << "saved " << to_string(backend) << " " << to_string(task_cfg.task) << " model ("
            << result.model.parameter_count() << " parameters) to " << a.out << "\n";
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& a) {
  if (a.format != "text" && a.format != "json") throw ConfigError("--format must be text or json");
  const auto model = load_model(a.model);
  auto records = read_dataset(a.data);
  TriagePolicy policy;
  policy.label_threshold = a.threshold;
  policy.assign_min_confidence = a.min_confidence;
  if (model.task.task == Task::kMulticlass) {
    policy.assign_enabled = true;
    policy.roster = model.task.label_names;
    std::erase_if(records, [](const IssueRecord& r) { return !r.assignee; });
  }
  policy.validate();
  const auto report = evaluate_model(model, records, policy);
  std::cout << render_report(report, a.format == "json" ? ReportFormat::kJson : ReportFormat::kText);
  if (a.format == "json") std::cout << '\n';
  return kExitOk;
}

int run_predict(const PredictArgs& a) {
  auto labels = load_model(a.model);
  if (!a.task.empty() && labels.task.task != task_flag(a.task))
    throw MismatchError("task mismatch: model was trained for '" + to_string(labels.task.task) + "', not '" + a.task + "'");
  std::optional<ModelBundle> assign;
  if (!a.assign_model.empty()) assign = load_model(a.assign_model);
  TriagePolicy policy;
  policy.label_threshold = a.threshold;
  policy.assign_min_confidence = a.min_confidence;
  if (assign) {
    policy.assign_enabled = true;
    policy.roster = assign->task.label_names;
  }
  policy.validate();
  const TriageModels models(std::move(labels), std::move(assign));
  const auto decision = triage_issue(a.title, a.body, models, policy);
  std::cout << decision.to_json().dump(2) << '\n';
  return kExitOk;
}

WebhookServer* g_server = nullptr;

int run_serve(const ServeArgs& a) {
  auto cfg = ServiceConfig::from_env();
  if (a.dry_run) cfg.dry_run = true;
  cfg.validate();
  TriagePolicy policy;
  if (!a.policy.empty()) policy = TriagePolicy::load(a.policy);
  else policy.label_threshold = a.threshold;
  std::optional<ModelBundle> assign;
  if (!a.assign_model.empty()) {
    assign = load_model(a.assign_model);
    if (policy.roster.empty()) {
      policy.assign_enabled = true;
      policy.roster = assign->task.label_names;
    }
  }
  policy.validate();
  auto models = std::make_shared<const TriageModels>(load_model(a.model), std::move(assign));
  std::shared_ptr<TrackerClient> api;
  if (!cfg.dry_run) {
    if (cfg.auth_token.empty()) throw ConfigError("TRIAGE_GH_TOKEN must be set unless running with --dry-run");
    auto transport = std::make_shared<HttplibTransport>(ApiBase::parse(cfg.api_base_url).origin);
    api = std::make_shared<TrackerClient>(transport, cfg.api_base_url, cfg.auth_token);
  }
  auto service = std::make_shared<WebhookService>(models, policy, cfg, api);
  WebhookServer server(service);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  spdlog::info("serving label model {}{}", models->label_id(), cfg.dry_run ? " (dry run)" : "");
  if (!server.listen(a.host, a.port)) throw Error("cannot listen on " + a.host + ":" + std::to_string(a.port));
  g_server = nullptr;
  const auto s = service->stats();
  spdlog::info("stopped: {} received, {} processed, {} duplicates, {} rejected, {} failed", s.received, s.processed,
               s.duplicates, s.rejected, s.failed);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("triage");
  spdlog::set_default_logger(logger);

  CLI::App app{"Issue triage: label and assign GitHub issues with text classifiers"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Mine issues of the most-starred repositories per language");
  ingest->add_option("--languages", ia.languages, "Comma-separated languages, e.g. py,rs")->required();
  ingest->add_option("--repos-per-language", ia.repos_per_language, "Repositories per language")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ingest->add_option("--out", ia.out, "Output JSONL dataset")->required();
  ingest->add_option("--api-base", ia.api_base, "REST API base URL")->capture_default_str();
  ingest->add_option("--label-map", ia.label_map, "JSON map of category to label aliases")->check(CLI::ExistingFile);
  ingest->add_option("--sample", ia.sample, "Keep a uniform sample of this many issues (0 = all)");
  ingest->add_option("--seed", ia.seed, "Sampling seed")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a labelling or assignment model");
  train_cmd->add_option("--task", ta.task, "labels or assign")->capture_default_str()->check(
      CLI::IsMember({"labels", "assign"}));
  train_cmd->add_option("--backend", ta.backend, "linear or transformer")->capture_default_str()->check(
      CLI::IsMember({"linear", "transformer"}));
  train_cmd->add_option("--data", ta.data, "Training dataset (JSONL)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", ta.out, "Model file to write")->required();
  train_cmd->add_option("--test-out", ta.test_out, "Write the held-out split here");
  train_cmd->add_option("--epochs", ta.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", ta.lr, "Learning rate (default 0.1 linear, 4e-5 transformer)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", ta.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-seq-len", ta.max_seq_len)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--split", ta.split, "Training fraction; 1 trains on everything")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--seed", ta.seed)->capture_default_str();
  train_cmd->add_option("--min-frequency", ta.min_frequency, "Vocabulary frequency cutoff")->capture_default_str();
  train_cmd->add_option("--max-vocab", ta.max_vocab)->capture_default_str();
  train_cmd->add_option("--min-assigned", ta.min_assigned, "Roster cutoff for --task assign")->capture_default_str();
  train_cmd->add_option("--window-days", ta.window_days, "Roster window for --task assign")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--layers", ta.layers)->capture_default_str();
  train_cmd->add_option("--hidden", ta.hidden)->capture_default_str();
  train_cmd->add_option("--heads", ta.heads)->capture_default_str();
  train_cmd->add_option("--ff", ta.ff)->capture_default_str();
  train_cmd->add_option("--dropout", ta.dropout)->capture_default_str();
  train_cmd->add_option("--buckets", ta.buckets, "Hashed n-gram buckets (linear)")->capture_default_str();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on a labelled dataset");
  evaluate->add_option("--model", ea.model)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", ea.data)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--format", ea.format, "text or json")->capture_default_str()->check(
      CLI::IsMember({"text", "json"}));
  evaluate->add_option("--threshold", ea.threshold, "Label threshold")->capture_default_str();
  evaluate->add_option("--min-confidence", ea.min_confidence, "Assignment abstention cutoff")->capture_default_str();

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Triage a single issue");
  predict->add_option("--model", pa.model, "Label model")->required()->check(CLI::ExistingFile);
  predict->add_option("--assign-model", pa.assign_model, "Assignment model")->check(CLI::ExistingFile);
  predict->add_option("--task", pa.task, "Expected task of --model")->check(CLI::IsMember({"labels", "assign"}));
  predict->add_option("--title", pa.title)->required();
  predict->add_option("--body", pa.body);
  predict->add_option("--threshold", pa.threshold)->capture_default_str();
  predict->add_option("--min-confidence", pa.min_confidence)->capture_default_str();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the webhook service");
  serve->add_option("--model", sa.model, "Label model")->required()->check(CLI::ExistingFile);
  serve->add_option("--assign-model", sa.assign_model, "Assignment model")->check(CLI::ExistingFile);
  serve->add_option("--policy", sa.policy, "Policy JSON file")->check(CLI::ExistingFile);
  serve->add_option("--host", sa.host)->capture_default_str();
  serve->add_option("--port", sa.port)->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--threshold", sa.threshold)->capture_default_str();
  serve->add_flag("--dry-run", sa.dry_run, "Decide without writing to the tracker");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*ingest) return run_ingest(ia);
    if (*train_cmd) return run_train(ta);
    if (*evaluate) return run_evaluate(ea);
    if (*predict) return run_predict(pa);
    if (*serve) return run_serve(sa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
