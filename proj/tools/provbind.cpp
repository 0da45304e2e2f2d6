#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "provbind/config.hpp"
#include "provbind/error.hpp"
#include "provbind/pipeline.hpp"
#include "provbind/synth.hpp"

namespace fs = std::filesystem;
using namespace provbind;

namespace {

enum Exit : int { kOk = 0, kRuntime = 1, kMissing = 2, kConfig = 3 };

// Flag values; unset optionals leave the config file / defaults alone.
struct Overrides {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<std::string> llm;
  std::optional<std::string> artifacts, kb, reports, script, prompts, endpoint, model;
  std::optional<std::size_t> max_iterations, max_leads, max_hypotheses, max_llm_calls, max_alerts, max_attempts;
  std::vector<std::string> train_graphs, detect_graphs;
  bool verbose = false;
  bool quiet = false;
};

PipelineConfig resolve(const Overrides& o) {
  // env > flag > file > default
  PipelineConfig c;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw ConfigError("config file not found: " + o.config.string());
    c = load_config(o.config);
  }
  if (o.seed) c.apply_seed(*o.seed);
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.llm) c.llm.backend = parse_llm_backend(*o.llm);
  if (o.artifacts) c.paths.artifacts = *o.artifacts;
  if (o.kb) c.paths.kb = *o.kb;
  if (o.reports) c.paths.reports = *o.reports;
  if (o.script) c.llm.script = *o.script;
  if (o.prompts) c.llm.prompts = *o.prompts;
  if (o.endpoint) c.llm.http.endpoint = *o.endpoint;
  if (o.model) c.llm.http.model = *o.model;
  if (!o.train_graphs.empty()) c.paths.train_graphs = o.train_graphs;
  if (!o.detect_graphs.empty()) c.paths.detect_graphs = o.detect_graphs;
  if (o.max_iterations) c.budget.max_iterations = *o.max_iterations;
  if (o.max_leads) c.budget.max_leads_per_ioc = *o.max_leads;
  if (o.max_hypotheses) c.budget.max_hypotheses = *o.max_hypotheses;
  if (o.max_llm_calls) c.budget.max_llm_calls = *o.max_llm_calls;
  if (o.max_alerts) c.budget.max_alerts = *o.max_alerts;
  if (o.max_attempts) c.budget.max_attempts = *o.max_attempts;
  apply_env_overrides(c);
  c.validate();
  return c;
}

// One line on stderr, key=value so scripts can parse it.
int fail(int code, std::string_view kind, std::string_view detail, std::string_view extra = {}) {
  std::string msg(detail);
  for (auto& ch : msg)
    if (ch == '\n') ch = ' ';
  std::cerr << fmt::format("provbind: error code={} kind={}{}{} message=\"{}\"\n", code, kind, extra.empty() ? "" : " ",
                           extra, msg);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity-behaviour provenance detection and investigation"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "YAML configuration file");
  app.add_option("--seed", o.seed, "Seed for every stochastic step");
  app.add_option("--epsilon", o.epsilon, "Fraction of benign members allowed outside a profile radius");
  app.add_option("--llm", o.llm, "LLM backend")->check(CLI::IsMember({"http", "mock"}));
  app.add_option("--artifacts", o.artifacts, "Artifact directory");
  app.add_option("--kb", o.kb, "Knowledge-base directory (default <artifacts>/kb)");
  app.add_option("--reports", o.reports, "Report directory (default <artifacts>/reports)");
  app.add_option("--train-graphs", o.train_graphs, "Benign graph names used by train and profile");
  app.add_option("--detect-graphs", o.detect_graphs, "Graph names scanned by detect and investigate");
  app.add_option("--llm-script", o.script, "Scripted responses for --llm mock");
  app.add_option("--llm-prompts", o.prompts, "Directory of <role>.txt prompt overrides");
  app.add_option("--llm-endpoint", o.endpoint, "Chat-completions URL for --llm http");
  app.add_option("--llm-model", o.model, "Model name for --llm http");
  app.add_option("--budget-max-iterations", o.max_iterations);
  app.add_option("--budget-max-leads", o.max_leads, "Leads per IOC");
  app.add_option("--budget-max-hypotheses", o.max_hypotheses);
  app.add_option("--budget-max-llm-calls", o.max_llm_calls);
  app.add_option("--budget-max-alerts", o.max_alerts);
  app.add_option("--budget-max-attempts", o.max_attempts, "Attempts per LLM request, repairs included");
  app.add_flag("-v,--verbose", o.verbose);
  app.add_flag("-q,--quiet", o.quiet);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario (benign.jsonl, attack.jsonl, labels.json)");
  fs::path scenario_path, synth_out = "scenario";
  synth->add_option("scenario", scenario_path, "Scenario spec (JSON)")->required();
  synth->add_option("-o,--out", synth_out, "Output directory")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Parse an event file into a provenance graph");
  fs::path events_path;
  std::string graph_name;
  std::optional<std::int64_t> window_ns;
  ingest->add_option("events", events_path, "JSONL event file")->required();
  ingest->add_option("--name", graph_name, "Graph name (default: file stem)");
  ingest->add_option("--window-ns", window_ns, "Edge aggregation window");

  auto* train = app.add_subcommand("train", "Train the token vocabulary and the graph encoder");
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  train->add_option("--epochs", epochs);
  train->add_option("--lr", lr, "Encoder learning rate");

  auto* profile = app.add_subcommand("profile", "Build identity profiles and the benign knowledge base");
  auto* detect = app.add_subcommand("detect", "Score graphs against the identity profiles");
  std::size_t show = 20;
  detect->add_option("--show", show, "Alerts printed to stdout")->capture_default_str();

  auto* investigate = app.add_subcommand("investigate", "Run the multi-agent investigation over the alerts");
  bool resume = false;
  investigate->add_flag("--resume", resume, "Continue a paused investigation");

  auto* report = app.add_subcommand("report", "Render the investigation report and attack graph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  spdlog::set_level(o.quiet ? spdlog::level::warn : o.verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("%^[%l]%$ %v");

  try {
    if (synth->parsed()) {
      auto spec = load_scenario(scenario_path);
      if (o.seed) spec.seed = *o.seed;
      if (const char* env = std::getenv("PROVBIND_SEED")) spec.seed = std::stoull(env);
      const auto sc = generate_scenario(spec);
      write_scenario(sc, synth_out);
      fmt::print("{} benign events, {} attack events, {} labelled nodes, {} anomalies -> {}\n", sc.benign.size(),
                 sc.attack.size(), sc.labels["nodes"].size(), sc.labels["anomalies"].size(), synth_out.string());
      return kOk;
    }

    auto config = resolve(o);
    if (train->parsed()) {
      if (epochs) config.encoder.epochs = *epochs;
      if (lr) config.encoder.learning_rate = *lr;
      config.validate();
    }
    if (ingest->parsed()) {
      if (window_ns) config.features.window_ns = *window_ns;
      config.validate();
      if (graph_name.empty()) graph_name = events_path.stem().string();
      const auto s = pipeline::ingest(config, events_path, graph_name);
      fmt::print("{}: {} events ({} skipped), {} nodes, {} edges\n", graph_name, s.events, s.skipped, s.nodes, s.edges);
    } else if (train->parsed()) {
      const auto r = pipeline::train(config);
      fmt::print("trained {} epoch(s); final loss {:.6f}\n", r.loss_trace.size(),
                 r.loss_trace.empty() ? r.initial_loss : r.loss_trace.back());
    } else if (profile->parsed()) {
      const auto kb = pipeline::profile(config);
      fmt::print("{} identity profiles over {} nodes\n", kb.profiles().size(), kb.members().size());
    } else if (detect->parsed()) {
      const auto alerts = pipeline::detect(config);
      print_alert_table(alerts, std::cout, show);
    } else if (investigate->parsed()) {
      auto backend = pipeline::make_backend(config);
      const auto repo = pipeline::investigate(config, *backend, resume);
      fmt::print("{}: {} validated IOC(s), {} LLM call(s){}\n", to_string(repo.status), repo.validated().size(),
                 repo.llm_calls, repo.budget_exhausted ? " (budget exhausted)" : "");
    } else if (report->parsed()) {
      const auto r = pipeline::report(config);
      fmt::print("report: {} ({} nodes, {} edges in attack graph)\n", (config.paths.reports_dir() / "report.md").string(),
                 r.graph_nodes, r.graph_edges);
    }
    return kOk;
  } catch (const MissingArtifactError& e) {
    return fail(kMissing, "missing_artifact", e.what(), fmt::format("artifact={} path={}", e.artifact(), e.path()));
  } catch (const ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const LlmTransportError& e) {
    return fail(kRuntime, "llm_transport", e.what(), "state=paused");
  } catch (const std::exception& e) {
    return fail(kRuntime, "runtime", e.what());
  }
}
