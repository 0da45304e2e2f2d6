#include "provbind/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

#include "provbind/error.hpp"

namespace provbind::pipeline {

namespace fs = std::filesystem;

namespace {

void require(const fs::path& path, const std::string& artifact) {
  if (!fs::exists(path)) throw MissingArtifactError(artifact, path.string());
}

fs::path with_suffix(const fs::path& prefix, const char* suffix) { return fs::path(prefix.string() + suffix); }

LoadedVocab load_vocab(const PipelineConfig& c) {
  const auto prefix = c.paths.vocab_prefix();
  require(with_suffix(prefix, ".json"), "vocab");
  require(with_suffix(prefix, ".bin"), "vocab");
  return read_vocab(prefix);
}

EncoderParams load_encoder(const PipelineConfig& c) {
  const auto prefix = c.paths.encoder_prefix();
  require(with_suffix(prefix, ".json"), "encoder");
  require(with_suffix(prefix, ".bin"), "encoder");
  return read_encoder(prefix);
}

BenignKnowledgeBase load_kb(const PipelineConfig& c) {
  const auto dir = c.paths.kb_dir();
  require(dir / "profiles.json", "knowledge-base");
  return read_knowledge_base(dir);
}

}  // namespace

IngestSummary ingest(const PipelineConfig& c, const fs::path& events, const std::string& name) {
  require(events, "events");
  const OperationVocab ops(c.features.operations);
  const auto parsed = parse_events_file(events, ops);
  if (parsed.skipped > 0) spdlog::warn("{}: skipped {} malformed line(s)", events.string(), parsed.skipped);
  const auto graph = build_graph(parsed.events, c.features.window_ns, name);
  write_graph(graph, c.paths.graph_prefix(name));
  spdlog::info("graph {}: {} nodes, {} edges from {} events", name, graph.nodes().size(), graph.edges().size(),
               parsed.events.size());
  return {parsed.events.size(), parsed.skipped, graph.nodes().size(), graph.edges().size()};
}

std::vector<ProvenanceGraph> load_graphs(const PipelineConfig& c, const std::vector<std::string>& names) {
  std::vector<ProvenanceGraph> graphs;
  for (const auto& name : names) {
    const auto prefix = c.paths.graph_prefix(name);
    for (const char* suffix : {".graph.json", ".nodes.jsonl", ".edges.jsonl"}) require(with_suffix(prefix, suffix), "graph");
    graphs.push_back(read_graph(prefix));
  }
  return graphs;
}

TrainResult train(const PipelineConfig& c) {
  const auto graphs = load_graphs(c, c.paths.train_graphs);
  const auto corpus = build_corpus(graphs);
  const OperationVocab ops(c.features.operations);
  const auto vocab = train_semantic_vocab(corpus, c.features.word2vec);

  std::vector<TrainingGraph> training;
  for (const auto& g : graphs) training.push_back({&g, graph_features(g, vocab, ops)});
  auto result = train_encoder(training, c.encoder);

  fs::create_directories(c.paths.artifacts);
  write_vocab(vocab, ops, c.paths.vocab_prefix());
  write_encoder(result.params, c.paths.encoder_prefix());
  write_loss_trace(result.loss_trace, c.paths.loss_trace());
  spdlog::info("encoder trained: {} epochs, loss {:.6f} -> {:.6f}", result.loss_trace.size(), result.initial_loss,
               result.loss_trace.empty() ? result.initial_loss : result.loss_trace.back());
  return result;
}

BenignKnowledgeBase profile(const PipelineConfig& c) {
  const auto params = load_encoder(c);
  const auto loaded = load_vocab(c);
  const auto graphs = load_graphs(c, c.paths.train_graphs);
  auto kb = build_knowledge_base(graphs, params, loaded.vocab, loaded.ops, c.epsilon);
  write_knowledge_base(kb, c.paths.kb_dir());
  export_embeddings(kb, c.paths.kb_dir() / "embeddings.csv");
  spdlog::info("knowledge base: {} identities, {} members", kb.profiles().size(), kb.members().size());
  return kb;
}

std::vector<Alert> detect(const PipelineConfig& c) {
  const auto params = load_encoder(c);
  const auto loaded = load_vocab(c);
  const auto kb = load_kb(c);
  std::vector<Alert> alerts;
  for (const auto& g : load_graphs(c, c.paths.detect_graphs)) {
    auto found = detect_graph(g, params, loaded.vocab, loaded.ops, kb);
    alerts.insert(alerts.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
  }
  std::stable_sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.graph_name, a.node_uuid) < std::tie(b.graph_name, b.node_uuid);
  });
  fs::create_directories(c.paths.artifacts);
  write_alerts(alerts, c.paths.alerts());
  spdlog::info("{} alert(s) written to {}", alerts.size(), c.paths.alerts().string());
  return alerts;
}

std::unique_ptr<LlmBackend> make_backend(const PipelineConfig& c) {
  if (c.llm.backend == LlmBackendKind::http) return std::make_unique<HttpBackend>(c.llm.http);
  if (c.llm.script.empty()) return std::make_unique<OfflineBackend>();
  require(c.llm.script, "llm-script");
  return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(c.llm.script));
}

InvestigationRepository investigate(const PipelineConfig& c, LlmBackend& backend, bool resume) {
  require(c.paths.alerts(), "alerts");
  const auto alerts = read_alerts(c.paths.alerts());
  const auto params = load_encoder(c);
  const auto loaded = load_vocab(c);
  const auto kb = load_kb(c);

  GraphStore store;
  for (auto& g : load_graphs(c, c.paths.detect_graphs)) {
    auto z = embed_graph(g, loaded.vocab, loaded.ops, params);
    store.add(std::move(g), std::move(z));
  }

  InvestigationRepository repo;
  if (resume) {
    require(c.paths.repository(), "investigation");
    repo = InvestigationRepository::load(c.paths.repository());
  }
  const auto prompts = c.llm.prompts.empty() ? PromptSet::defaults() : PromptSet::load(c.llm.prompts);
  LlmClient client(backend, prompts, c.budget.max_llm_calls, c.budget.max_attempts);
  InvestigationContext ctx{store, kb, client, c.budget, c.similar_k, c.similar_k};

  const auto persist = [&] {
    fs::create_directories(c.paths.artifacts);
    repo.save(c.paths.repository());
    repo.write_journal(c.paths.journal());
  };
  try {
    run_investigation(alerts, ctx, repo);
  } catch (const LlmTransportError&) {
    persist();
    throw;
  }
  persist();
  spdlog::info("investigation {}: {} validated IOC(s), {} LLM call(s)", to_string(repo.status),
               repo.validated().size(), repo.llm_calls);
  return repo;
}

InvestigationReport report(const PipelineConfig& c) {
  require(c.paths.repository(), "investigation");
  const auto repo = InvestigationRepository::load(c.paths.repository());
  auto out = reporter_compose(repo);
  const auto dir = c.paths.reports_dir();
  write_report(out, dir / "report.md", dir / "attack_graph.dot");
  return out;
}

}  // namespace provbind::pipeline
