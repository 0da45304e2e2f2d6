#include "provbind/investigation.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "provbind/report.hpp"

namespace provbind {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Graph store

void GraphStore::add(ProvenanceGraph graph, std::map<std::string, Vec> embeddings) {
  auto name = graph.name();
  slots_.insert_or_assign(std::move(name), Slot{std::move(graph), std::move(embeddings)});
}

const ProvenanceGraph* GraphStore::graph(std::string_view name) const {
  const auto it = slots_.find(name);
  return it == slots_.end() ? nullptr : &it->second.graph;
}

const Entity* GraphStore::node(std::string_view graph_name, std::string_view uuid) const {
  const auto* g = graph(graph_name);
  return g ? g->find(uuid) : nullptr;
}

const Vec* GraphStore::embedding(std::string_view graph_name, std::string_view uuid) const {
  const auto it = slots_.find(graph_name);
  if (it == slots_.end()) return nullptr;
  const auto e = it->second.embeddings.find(std::string(uuid));
  return e == it->second.embeddings.end() ? nullptr : &e->second;
}

std::vector<std::string> GraphStore::graph_names() const {
  std::vector<std::string> out;
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

void InvestigationBudget::validate() const {
  if (max_iterations == 0 || max_leads_per_ioc == 0 || max_hypotheses == 0 || max_llm_calls == 0 ||
      max_alerts == 0 || max_attempts == 0)
    throw ConfigError("investigation budget values must all be positive");
}

// ---------------------------------------------------------------------------
// Context assembly

std::vector<std::size_t> capped_incident_edges(const ProvenanceGraph& graph, std::string_view uuid, std::size_t cap) {
  const auto incident = graph.incident_edges(uuid);
  std::vector<std::size_t> idx(incident.begin(), incident.end());
  const auto& edges = graph.edges();
  std::stable_sort(idx.begin(), idx.end(), [&edges](std::size_t a, std::size_t b) {
    return std::tie(edges[b].weight, edges[b].last_ts, b) < std::tie(edges[a].weight, edges[a].last_ts, a);
  });
  if (idx.size() > cap) idx.resize(cap);
  std::sort(idx.begin(), idx.end(), [&edges](std::size_t a, std::size_t b) {
    return std::tie(edges[a].first_ts, a) < std::tie(edges[b].first_ts, b);
  });
  return idx;
}

namespace {

std::string edge_digest(const ProvenanceGraph& graph, std::string_view uuid, const ProvEdge& e) {
  const bool outgoing = e.src == uuid;
  const auto* peer = graph.find(outgoing ? e.dst : e.src);
  return fmt::format("{} {} {} x{} @{}", outgoing ? "out" : "in", e.operation,
                     peer ? peer->identity.text() : std::string("?"), e.weight, e.first_ts);
}

json attrs_json(const AttrMap& attrs) {
  json j = json::object();
  for (const auto& [k, v] : attrs) j[k] = v;
  return j;
}

json benign_entry(const BenignKnowledgeBase& kb, const std::string& uuid, const std::string& identity,
                  std::optional<double> distance, std::size_t cap) {
  json j{{"node_uuid", uuid}, {"identity", identity}};
  if (distance) j["distance"] = *distance;
  json edges = json::array();
  if (const auto* md = kb.find_metadata(uuid)) {
    const auto& s = md->edge_summaries;
    const auto start = s.size() > cap ? s.size() - cap : 0;
    for (std::size_t i = start; i < s.size(); ++i) edges.push_back(s[i]);
    j["attrs"] = attrs_json(md->attrs);
  }
  j["edges"] = edges;
  return j;
}

EvidenceEdge to_evidence(const ProvEdge& e) {
  return EvidenceEdge{e.src, e.dst, e.operation, e.weight, e.first_ts, e.last_ts};
}

}  // namespace

json analyst_payload(const Lead& lead, const InvestigationContext& ctx) {
  const auto* graph = ctx.graphs.graph(lead.graph_name);
  const auto* node = graph ? graph->find(lead.node_uuid) : nullptr;
  if (!node) throw ConfigError(fmt::format("lead node {} not found in graph {}", lead.node_uuid, lead.graph_name));
  const auto cap = ctx.budget.max_leads_per_ioc;

  json edges = json::array();
  for (const auto i : capped_incident_edges(*graph, node->uuid, cap))
    edges.push_back(edge_digest(*graph, node->uuid, graph->edges()[i]));
  json payload;
  payload["task"] = "validate";
  payload["reason"] = lead.reason;
  payload["target"] = {{"graph_name", lead.graph_name},
                       {"node_uuid", node->uuid},
                       {"identity", node->identity.text()},
                       {"kind", std::string(to_string(node->kind))},
                       {"attrs", attrs_json(node->attrs)},
                       {"edges", edges}};

  json similar = json::array();
  if (const auto* z = ctx.graphs.embedding(lead.graph_name, node->uuid); z && ctx.similar_k > 0) {
    for (const auto& nb : knn_query(ctx.kb, *z, ctx.similar_k))
      similar.push_back(benign_entry(ctx.kb, nb.uuid, nb.label.text(), nb.distance, cap));
  }
  payload["similar_nodes"] = similar;

  json peers = json::array();
  const auto ids = attribute_query(ctx.kb, node->identity.text());
  for (std::size_t i = 0; i < ids.size() && i < ctx.peer_k; ++i) {
    const auto* md = ctx.kb.find_metadata(ids[i]);
    std::string identity;
    for (const auto& m : ctx.kb.members())
      if (m.uuid == ids[i]) {
        identity = m.label.text();
        break;
      }
    (void)md;
    peers.push_back(benign_entry(ctx.kb, ids[i], identity, std::nullopt, cap));
  }
  payload["same_identity_peers"] = peers;
  return payload;
}

AgentVerdict analyst_validate(const Lead& lead, const InvestigationContext& ctx) {
  const auto payload = analyst_payload(lead, ctx);
  AgentVerdict v;
  try {
    const auto r = ctx.llm.invoke(AgentRole::analyst, payload);
    v.verdict = r.at("verdict").get<std::string>() == "ANOMALY" ? AgentVerdict::Kind::anomaly : AgentVerdict::Kind::benign;
    v.confidence = r.at("confidence").get<double>();
    if (r.contains("cited_evidence")) v.cited_evidence = r["cited_evidence"].get<std::vector<std::string>>();
    v.rationale = r.value("rationale", std::string());
  } catch (const LlmSchemaError& ex) {
    spdlog::warn("analyst output unusable for {}: {}", lead.node_uuid, ex.what());
    v.verdict = AgentVerdict::Kind::benign;
    v.confidence = 0.0;
    v.fallback = true;
    v.rationale = std::string("fallback: ") + ex.what();
  }
  return v;
}

json investigator_payload(const IOCRecord& ioc, const InvestigationContext& ctx) {
  const auto* graph = ctx.graphs.graph(ioc.graph_name);
  if (!graph || !graph->contains(ioc.node_uuid))
    throw ConfigError(fmt::format("IOC node {} not found in graph {}", ioc.node_uuid, ioc.graph_name));
  json hood = json::array();
  for (const auto i : capped_incident_edges(*graph, ioc.node_uuid, ctx.budget.max_leads_per_ioc)) {
    const auto& e = graph->edges()[i];
    const bool outgoing = e.src == ioc.node_uuid;
    const auto& peer_uuid = outgoing ? e.dst : e.src;
    const auto* peer = graph->find(peer_uuid);
    hood.push_back({{"direction", outgoing ? "out" : "in"},
                    {"operation", e.operation},
                    {"peer_uuid", peer_uuid},
                    {"peer_identity", peer->identity.text()},
                    {"peer_kind", std::string(to_string(peer->kind))},
                    {"weight", e.weight},
                    {"first_ts", e.first_ts},
                    {"last_ts", e.last_ts}});
  }
  json payload;
  payload["task"] = "expand";
  payload["ioc"] = {{"node_uuid", ioc.node_uuid},
                    {"graph_name", ioc.graph_name},
                    {"identity", ioc.identity},
                    {"confidence", ioc.confidence},
                    {"origin", std::string(to_string(ioc.origin))},
                    {"rationale", ioc.rationale},
                    {"related_ioc_refs", ioc.related_ioc_refs}};
  payload["neighborhood"] = hood;
  return payload;
}

Expansion investigator_expand(const IOCRecord& ioc, const InvestigationRepository& repo,
                              const InvestigationContext& ctx) {
  const auto r = ctx.llm.invoke(AgentRole::investigator, investigator_payload(ioc, ctx));
  Expansion out;
  out.event = r.at("event").get<std::string>();
  out.phase = parse_phase(r.at("kill_chain_phase").get<std::string>()).value_or(KillChainPhase::UNASSIGNED);
  std::set<std::string> seen;
  for (const auto& l : r.at("leads")) {
    Lead lead{l.at("graph_name").get<std::string>(), l.at("node_uuid").get<std::string>(), l.at("reason").get<std::string>()};
    const bool keep = lead.node_uuid != ioc.node_uuid && ctx.graphs.node(lead.graph_name, lead.node_uuid) &&
                      !repo.iocs.contains(lead.node_uuid) && !repo.adjudicated.contains(lead.node_uuid) &&
                      seen.insert(lead.node_uuid).second && out.leads.size() < ctx.budget.max_leads_per_ioc;
    (keep ? out.leads : out.dropped).push_back(std::move(lead));
  }
  return out;
}

json leader_payload(const InvestigationRepository& repo) {
  json table = json::array();
  for (const auto* r : repo.validated()) {
    table.push_back({{"node_uuid", r->node_uuid},
                     {"graph_name", r->graph_name},
                     {"identity", r->identity},
                     {"kill_chain_phase", std::string(to_string(r->phase))},
                     {"event", r->event},
                     {"confidence", r->confidence},
                     {"related_ioc_refs", r->related_ioc_refs},
                     {"origin", std::string(to_string(r->origin))}});
  }
  json hyps = json::array();
  for (const auto& h : repo.hypotheses) {
    hyps.push_back({{"id", h.id},
                    {"kind", std::string(to_string(h.kind))},
                    {"statement", h.statement},
                    {"target_refs", h.target_refs},
                    {"status", std::string(to_string(h.status))}});
  }
  return {{"task", "synthesize"}, {"iteration", repo.iteration + 1}, {"iocs", table}, {"hypotheses", hyps}};
}

LeaderDecision leader_synthesize(const InvestigationRepository& repo, const InvestigationContext& ctx) {
  const auto r = ctx.llm.invoke(AgentRole::leader, leader_payload(repo));
  LeaderDecision d;
  d.coherent = r.at("coherent").get<bool>();
  if (r.contains("phase_coverage"))
    for (const auto& [phase, ids] : r["phase_coverage"].items())
      if (ids.is_array())
        for (const auto& id : ids)
          if (id.is_string()) d.phase_coverage[phase].push_back(id.get<std::string>());
  if (r.contains("missing_phases")) d.missing_phases = r["missing_phases"].get<std::vector<std::string>>();

  std::set<std::string> validated;
  for (const auto* v : repo.validated()) validated.insert(v->node_uuid);

  if (r.contains("false_positives")) {
    for (const auto& id : r["false_positives"]) {
      const auto uuid = id.get<std::string>();
      if (validated.contains(uuid))
        d.false_positives.push_back(uuid);
      else
        d.rejected.push_back({{"false_positive", uuid}, {"reason", "not a validated IOC"}});
    }
  }

  std::size_t stored = repo.hypotheses.size();
  for (const auto& h : r.at("hypotheses")) {
    const auto reject = [&](const std::string& why) { d.rejected.push_back({{"hypothesis", h}, {"reason", why}}); };
    if (d.coherent) {
      reject("attack chain declared coherent");
      continue;
    }
    Hypothesis hyp;
    hyp.kind = h.at("kind").get<std::string>() == "false_positive" ? HypothesisKind::false_positive
                                                                    : HypothesisKind::missing_stage;
    hyp.statement = h.at("statement").get<std::string>();
    hyp.target_refs = h.at("target_refs").get<std::vector<std::string>>();
    if (hyp.target_refs.empty()) {
      reject("no target references");
      continue;
    }
    const auto bad_ref = std::find_if(hyp.target_refs.begin(), hyp.target_refs.end(), [&](const std::string& ref) {
      const auto phase = parse_phase(ref);
      return !validated.contains(ref) && !(phase && *phase != KillChainPhase::UNASSIGNED);
    });
    if (bad_ref != hyp.target_refs.end()) {
      reject("reference outside the repository: " + *bad_ref);
      continue;
    }
    bool leads_ok = true;
    if (h.contains("leads")) {
      for (const auto& l : h["leads"]) {
        Lead lead{l.at("graph_name").get<std::string>(), l.at("node_uuid").get<std::string>(),
                  l.at("reason").get<std::string>()};
        if (!ctx.graphs.node(lead.graph_name, lead.node_uuid)) {
          reject("lead names an unknown node: " + lead.node_uuid);
          leads_ok = false;
          break;
        }
        hyp.spawned_leads.push_back(std::move(lead));
      }
    }
    if (!leads_ok) continue;
    if (hyp.kind == HypothesisKind::missing_stage && hyp.spawned_leads.empty()) {
      reject("missing-stage hypothesis without leads is not testable");
      continue;
    }
    if (hyp.kind == HypothesisKind::false_positive &&
        std::none_of(hyp.target_refs.begin(), hyp.target_refs.end(),
                     [&](const std::string& ref) { return validated.contains(ref); })) {
      reject("false-positive hypothesis names no IOC");
      continue;
    }
    if (stored >= ctx.budget.max_hypotheses) {
      reject("hypothesis budget spent");
      continue;
    }
    ++stored;
    hyp.id = fmt::format("H{}", stored);
    d.hypotheses.push_back(std::move(hyp));
  }
  d.terminate = d.coherent || d.hypotheses.empty();
  return d;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

std::string alert_key(std::string_view graph, std::string_view uuid) { return fmt::format("{}/{}", graph, uuid); }

class Orchestrator {
 public:
  Orchestrator(const InvestigationContext& ctx, InvestigationRepository& repo) : ctx_(ctx), repo_(repo) {}

  void run(const std::vector<Alert>& alerts) {
    ctx_.budget.validate();
    ctx_.llm.set_calls_used(repo_.llm_calls);
    ctx_.llm.set_token_counts(repo_.prompt_tokens, repo_.completion_tokens);
    ctx_.llm.on_call = [this](const LlmCallRecord& rec) {
      json data{{"role", std::string(to_string(rec.role))}, {"digest", rec.digest}, {"attempt", rec.attempt},
                {"valid", rec.valid}};
      if (!rec.error.empty()) data["error"] = rec.error;
      repo_.log(stage_, std::string(to_string(rec.role)), "llm_call", std::move(data));
    };
    struct HookReset {
      LlmClient& llm;
      ~HookReset() { llm.on_call = nullptr; }
    } reset{ctx_.llm};

    if (repo_.status == InvestigationStatus::completed) return;
    stage_ = "init";
    repo_.log(stage_, "orchestrator", repo_.journal.empty() ? "start" : "resume",
              {{"alerts", alerts.size()}, {"max_llm_calls", ctx_.budget.max_llm_calls}});
    repo_.status = InvestigationStatus::running;

    try {
      if (repo_.completed_stage < 1) stage1(alerts);
      if (repo_.completed_stage < 2) {
        stage_ = "stage2";
        drain_queue();
        repo_.completed_stage = 2;
      }
      if (repo_.completed_stage < 3) {
        stage3();
        repo_.completed_stage = 3;
      }
    } catch (const BudgetExhaustedError& ex) {
      exhaust(ex.what());
    } catch (const LlmTransportError& ex) {
      pause(ex.what());
      throw;
    }

    try {
      if (repo_.completed_stage < 4) stage4();
    } catch (const LlmTransportError& ex) {
      pause(ex.what());
      throw;
    }
    repo_.completed_stage = 4;
    repo_.status = InvestigationStatus::completed;
    sync_counters();
    stage_ = "done";
    repo_.log(stage_, "orchestrator", "complete",
              {{"validated_iocs", repo_.validated().size()}, {"llm_calls", repo_.llm_calls},
               {"budget_exhausted", repo_.budget_exhausted}, {"reason", repo_.termination_reason}});
  }

 private:
  void sync_counters() {
    repo_.llm_calls = ctx_.llm.calls_used();
    repo_.prompt_tokens = ctx_.llm.prompt_tokens();
    repo_.completion_tokens = ctx_.llm.completion_tokens();
  }

  void pause(const std::string& why) {
    sync_counters();
    repo_.status = InvestigationStatus::paused;
    repo_.log(stage_, "orchestrator", "paused", {{"error", why}});
  }

  void exhaust(const std::string& why) {
    repo_.budget_exhausted = true;
    repo_.termination_reason = "LLM call budget exhausted";
    refute_open_hypotheses();
    repo_.log(stage_, "orchestrator", "budget_exhausted", {{"detail", why}});
    repo_.completed_stage = 3;
  }

  void refute_open_hypotheses() {
    for (auto& h : repo_.hypotheses) {
      if (h.status != HypothesisStatus::open) continue;
      h.status = HypothesisStatus::refuted;
      repo_.log(stage_, "orchestrator", "hypothesis_refuted", {{"id", h.id}, {"reason", "budget exhausted"}});
    }
  }

  /// Runs the analyst on a lead, journals the verdict and admits the node
  /// on ANOMALY.
  AgentVerdict adjudicate(const Lead& lead, IocOrigin origin, std::vector<std::string> related) {
    const auto v = analyst_validate(lead, ctx_);
    const auto verdict = v.is_anomaly() ? "ANOMALY" : "BENIGN";
    const auto& entry = repo_.log(stage_, "analyst", "verdict",
                                  {{"node_uuid", lead.node_uuid},
                                   {"graph_name", lead.graph_name},
                                   {"verdict", verdict},
                                   {"confidence", v.confidence},
                                   {"fallback", v.fallback},
                                   {"origin", std::string(to_string(origin))}});
    const auto seq = entry.seq;
    repo_.adjudicated[lead.node_uuid] = verdict;

    const auto* graph = ctx_.graphs.graph(lead.graph_name);
    auto& ev = repo_.evidence[lead.node_uuid];
    for (const auto i : capped_incident_edges(*graph, lead.node_uuid, ctx_.budget.max_leads_per_ioc))
      ev.insert(to_evidence(graph->edges()[i]));

    if (!v.is_anomaly()) return v;
    IOCRecord rec;
    rec.node_uuid = lead.node_uuid;
    rec.graph_name = lead.graph_name;
    rec.identity = graph->find(lead.node_uuid)->identity.text();
    rec.confidence = v.confidence;
    rec.related_ioc_refs = std::move(related);
    rec.origin = origin;
    rec.status = IocStatus::validated;
    rec.rationale = v.rationale;
    rec.cited_evidence = v.cited_evidence;
    rec.admitted_seq = seq;
    repo_.log(stage_, "orchestrator", "admit_ioc",
              {{"node_uuid", rec.node_uuid}, {"origin", std::string(to_string(origin))}, {"verdict_seq", seq},
               {"related_ioc_refs", rec.related_ioc_refs}});
    repo_.iocs.insert_or_assign(rec.node_uuid, std::move(rec));
    return v;
  }

  void stage1(const std::vector<Alert>& alerts) {
    stage_ = "stage1";
    const auto limit = std::min(alerts.size(), ctx_.budget.max_alerts);
    if (alerts.size() > limit)
      repo_.log(stage_, "orchestrator", "alerts_capped", {{"received", alerts.size()}, {"kept", limit}});
    for (std::size_t i = 0; i < limit; ++i) {
      const auto& a = alerts[i];
      const auto key = alert_key(a.graph_name, a.node_uuid);
      if (repo_.processed_alerts.contains(key)) continue;
      if (!ctx_.graphs.node(a.graph_name, a.node_uuid)) {
        repo_.log(stage_, "orchestrator", "alert_skipped", {{"node_uuid", a.node_uuid}, {"reason", "not in graph store"}});
      } else if (!repo_.iocs.contains(a.node_uuid)) {
        adjudicate(Lead{a.graph_name, a.node_uuid, "detector alert: " + a.explanation}, IocOrigin::alert, {});
      }
      repo_.processed_alerts.insert(key);
    }
    repo_.completed_stage = 1;
    if (alerts.empty()) repo_.termination_reason = "no alerts";
  }

  const IOCRecord* next_unexpanded() const {
    const IOCRecord* best = nullptr;
    for (const auto& [uuid, r] : repo_.iocs)
      if (r.status == IocStatus::validated && !r.expanded && (!best || r.admitted_seq < best->admitted_seq)) best = &r;
    return best;
  }

  void drain_queue() {
    while (const auto* next = next_unexpanded()) {
      const auto uuid = next->node_uuid;
      const auto exp = investigator_expand(*next, repo_, ctx_);
      auto& rec = repo_.iocs.at(uuid);
      rec.event = exp.event;
      rec.phase = exp.phase;
      const auto* graph = ctx_.graphs.graph(rec.graph_name);
      auto& ev = repo_.evidence[uuid];
      for (const auto i : capped_incident_edges(*graph, uuid, ctx_.budget.max_leads_per_ioc))
        ev.insert(to_evidence(graph->edges()[i]));
      json leads = json::array();
      for (const auto& l : exp.leads) leads.push_back(l.node_uuid);
      json dropped = json::array();
      for (const auto& l : exp.dropped) dropped.push_back(l.node_uuid);
      repo_.log(stage_, "investigator", "expand",
                {{"node_uuid", uuid}, {"kill_chain_phase", std::string(to_string(exp.phase))}, {"event", exp.event},
                 {"leads", leads}, {"dropped", dropped}});
      for (const auto& lead : exp.leads) {
        if (repo_.iocs.contains(lead.node_uuid) || repo_.adjudicated.contains(lead.node_uuid)) continue;
        adjudicate(lead, IocOrigin::lead, {uuid});
      }
      repo_.iocs.at(uuid).expanded = true;
    }
  }

  bool has_open_hypotheses() const {
    return std::any_of(repo_.hypotheses.begin(), repo_.hypotheses.end(),
                       [](const Hypothesis& h) { return h.status == HypothesisStatus::open; });
  }

  void process_hypothesis(Hypothesis& h) {
    bool confirmed = false;
    if (h.kind == HypothesisKind::missing_stage) {
      std::vector<std::string> related;
      for (const auto& ref : h.target_refs)
        if (repo_.iocs.contains(ref)) related.push_back(ref);
      std::size_t tested = 0;
      for (const auto& lead : h.spawned_leads) {
        if (tested >= ctx_.budget.max_leads_per_ioc) break;
        if (repo_.iocs.contains(lead.node_uuid) || repo_.adjudicated.contains(lead.node_uuid)) {
          repo_.log(stage_, "orchestrator", "lead_dropped", {{"hypothesis", h.id}, {"node_uuid", lead.node_uuid}});
          continue;
        }
        ++tested;
        Lead targeted{lead.graph_name, lead.node_uuid, fmt::format("{} ({})", lead.reason, h.statement)};
        if (adjudicate(targeted, IocOrigin::hypothesis, related).is_anomaly()) confirmed = true;
      }
    } else {
      for (const auto& ref : h.target_refs) {
        const auto it = repo_.iocs.find(ref);
        if (it == repo_.iocs.end() || it->second.status != IocStatus::validated) continue;
        const Lead recheck{it->second.graph_name, ref, "suspected false positive: " + h.statement};
        const auto v = analyst_validate(recheck, ctx_);
        repo_.log(stage_, "analyst", "recheck",
                  {{"node_uuid", ref}, {"hypothesis", h.id}, {"verdict", v.is_anomaly() ? "ANOMALY" : "BENIGN"},
                   {"confidence", v.confidence}, {"fallback", v.fallback}});
        if (!v.is_anomaly() && !v.fallback) {
          it->second.status = IocStatus::refuted;
          repo_.log(stage_, "orchestrator", "demote_ioc", {{"node_uuid", ref}, {"hypothesis", h.id}});
          confirmed = true;
        }
      }
    }
    h.status = confirmed ? HypothesisStatus::confirmed : HypothesisStatus::refuted;
    repo_.log(stage_, "orchestrator", "hypothesis_result", {{"id", h.id}, {"status", std::string(to_string(h.status))}});
  }

  void stage3() {
    stage_ = "stage3";
    while (true) {
      if (has_open_hypotheses()) {
        for (auto& h : repo_.hypotheses)
          if (h.status == HypothesisStatus::open) process_hypothesis(h);
        stage_ = "stage2";
        drain_queue();
        stage_ = "stage3";
      }
      if (repo_.validated().empty()) {
        if (repo_.termination_reason.empty()) repo_.termination_reason = "no validated IOCs";
        return;
      }
      if (repo_.iteration >= ctx_.budget.max_iterations) {
        iterations_spent();
        return;
      }
      const auto d = leader_synthesize(repo_, ctx_);
      ++repo_.iteration;
      json ids = json::array();
      for (const auto& h : d.hypotheses) ids.push_back(h.id);
      repo_.log(stage_, "leader", "synthesize",
                {{"iteration", repo_.iteration}, {"coherent", d.coherent}, {"terminate", d.terminate},
                 {"phase_coverage", d.phase_coverage}, {"missing_phases", d.missing_phases},
                 {"hypotheses", ids}, {"false_positives", d.false_positives}});
      for (const auto& r : d.rejected) repo_.log(stage_, "leader", "rejected", r);
      for (const auto& uuid : d.false_positives) {
        repo_.iocs.at(uuid).status = IocStatus::refuted;
        repo_.log(stage_, "orchestrator", "demote_ioc", {{"node_uuid", uuid}, {"reason", "leader flag"}});
      }
      for (const auto& h : d.hypotheses) {
        repo_.hypotheses.push_back(h);
        repo_.log(stage_, "leader", "hypothesis",
                  {{"id", h.id}, {"kind", std::string(to_string(h.kind))}, {"statement", h.statement},
                   {"target_refs", h.target_refs}});
      }
      if (d.terminate) {
        repo_.termination_reason = d.coherent ? "coherent kill chain" : "hypotheses exhausted";
        return;
      }
      if (repo_.iteration >= ctx_.budget.max_iterations) {
        iterations_spent();
        return;
      }
    }
  }

  void iterations_spent() {
    repo_.budget_exhausted = true;
    repo_.termination_reason = "iteration budget exhausted";
    refute_open_hypotheses();
    repo_.log(stage_, "orchestrator", "budget_exhausted", {{"detail", "max_iterations reached"}});
  }

  void stage4() {
    stage_ = "stage4";
    if (repo_.validated().empty()) {
      if (repo_.termination_reason.empty()) repo_.termination_reason = "no validated IOCs";
      return;
    }
    try {
      const auto r = ctx_.llm.invoke(AgentRole::reporter, reporter_payload(repo_));
      repo_.notes = ReportNotes{r.at("summary").get<std::string>(), r.at("remediation").get<std::vector<std::string>>()};
      repo_.log(stage_, "reporter", "notes", {{"remediation_items", repo_.notes->remediation.size()}});
    } catch (const LlmSchemaError& ex) {
      repo_.log(stage_, "reporter", "fallback", {{"error", ex.what()}});
    } catch (const BudgetExhaustedError&) {
      repo_.log(stage_, "reporter", "skipped", {{"reason", "LLM call budget exhausted"}});
    }
  }

  const InvestigationContext& ctx_;
  InvestigationRepository& repo_;
  std::string stage_ = "init";
};

}  // namespace

void run_investigation(const std::vector<Alert>& alerts, const InvestigationContext& ctx,
                       InvestigationRepository& repo) {
  Orchestrator(ctx, repo).run(alerts);
}

InvestigationRepository run_investigation(const std::vector<Alert>& alerts, const InvestigationContext& ctx) {
  InvestigationRepository repo;
  run_investigation(alerts, ctx, repo);
  return repo;
}

}  // namespace provbind
