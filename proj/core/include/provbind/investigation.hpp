#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provbind/detector.hpp"
#include "provbind/ingest.hpp"
#include "provbind/llm.hpp"
#include "provbind/profiler.hpp"
#include "provbind/repository.hpp"

namespace provbind {

/// Provenance graphs of the investigated window plus their node embeddings.
class GraphStore {
 public:
  void add(ProvenanceGraph graph, std::map<std::string, Vec> embeddings = {});

  const ProvenanceGraph* graph(std::string_view name) const;
  const Entity* node(std::string_view graph_name, std::string_view uuid) const;
  const Vec* embedding(std::string_view graph_name, std::string_view uuid) const;
  std::vector<std::string> graph_names() const;

 private:
  struct Slot {
    ProvenanceGraph graph;
    std::map<std::string, Vec> embeddings;
  };
  std::map<std::string, Slot, std::less<>> slots_;
};

struct InvestigationBudget {
  std::size_t max_iterations = 5;
  std::size_t max_leads_per_ioc = 10;
  std::size_t max_hypotheses = 20;
  std::size_t max_llm_calls = 200;
  std::size_t max_alerts = 50;
  std::size_t max_attempts = 3;  // per LLM request, including repairs

  void validate() const;
};

struct AgentVerdict {
  enum class Kind { anomaly, benign };
  Kind verdict = Kind::benign;
  double confidence = 0.0;
  std::vector<std::string> cited_evidence;
  std::string rationale;
  bool fallback = false;  // model output unusable; fail-closed BENIGN

  bool is_anomaly() const noexcept { return verdict == Kind::anomaly; }
};

struct InvestigationContext {
  const GraphStore& graphs;
  const BenignKnowledgeBase& kb;
  LlmClient& llm;
  InvestigationBudget budget;
  std::size_t similar_k = 3;
  std::size_t peer_k = 3;
};

/// Incident edges of uuid, the top `cap` by weight then recency, returned in
/// temporal order.
std::vector<std::size_t> capped_incident_edges(const ProvenanceGraph& graph, std::string_view uuid, std::size_t cap);

/// Analyst request payload: target digest, similar benign nodes by embedding
/// and same-identity benign peers.
nlohmann::json analyst_payload(const Lead& lead, const InvestigationContext& ctx);

/// Stage 1 / lead validation. Malformed model output after retries yields a
/// BENIGN fallback verdict with zero confidence. Transport failures and an
/// exhausted budget propagate.
AgentVerdict analyst_validate(const Lead& lead, const InvestigationContext& ctx);

struct Expansion {
  std::string event;
  KillChainPhase phase = KillChainPhase::UNASSIGNED;
  std::vector<Lead> leads;
  std::vector<Lead> dropped;  // deduplicated or out of scope
};

nlohmann::json investigator_payload(const IOCRecord& ioc, const InvestigationContext& ctx);

/// Stage 2 expansion of a validated IOC. Leads already present in the
/// repository, already adjudicated, unknown to the graph store, or beyond
/// max_leads_per_ioc are dropped.
Expansion investigator_expand(const IOCRecord& ioc, const InvestigationRepository& repo,
                              const InvestigationContext& ctx);

struct LeaderDecision {
  std::map<std::string, std::vector<std::string>> phase_coverage;
  std::vector<std::string> missing_phases;
  std::vector<Hypothesis> hypotheses;          // accepted, status open
  std::vector<nlohmann::json> rejected;        // out-of-bounds hypotheses
  std::vector<std::string> false_positives;    // validated IOC uuids
  bool coherent = false;
  bool terminate = false;
};

nlohmann::json leader_payload(const InvestigationRepository& repo);

/// Stage 3 synthesis. Hypotheses must reference validated IOC uuids or phase
/// codes and their leads must name nodes of the graph store; anything else
/// is rejected. terminate when the chain is coherent or nothing testable
/// remains.
LeaderDecision leader_synthesize(const InvestigationRepository& repo, const InvestigationContext& ctx);

/// Runs (or resumes) the four-stage loop over repo. Returns normally when the
/// loop completes, including budget exhaustion; on a transport failure the
/// repository is left in the paused state and the error is rethrown.
void run_investigation(const std::vector<Alert>& alerts, const InvestigationContext& ctx,
                       InvestigationRepository& repo);

/// Convenience wrapper starting from an empty repository.
InvestigationRepository run_investigation(const std::vector<Alert>& alerts, const InvestigationContext& ctx);

}  // namespace provbind
