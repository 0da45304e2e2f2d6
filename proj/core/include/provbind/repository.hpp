#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace provbind {

/// Kill-chain phases in campaign order.
enum class KillChainPhase { IC, IR, CC, PE, LM, MP, DE, CT, UNASSIGNED };

std::string_view to_string(KillChainPhase p) noexcept;
std::optional<KillChainPhase> parse_phase(std::string_view text) noexcept;
std::string_view phase_title(KillChainPhase p) noexcept;
inline constexpr KillChainPhase kAllPhases[] = {KillChainPhase::IC, KillChainPhase::IR, KillChainPhase::CC,
                                                KillChainPhase::PE, KillChainPhase::LM, KillChainPhase::MP,
                                                KillChainPhase::DE, KillChainPhase::CT, KillChainPhase::UNASSIGNED};

enum class IocOrigin { alert, lead, hypothesis };
enum class IocStatus { candidate, validated, refuted };
enum class HypothesisKind { missing_stage, false_positive };
enum class HypothesisStatus { open, confirmed, refuted };

std::string_view to_string(IocOrigin o) noexcept;
std::string_view to_string(IocStatus s) noexcept;
std::string_view to_string(HypothesisKind k) noexcept;
std::string_view to_string(HypothesisStatus s) noexcept;

struct Lead {
  std::string graph_name;
  std::string node_uuid;
  std::string reason;
};

struct IOCRecord {
  std::string node_uuid;
  std::string graph_name;
  std::string identity;
  KillChainPhase phase = KillChainPhase::UNASSIGNED;
  std::string event;
  double confidence = 0.0;
  std::vector<std::string> related_ioc_refs;
  IocOrigin origin = IocOrigin::alert;
  IocStatus status = IocStatus::candidate;
  std::string rationale;
  std::vector<std::string> cited_evidence;
  std::uint64_t admitted_seq = 0;  // journal sequence of the admitting verdict
  bool expanded = false;
};

struct Hypothesis {
  std::string id;
  HypothesisKind kind = HypothesisKind::missing_stage;
  std::string statement;
  std::vector<std::string> target_refs;
  HypothesisStatus status = HypothesisStatus::open;
  std::vector<Lead> spawned_leads;
};

/// One aggregated provenance edge retained as evidence.
struct EvidenceEdge {
  std::string src;
  std::string dst;
  std::string operation;
  std::uint64_t weight = 1;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;

  friend auto operator<=>(const EvidenceEdge&, const EvidenceEdge&) = default;
};

struct JournalEntry {
  std::uint64_t seq = 0;
  std::string stage;
  std::string actor;
  std::string action;
  nlohmann::json data;
};

enum class InvestigationStatus { running, paused, completed };
std::string_view to_string(InvestigationStatus s) noexcept;

struct ReportNotes {
  std::string summary;
  std::vector<std::string> remediation;
};

/// Shared investigation state. Mutations go through the orchestrator, which
/// is the single writer; every mutation is journaled in commit order.
class InvestigationRepository {
 public:
  std::map<std::string, IOCRecord> iocs;  // keyed by node uuid
  std::vector<Hypothesis> hypotheses;
  std::map<std::string, std::set<EvidenceEdge>> evidence;
  std::vector<JournalEntry> journal;

  // Orchestration state, persisted so a paused run can resume.
  InvestigationStatus status = InvestigationStatus::running;
  std::set<std::string> processed_alerts;              // "<graph>/<uuid>"
  std::map<std::string, std::string> adjudicated;      // uuid -> last verdict
  std::size_t completed_stage = 0;                     // 0..4
  std::size_t iteration = 0;                           // leader calls so far
  std::size_t llm_calls = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  bool budget_exhausted = false;
  std::string termination_reason;
  std::optional<ReportNotes> notes;

  const JournalEntry& log(std::string stage, std::string actor, std::string action, nlohmann::json data);

  /// Validated IOCs grouped by phase, phases in kill-chain order and IOCs by
  /// admission order.
  std::vector<std::pair<KillChainPhase, std::vector<const IOCRecord*>>> narrative() const;
  std::vector<const IOCRecord*> validated() const;
  std::vector<const IOCRecord*> refuted() const;

  /// True when every validated IOC has an ANOMALY verdict in the journal.
  bool gatekeeping_holds() const;

  nlohmann::json to_json() const;
  static InvestigationRepository from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path) const;
  static InvestigationRepository load(const std::filesystem::path& path);
  void write_journal(const std::filesystem::path& path) const;
};

nlohmann::json journal_entry_json(const JournalEntry& e);

}  // namespace provbind
