#include "provbind/repository.hpp"

#include <algorithm>
#include <fstream>

#include "provbind/error.hpp"

namespace provbind {

using nlohmann::json;

std::string_view to_string(KillChainPhase p) noexcept {
  switch (p) {
    case KillChainPhase::IC: return "IC";
    case KillChainPhase::IR: return "IR";
    case KillChainPhase::CC: return "CC";
    case KillChainPhase::PE: return "PE";
    case KillChainPhase::LM: return "LM";
    case KillChainPhase::MP: return "MP";
    case KillChainPhase::DE: return "DE";
    case KillChainPhase::CT: return "CT";
    case KillChainPhase::UNASSIGNED: return "UNASSIGNED";
  }
  return "UNASSIGNED";
}

std::optional<KillChainPhase> parse_phase(std::string_view text) noexcept {
  for (const auto p : kAllPhases)
    if (to_string(p) == text) return p;
  return std::nullopt;
}

std::string_view phase_title(KillChainPhase p) noexcept {
  switch (p) {
    case KillChainPhase::IC: return "Initial Compromise";
    case KillChainPhase::IR: return "Internal Reconnaissance";
    case KillChainPhase::CC: return "Command and Control";
    case KillChainPhase::PE: return "Privilege Escalation";
    case KillChainPhase::LM: return "Lateral Movement";
    case KillChainPhase::MP: return "Maintain Persistence";
    case KillChainPhase::DE: return "Data Exfiltration";
    case KillChainPhase::CT: return "Covering Tracks";
    case KillChainPhase::UNASSIGNED: return "Unassigned";
  }
  return "Unassigned";
}

std::string_view to_string(IocOrigin o) noexcept {
  switch (o) {
    case IocOrigin::alert: return "alert";
    case IocOrigin::lead: return "lead";
    case IocOrigin::hypothesis: return "hypothesis";
  }
  return "alert";
}

std::string_view to_string(IocStatus s) noexcept {
  switch (s) {
    case IocStatus::candidate: return "candidate";
    case IocStatus::validated: return "validated";
    case IocStatus::refuted: return "refuted";
  }
  return "candidate";
}

std::string_view to_string(HypothesisKind k) noexcept {
  return k == HypothesisKind::missing_stage ? "missing_stage" : "false_positive";
}

std::string_view to_string(HypothesisStatus s) noexcept {
  switch (s) {
    case HypothesisStatus::open: return "open";
    case HypothesisStatus::confirmed: return "confirmed";
    case HypothesisStatus::refuted: return "refuted";
  }
  return "open";
}

std::string_view to_string(InvestigationStatus s) noexcept {
  switch (s) {
    case InvestigationStatus::running: return "running";
    case InvestigationStatus::paused: return "paused";
    case InvestigationStatus::completed: return "completed";
  }
  return "running";
}

namespace {

template <typename E>
E parse_enum(std::string_view text, std::initializer_list<E> values, const char* what) {
  for (const auto v : values)
    if (to_string(v) == text) return v;
  throw FormatError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

json lead_json(const Lead& l) { return {{"graph_name", l.graph_name}, {"node_uuid", l.node_uuid}, {"reason", l.reason}}; }

Lead lead_from(const json& j) {
  return {j.at("graph_name").get<std::string>(), j.at("node_uuid").get<std::string>(), j.at("reason").get<std::string>()};
}

}  // namespace

json journal_entry_json(const JournalEntry& e) {
  return {{"seq", e.seq}, {"stage", e.stage}, {"actor", e.actor}, {"action", e.action}, {"data", e.data}};
}

const JournalEntry& InvestigationRepository::log(std::string stage, std::string actor, std::string action, json data) {
  journal.push_back(JournalEntry{journal.size() + 1, std::move(stage), std::move(actor), std::move(action), std::move(data)});
  return journal.back();
}

std::vector<const IOCRecord*> InvestigationRepository::validated() const {
  std::vector<const IOCRecord*> out;
  for (const auto& [uuid, r] : iocs)
    if (r.status == IocStatus::validated) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const IOCRecord* a, const IOCRecord* b) { return a->admitted_seq < b->admitted_seq; });
  return out;
}

std::vector<const IOCRecord*> InvestigationRepository::refuted() const {
  std::vector<const IOCRecord*> out;
  for (const auto& [uuid, r] : iocs)
    if (r.status == IocStatus::refuted) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const IOCRecord* a, const IOCRecord* b) { return a->admitted_seq < b->admitted_seq; });
  return out;
}

std::vector<std::pair<KillChainPhase, std::vector<const IOCRecord*>>> InvestigationRepository::narrative() const {
  std::vector<std::pair<KillChainPhase, std::vector<const IOCRecord*>>> out;
  const auto all = validated();
  for (const auto phase : kAllPhases) {
    std::vector<const IOCRecord*> group;
    for (const auto* r : all)
      if (r->phase == phase) group.push_back(r);
    if (!group.empty()) out.emplace_back(phase, std::move(group));
  }
  return out;
}

bool InvestigationRepository::gatekeeping_holds() const {
  for (const auto* r : validated()) {
    const bool ok = std::any_of(journal.begin(), journal.end(), [r](const JournalEntry& e) {
      return e.action == "verdict" && e.data.value("node_uuid", "") == r->node_uuid &&
             e.data.value("verdict", "") == "ANOMALY" && e.seq <= r->admitted_seq;
    });
    if (!ok) return false;
  }
  return true;
}

json InvestigationRepository::to_json() const {
  json j;
  j["status"] = std::string(to_string(status));
  json iocs_j = json::array();
  for (const auto& [uuid, r] : iocs) {
    iocs_j.push_back({{"node_uuid", r.node_uuid},
                      {"graph_name", r.graph_name},
                      {"identity", r.identity},
                      {"kill_chain_phase", std::string(to_string(r.phase))},
                      {"event", r.event},
                      {"confidence", r.confidence},
                      {"related_ioc_refs", r.related_ioc_refs},
                      {"origin", std::string(to_string(r.origin))},
                      {"status", std::string(to_string(r.status))},
                      {"rationale", r.rationale},
                      {"cited_evidence", r.cited_evidence},
                      {"admitted_seq", r.admitted_seq},
                      {"expanded", r.expanded}});
  }
  j["iocs"] = iocs_j;
  json hyps = json::array();
  for (const auto& h : hypotheses) {
    json leads = json::array();
    for (const auto& l : h.spawned_leads) leads.push_back(lead_json(l));
    hyps.push_back({{"id", h.id},
                    {"kind", std::string(to_string(h.kind))},
                    {"statement", h.statement},
                    {"target_refs", h.target_refs},
                    {"status", std::string(to_string(h.status))},
                    {"spawned_leads", leads}});
  }
  j["hypotheses"] = hyps;
  json ev = json::object();
  for (const auto& [uuid, edges] : evidence) {
    json list = json::array();
    for (const auto& e : edges)
      list.push_back({{"src", e.src}, {"dst", e.dst}, {"operation", e.operation}, {"weight", e.weight},
                      {"first_ts", e.first_ts}, {"last_ts", e.last_ts}});
    ev[uuid] = list;
  }
  j["evidence"] = ev;
  j["narrative"] = json::object();
  for (const auto& [phase, group] : narrative()) {
    json ids = json::array();
    for (const auto* r : group) ids.push_back(r->node_uuid);
    j["narrative"][std::string(to_string(phase))] = ids;
  }
  j["processed_alerts"] = processed_alerts;
  j["adjudicated"] = adjudicated;
  j["completed_stage"] = completed_stage;
  j["iteration"] = iteration;
  j["llm_calls"] = llm_calls;
  j["prompt_tokens"] = prompt_tokens;
  j["completion_tokens"] = completion_tokens;
  j["budget_exhausted"] = budget_exhausted;
  j["termination_reason"] = termination_reason;
  if (notes) j["notes"] = {{"summary", notes->summary}, {"remediation", notes->remediation}};
  json journal_j = json::array();
  for (const auto& e : journal) journal_j.push_back(journal_entry_json(e));
  j["journal"] = journal_j;
  return j;
}

InvestigationRepository InvestigationRepository::from_json(const json& j) {
  InvestigationRepository repo;
  try {
    repo.status = parse_enum(j.at("status").get<std::string>(),
                             {InvestigationStatus::running, InvestigationStatus::paused, InvestigationStatus::completed},
                             "status");
    for (const auto& r : j.at("iocs")) {
      IOCRecord rec;
      rec.node_uuid = r.at("node_uuid").get<std::string>();
      rec.graph_name = r.at("graph_name").get<std::string>();
      rec.identity = r.at("identity").get<std::string>();
      const auto phase = parse_phase(r.at("kill_chain_phase").get<std::string>());
      if (!phase) throw FormatError("unknown kill-chain phase in repository");
      rec.phase = *phase;
      rec.event = r.at("event").get<std::string>();
      rec.confidence = r.at("confidence").get<double>();
      rec.related_ioc_refs = r.at("related_ioc_refs").get<std::vector<std::string>>();
      rec.origin = parse_enum(r.at("origin").get<std::string>(), {IocOrigin::alert, IocOrigin::lead, IocOrigin::hypothesis}, "origin");
      rec.status = parse_enum(r.at("status").get<std::string>(),
                              {IocStatus::candidate, IocStatus::validated, IocStatus::refuted}, "IOC status");
      rec.rationale = r.at("rationale").get<std::string>();
      rec.cited_evidence = r.at("cited_evidence").get<std::vector<std::string>>();
      rec.admitted_seq = r.at("admitted_seq").get<std::uint64_t>();
      rec.expanded = r.at("expanded").get<bool>();
      repo.iocs.emplace(rec.node_uuid, std::move(rec));
    }
    for (const auto& h : j.at("hypotheses")) {
      Hypothesis hyp;
      hyp.id = h.at("id").get<std::string>();
      hyp.kind = parse_enum(h.at("kind").get<std::string>(), {HypothesisKind::missing_stage, HypothesisKind::false_positive}, "hypothesis kind");
      hyp.statement = h.at("statement").get<std::string>();
      hyp.target_refs = h.at("target_refs").get<std::vector<std::string>>();
      hyp.status = parse_enum(h.at("status").get<std::string>(),
                              {HypothesisStatus::open, HypothesisStatus::confirmed, HypothesisStatus::refuted}, "hypothesis status");
      for (const auto& l : h.at("spawned_leads")) hyp.spawned_leads.push_back(lead_from(l));
      repo.hypotheses.push_back(std::move(hyp));
    }
    for (const auto& [uuid, list] : j.at("evidence").items()) {
      auto& set = repo.evidence[uuid];
      for (const auto& e : list)
        set.insert(EvidenceEdge{e.at("src").get<std::string>(), e.at("dst").get<std::string>(),
                                e.at("operation").get<std::string>(), e.at("weight").get<std::uint64_t>(),
                                e.at("first_ts").get<std::int64_t>(), e.at("last_ts").get<std::int64_t>()});
    }
    repo.processed_alerts = j.at("processed_alerts").get<std::set<std::string>>();
    repo.adjudicated = j.at("adjudicated").get<std::map<std::string, std::string>>();
    repo.completed_stage = j.at("completed_stage").get<std::size_t>();
    repo.iteration = j.at("iteration").get<std::size_t>();
    repo.llm_calls = j.at("llm_calls").get<std::size_t>();
    repo.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
    repo.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
    repo.budget_exhausted = j.at("budget_exhausted").get<bool>();
    repo.termination_reason = j.at("termination_reason").get<std::string>();
    if (j.contains("notes"))
      repo.notes = ReportNotes{j["notes"].at("summary").get<std::string>(),
                               j["notes"].at("remediation").get<std::vector<std::string>>()};
    for (const auto& e : j.at("journal"))
      repo.journal.push_back(JournalEntry{e.at("seq").get<std::uint64_t>(), e.at("stage").get<std::string>(),
                                          e.at("actor").get<std::string>(), e.at("action").get<std::string>(),
                                          e.at("data")});
  } catch (const json::exception& ex) {
    throw FormatError(std::string("corrupt investigation repository: ") + ex.what());
  }
  return repo;
}

void InvestigationRepository::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

InvestigationRepository InvestigationRepository::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("investigation repository", path.string());
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError("investigation repository is not valid JSON: " + path.string());
  return from_json(j);
}

void InvestigationRepository::write_journal(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : journal) out << journal_entry_json(e).dump() << '\n';
}

}  // namespace provbind
