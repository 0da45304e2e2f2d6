#include "provbind/report.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "provbind/error.hpp"

namespace provbind {

using nlohmann::json;

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string md_inline(std::string_view s) {
  std::string out;
  for (const char c : s) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
  return out;
}

/// Validated IOCs numbered in narrative order.
std::map<std::string, std::string> ioc_labels(const InvestigationRepository& repo) {
  std::map<std::string, std::string> labels;
  std::size_t k = 0;
  for (const auto& [phase, iocs] : repo.narrative())
    for (const auto* r : iocs) labels.emplace(r->node_uuid, fmt::format("IOC-{}", ++k));
  return labels;
}

std::string ref_text(const std::string& ref, const std::map<std::string, std::string>& labels) {
  if (const auto it = labels.find(ref); it != labels.end()) return it->second;
  if (const auto phase = parse_phase(ref)) return fmt::format("{} ({})", to_string(*phase), phase_title(*phase));
  return "a dismissed finding";
}

std::string fallback_summary(const InvestigationRepository& repo) {
  std::vector<std::string> phases;
  for (const auto& [phase, iocs] : repo.narrative())
    if (phase != KillChainPhase::UNASSIGNED) phases.emplace_back(phase_title(phase));
  const auto n = repo.validated().size();
  std::string s = fmt::format("{} validated indicator{} of compromise", n, n == 1 ? "" : "s");
  if (!phases.empty()) s += fmt::format(" spanning {}", fmt::join(phases, ", "));
  s += ".";
  if (repo.budget_exhausted) s += " The investigation stopped on its budget; coverage may be partial.";
  return s;
}

using Edge = std::pair<std::string, std::string>;

std::set<Edge> attack_edges(const InvestigationRepository& repo) {
  std::set<std::string> validated;
  for (const auto* r : repo.validated()) validated.insert(r->node_uuid);
  std::set<Edge> edges;
  for (const auto* r : repo.validated())
    for (const auto& src : r->related_ioc_refs)
      if (validated.contains(src) && src != r->node_uuid) edges.emplace(src, r->node_uuid);
  for (const auto& [uuid, ev] : repo.evidence)
    for (const auto& e : ev)
      if (e.src != e.dst && validated.contains(e.src) && validated.contains(e.dst)) edges.emplace(e.src, e.dst);
  return edges;
}

}  // namespace

json reporter_payload(const InvestigationRepository& repo) {
  const auto labels = ioc_labels(repo);
  json narrative = json::array();
  for (const auto& [phase, iocs] : repo.narrative()) {
    for (const auto* r : iocs) {
      json related = json::array();
      for (const auto& ref : r->related_ioc_refs) related.push_back(ref_text(ref, labels));
      narrative.push_back({{"ioc", labels.at(r->node_uuid)},
                           {"kill_chain_phase", std::string(to_string(phase))},
                           {"identity", r->identity},
                           {"event", r->event},
                           {"confidence", r->confidence},
                           {"related", related}});
    }
  }
  json hyps = json::array();
  for (const auto& h : repo.hypotheses)
    hyps.push_back({{"kind", std::string(to_string(h.kind))},
                    {"statement", h.statement},
                    {"status", std::string(to_string(h.status))}});
  return {{"task", "report"},
          {"narrative", narrative},
          {"hypotheses", hyps},
          {"dismissed", repo.refuted().size()},
          {"budget_exhausted", repo.budget_exhausted}};
}

InvestigationReport reporter_compose(const InvestigationRepository& repo) {
  const auto labels = ioc_labels(repo);
  const auto validated = repo.validated();
  std::ostringstream md;

  md << "# Incident report\n\n";
  md << fmt::format("Status: {}. Termination: {}. LLM calls: {}. Leader iterations: {}.\n\n",
                    to_string(repo.status), repo.termination_reason.empty() ? "n/a" : repo.termination_reason,
                    repo.llm_calls, repo.iteration);
  if (repo.budget_exhausted) md << "> Budget exhausted before the investigation converged.\n\n";

  md << "## Summary\n\n";
  if (validated.empty()) {
    md << "No incident found. No alert was confirmed as anomalous.\n\n";
  } else {
    md << md_inline(repo.notes ? repo.notes->summary : fallback_summary(repo)) << "\n\n";
    md << "## Attack narrative\n\n";
    for (const auto& [phase, iocs] : repo.narrative()) {
      md << fmt::format("### {} ({})\n\n", phase_title(phase), to_string(phase));
      for (const auto* r : iocs) {
        md << fmt::format("- **{}** `{}` ({}, graph `{}`): {}\n", labels.at(r->node_uuid), r->node_uuid, r->identity,
                          r->graph_name, r->event.empty() ? "event not described" : md_inline(r->event));
        md << fmt::format("  - verdict: ANOMALY, confidence {:.2f}, origin {}\n", r->confidence, to_string(r->origin));
        if (!r->rationale.empty()) md << "  - rationale: " << md_inline(r->rationale) << "\n";
        if (!r->related_ioc_refs.empty()) {
          std::vector<std::string> refs;
          for (const auto& ref : r->related_ioc_refs) refs.push_back(ref_text(ref, labels));
          md << fmt::format("  - related: {}\n", fmt::join(refs, ", "));
        }
      }
      md << "\n";
    }
  }

  if (!repo.hypotheses.empty()) {
    md << "## Hypotheses\n\n";
    for (const auto& h : repo.hypotheses) {
      std::vector<std::string> refs;
      for (const auto& ref : h.target_refs) refs.push_back(ref_text(ref, labels));
      md << fmt::format("- {} [{}; {}] {} (targets: {})\n", h.id, to_string(h.kind), to_string(h.status),
                        md_inline(h.statement), fmt::join(refs, ", "));
    }
    md << "\n";
  }

  if (!validated.empty()) {
    md << "## Remediation\n\n";
    if (repo.notes && !repo.notes->remediation.empty()) {
      for (const auto& item : repo.notes->remediation) md << "- " << md_inline(item) << "\n";
    } else {
      md << "- Isolate the hosts owning the listed IOCs and preserve their audit logs.\n";
      md << "- Review credentials and network access exercised by the affected processes.\n";
    }
    md << "\n";
  }

  const auto refuted = repo.refuted();
  if (!refuted.empty()) {
    md << "## Appendix: dismissed findings\n\n";
    for (const auto* r : refuted)
      md << fmt::format("- `{}` ({}): initially flagged, later judged benign\n", r->node_uuid, r->identity);
    md << "\n";
  }

  InvestigationReport out;
  out.markdown = md.str();

  const auto edges = attack_edges(repo);
  std::ostringstream dot;
  dot << "digraph attack {\n  rankdir=LR;\n  node [shape=box];\n";
  for (const auto* r : validated)
    dot << fmt::format("  \"{}\" [label=\"{}\\n{}\\n{}\"];\n", dot_escape(r->node_uuid), labels.at(r->node_uuid),
                       dot_escape(r->identity), to_string(r->phase));
  for (const auto& [src, dst] : edges) dot << fmt::format("  \"{}\" -> \"{}\";\n", dot_escape(src), dot_escape(dst));
  dot << "}\n";
  out.attack_graph = dot.str();
  out.graph_nodes = validated.size();
  out.graph_edges = edges.size();
  return out;
}

void write_report(const InvestigationReport& report, const std::filesystem::path& markdown_path,
                  const std::filesystem::path& graph_path) {
  for (const auto& [path, text] : {std::pair{markdown_path, &report.markdown}, std::pair{graph_path, &report.attack_graph}}) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << *text;
  }
}

}  // namespace provbind
