#pragma once

#include <filesystem>
#include <string>

#include "provbind/repository.hpp"

namespace provbind {

struct InvestigationReport {
  std::string markdown;
  std::string attack_graph;  // Graphviz DOT
  std::size_t graph_nodes = 0;
  std::size_t graph_edges = 0;
};

/// Markdown report plus attack graph. Each validated IOC is listed exactly
/// once in the phase-ordered narrative; refuted IOCs only appear in the
/// dismissed-findings appendix.
InvestigationReport reporter_compose(const InvestigationRepository& repo);

/// Structured input for the reporter model.
nlohmann::json reporter_payload(const InvestigationRepository& repo);

void write_report(const InvestigationReport& report, const std::filesystem::path& markdown_path,
                  const std::filesystem::path& graph_path);

}  // namespace provbind
