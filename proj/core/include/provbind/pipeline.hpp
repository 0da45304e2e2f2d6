#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "provbind/config.hpp"
#include "provbind/detector.hpp"
#include "provbind/encoder.hpp"
#include "provbind/investigation.hpp"
#include "provbind/llm.hpp"
#include "provbind/profiler.hpp"
#include "provbind/report.hpp"

// Artifact-level steps shared by the command-line tool and the tests. Every
// step reads and writes files under PipelineConfig::paths and throws
// MissingArtifactError when an upstream file is absent.
namespace provbind::pipeline {

struct IngestSummary {
  std::size_t events = 0;
  std::size_t skipped = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
};

IngestSummary ingest(const PipelineConfig& config, const std::filesystem::path& events, const std::string& name);

std::vector<ProvenanceGraph> load_graphs(const PipelineConfig& config, const std::vector<std::string>& names);

TrainResult train(const PipelineConfig& config);

BenignKnowledgeBase profile(const PipelineConfig& config);

std::vector<Alert> detect(const PipelineConfig& config);

/// Mock: scripted backend when llm.script is set, OfflineBackend otherwise.
std::unique_ptr<LlmBackend> make_backend(const PipelineConfig& config);

/// Runs or resumes the investigation over the stored alerts. The repository
/// and journal are written even when the run pauses on a transport error.
InvestigationRepository investigate(const PipelineConfig& config, LlmBackend& backend, bool resume);

InvestigationReport report(const PipelineConfig& config);

}  // namespace provbind::pipeline
