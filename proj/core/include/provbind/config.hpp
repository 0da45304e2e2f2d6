#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "provbind/encoder.hpp"
#include "provbind/features.hpp"
#include "provbind/investigation.hpp"
#include "provbind/llm.hpp"

namespace provbind {

enum class LlmBackendKind { mock, http };

std::string_view to_string(LlmBackendKind k) noexcept;
LlmBackendKind parse_llm_backend(std::string_view text);

struct PathsConfig {
  std::filesystem::path artifacts = "artifacts";
  std::filesystem::path kb;       // empty: <artifacts>/kb
  std::filesystem::path reports;  // empty: <artifacts>/reports
  std::vector<std::string> train_graphs{"benign"};
  std::vector<std::string> detect_graphs{"attack"};

  std::filesystem::path graph_prefix(std::string_view name) const { return artifacts / "graphs" / name; }
  std::filesystem::path vocab_prefix() const { return artifacts / "vocab"; }
  std::filesystem::path encoder_prefix() const { return artifacts / "encoder"; }
  std::filesystem::path loss_trace() const { return artifacts / "loss_trace.csv"; }
  std::filesystem::path kb_dir() const { return kb.empty() ? artifacts / "kb" : kb; }
  std::filesystem::path alerts() const { return artifacts / "alerts.jsonl"; }
  std::filesystem::path repository() const { return artifacts / "investigation.json"; }
  std::filesystem::path journal() const { return artifacts / "journal.jsonl"; }
  std::filesystem::path reports_dir() const { return reports.empty() ? artifacts / "reports" : reports; }
};

struct FeatureSettings {
  std::int64_t window_ns = 10'000'000'000;
  std::vector<std::string> operations = OperationVocab::defaults().operations();
  Word2VecConfig word2vec;
};

struct LlmSettings {
  LlmBackendKind backend = LlmBackendKind::mock;
  HttpBackendConfig http;
  std::filesystem::path script;   // scripted backend document for --llm mock
  std::filesystem::path prompts;  // optional prompt override directory
};

struct PipelineConfig {
  PathsConfig paths;
  FeatureSettings features;
  TrainConfig encoder;
  double epsilon = 0.02;
  std::uint64_t seed = 7;
  InvestigationBudget budget;
  std::size_t similar_k = 3;
  LlmSettings llm;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;

  /// Propagates the global seed into the module configs.
  void apply_seed(std::uint64_t s);
};

/// Reads a YAML config file over the defaults. Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view yaml_text);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// PROVBIND_LLM_BACKEND, PROVBIND_LLM_ENDPOINT, PROVBIND_LLM_MODEL,
/// PROVBIND_LLM_API_KEY, PROVBIND_SEED, PROVBIND_EPSILON.
void apply_env_overrides(PipelineConfig& config, const EnvLookup& lookup);
void apply_env_overrides(PipelineConfig& config);

}  // namespace provbind
