#include "provbind/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <algorithm>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "provbind/error.hpp"

namespace provbind {

std::string_view to_string(LlmBackendKind k) noexcept { return k == LlmBackendKind::http ? "http" : "mock"; }

LlmBackendKind parse_llm_backend(std::string_view text) {
  if (text == "http") return LlmBackendKind::http;
  if (text == "mock") return LlmBackendKind::mock;
  throw ConfigError(fmt::format("unknown LLM backend '{}' (expected http or mock)", text));
}

namespace {

void check_keys(const YAML::Node& node, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ConfigError(fmt::format("config section '{}' must be a mapping", section));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(fmt::format("unknown config key '{}{}{}'", section, section.empty() ? "" : ".", key));
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, std::string_view section) {
  const auto v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception& ex) {
    throw ConfigError(fmt::format("config key '{}.{}': {}", section, key, ex.msg));
  }
}

void read_path(const YAML::Node& node, const char* key, std::filesystem::path& out, std::string_view section) {
  std::string s;
  read(node, key, s, section);
  if (node[key]) out = s;
}

}  // namespace

PipelineConfig parse_config(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& ex) {
    throw ConfigError(fmt::format("config is not valid YAML: {}", ex.what()));
  }
  PipelineConfig c;
  if (root.IsNull()) return c;
  check_keys(root, "", {"paths", "features", "encoder", "epsilon", "seed", "budget", "similar_k", "llm"});

  read(root, "epsilon", c.epsilon, "");
  read(root, "similar_k", c.similar_k, "");
  if (root["seed"]) {
    std::uint64_t s = 0;
    read(root, "seed", s, "");
    c.apply_seed(s);
  }

  if (const auto p = root["paths"]) {
    check_keys(p, "paths", {"artifacts", "kb", "reports", "train_graphs", "detect_graphs"});
    read_path(p, "artifacts", c.paths.artifacts, "paths");
    read_path(p, "kb", c.paths.kb, "paths");
    read_path(p, "reports", c.paths.reports, "paths");
    read(p, "train_graphs", c.paths.train_graphs, "paths");
    read(p, "detect_graphs", c.paths.detect_graphs, "paths");
  }

  if (const auto f = root["features"]) {
    check_keys(f, "features", {"window_ns", "semantic_dim", "operations", "word2vec"});
    read(f, "window_ns", c.features.window_ns, "features");
    read(f, "semantic_dim", c.features.word2vec.dim, "features");
    read(f, "operations", c.features.operations, "features");
    if (const auto w = f["word2vec"]) {
      check_keys(w, "features.word2vec", {"window", "negatives", "epochs", "learning_rate"});
      read(w, "window", c.features.word2vec.window, "features.word2vec");
      read(w, "negatives", c.features.word2vec.negatives, "features.word2vec");
      read(w, "epochs", c.features.word2vec.epochs, "features.word2vec");
      read(w, "learning_rate", c.features.word2vec.learning_rate, "features.word2vec");
    }
  }

  if (const auto e = root["encoder"]) {
    check_keys(e, "encoder", {"output_dim", "layers", "learning_rate", "epochs", "temperature", "batch_size",
                              "activation", "aggregation"});
    read(e, "output_dim", c.encoder.output_dim, "encoder");
    read(e, "layers", c.encoder.num_layers, "encoder");
    read(e, "learning_rate", c.encoder.learning_rate, "encoder");
    read(e, "epochs", c.encoder.epochs, "encoder");
    read(e, "temperature", c.encoder.temperature, "encoder");
    read(e, "batch_size", c.encoder.batch_size, "encoder");
    std::string s;
    if (e["activation"]) {
      read(e, "activation", s, "encoder");
      c.encoder.activation = parse_activation(s);
    }
    if (e["aggregation"]) {
      read(e, "aggregation", s, "encoder");
      c.encoder.aggregation = parse_aggregation(s);
    }
  }

  if (const auto b = root["budget"]) {
    check_keys(b, "budget", {"max_iterations", "max_leads_per_ioc", "max_hypotheses", "max_llm_calls", "max_alerts",
                             "max_attempts"});
    read(b, "max_iterations", c.budget.max_iterations, "budget");
    read(b, "max_leads_per_ioc", c.budget.max_leads_per_ioc, "budget");
    read(b, "max_hypotheses", c.budget.max_hypotheses, "budget");
    read(b, "max_llm_calls", c.budget.max_llm_calls, "budget");
    read(b, "max_alerts", c.budget.max_alerts, "budget");
    read(b, "max_attempts", c.budget.max_attempts, "budget");
  }

  if (const auto l = root["llm"]) {
    check_keys(l, "llm", {"backend", "endpoint", "model", "api_key", "temperature", "timeout_seconds", "script",
                          "prompts"});
    if (l["backend"]) {
      std::string s;
      read(l, "backend", s, "llm");
      c.llm.backend = parse_llm_backend(s);
    }
    read(l, "endpoint", c.llm.http.endpoint, "llm");
    read(l, "model", c.llm.http.model, "llm");
    read(l, "api_key", c.llm.http.api_key, "llm");
    read(l, "temperature", c.llm.http.temperature, "llm");
    read(l, "timeout_seconds", c.llm.http.timeout_seconds, "llm");
    read_path(l, "script", c.llm.script, "llm");
    read_path(l, "prompts", c.llm.prompts, "llm");
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

void PipelineConfig::apply_seed(std::uint64_t s) {
  seed = s;
  encoder.seed = s;
  features.word2vec.seed = s;
}

void PipelineConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError(fmt::format("epsilon must lie in [0, 1), got {}", epsilon));
  if (features.window_ns <= 0) throw ConfigError("features.window_ns must be positive");
  if (features.word2vec.dim == 0) throw ConfigError("features.semantic_dim must be positive");
  if (features.word2vec.window == 0) throw ConfigError("features.word2vec.window must be positive");
  if (!(features.word2vec.learning_rate > 0.0)) throw ConfigError("features.word2vec.learning_rate must be positive");
  try {
    OperationVocab{features.operations};
  } catch (const Error& ex) {
    throw ConfigError(fmt::format("features.operations: {}", ex.what()));
  }
  if (encoder.output_dim == 0) throw ConfigError("encoder.output_dim must be positive");
  if (encoder.num_layers == 0) throw ConfigError("encoder.layers must be positive");
  if (!(encoder.learning_rate >= 0.0) || !std::isfinite(encoder.learning_rate))
    throw ConfigError("encoder.learning_rate must be a finite non-negative number");
  if (!(encoder.temperature > 0.0)) throw ConfigError("encoder.temperature must be positive");
  if (encoder.batch_size < 2) throw ConfigError("encoder.batch_size must be at least 2");
  if (paths.artifacts.empty()) throw ConfigError("paths.artifacts must not be empty");
  if (paths.train_graphs.empty()) throw ConfigError("paths.train_graphs must name at least one graph");
  if (similar_k == 0) throw ConfigError("similar_k must be positive");
  try {
    budget.validate();
  } catch (const ConfigError& ex) {
    throw ConfigError(fmt::format("budget: {}", ex.what()));
  }
  if (llm.backend == LlmBackendKind::http && llm.http.endpoint.empty())
    throw ConfigError("llm.endpoint is required for the http backend");
}

void apply_env_overrides(PipelineConfig& c, const EnvLookup& lookup) {
  if (const auto v = lookup("PROVBIND_LLM_BACKEND")) c.llm.backend = parse_llm_backend(*v);
  if (const auto v = lookup("PROVBIND_LLM_ENDPOINT")) c.llm.http.endpoint = *v;
  if (const auto v = lookup("PROVBIND_LLM_MODEL")) c.llm.http.model = *v;
  if (const auto v = lookup("PROVBIND_LLM_API_KEY")) c.llm.http.api_key = *v;
  if (const auto v = lookup("PROVBIND_SEED")) {
    try {
      std::size_t used = 0;
      const auto s = std::stoull(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
      c.apply_seed(s);
    } catch (const std::exception&) {
      throw ConfigError("PROVBIND_SEED must be an unsigned integer, got '" + *v + "'");
    }
  }
  if (const auto v = lookup("PROVBIND_EPSILON")) {
    try {
      std::size_t used = 0;
      c.epsilon = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("PROVBIND_EPSILON must be a number, got '" + *v + "'");
    }
  }
}

void apply_env_overrides(PipelineConfig& c) {
  apply_env_overrides(c, [](const char* name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name)) return std::string(v);
    return std::nullopt;
  });
}

}  // namespace provbind
