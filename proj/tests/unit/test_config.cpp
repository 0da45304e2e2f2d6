#include <doctest.h>

#include <fstream>

#include "provbind/config.hpp"
#include "provbind/error.hpp"
#include "support.hpp"

using namespace provbind;

namespace {

EnvLookup env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const char* key) -> std::optional<std::string> {
    const auto it = vars.find(key);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST_CASE("defaults are valid") {
  const PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.epsilon == 0.02);
  CHECK(c.encoder.output_dim == 32);
  CHECK(c.encoder.num_layers == 2);
  CHECK(c.encoder.learning_rate == 1e-5);
  CHECK(c.encoder.temperature == 0.1);
  CHECK(c.llm.backend == LlmBackendKind::mock);
  CHECK(c.paths.kb_dir() == std::filesystem::path("artifacts/kb"));
  CHECK(c.paths.reports_dir() == std::filesystem::path("artifacts/reports"));
}

TEST_CASE("YAML overrides every section") {
  const auto c = parse_config(R"(
paths:
  artifacts: out
  kb: out/profiles
  train_graphs: [day1, day2]
features:
  window_ns: 5000
  semantic_dim: 8
  word2vec: {window: 3, epochs: 2}
encoder:
  output_dim: 16
  layers: 3
  epochs: 4
  activation: tanh
  aggregation: sum
epsilon: 0.05
seed: 99
budget:
  max_llm_calls: 12
similar_k: 5
llm:
  backend: http
  endpoint: http://localhost:1/v1
  model: local
)");
  CHECK(c.paths.artifacts == "out");
  CHECK(c.paths.kb_dir() == "out/profiles");
  CHECK(c.paths.train_graphs == std::vector<std::string>{"day1", "day2"});
  CHECK(c.features.window_ns == 5000);
  CHECK(c.features.word2vec.dim == 8);
  CHECK(c.features.word2vec.window == 3);
  CHECK(c.encoder.output_dim == 16);
  CHECK(c.encoder.num_layers == 3);
  CHECK(c.encoder.activation == Activation::tanh);
  CHECK(c.encoder.aggregation == Aggregation::sum);
  CHECK(c.epsilon == 0.05);
  CHECK(c.seed == 99);
  CHECK(c.encoder.seed == 99);
  CHECK(c.budget.max_llm_calls == 12);
  CHECK(c.similar_k == 5);
  CHECK(c.llm.backend == LlmBackendKind::http);
  CHECK(c.llm.http.model == "local");
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("bad configs are rejected") {
  CHECK_THROWS_AS(parse_config("epsilonn: 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("encoder: {depth: 2}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("encoder: {layers: many}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("llm: {backend: carrier-pigeon}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("paths: [a, b]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("a: [\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/provbind.yaml"), ConfigError);

  for (const char* yaml : {"epsilon: 1.0\n", "epsilon: -0.1\n", "encoder: {temperature: 0}\n",
                           "encoder: {batch_size: 1}\n", "budget: {max_llm_calls: 0}\n",
                           "features: {operations: [READ, READ]}\n"}) {
    CAPTURE(yaml);
    CHECK_THROWS_AS(parse_config(yaml).validate(), ConfigError);
  }
}

TEST_CASE("config files load from disk") {
  testing::TempDir dir;
  {
    std::ofstream(dir / "c.yaml") << "seed: 3\n";
  }
  CHECK(load_config(dir / "c.yaml").seed == 3);
}

TEST_CASE("environment overrides the file") {
  auto c = parse_config("seed: 3\nepsilon: 0.1\n");
  apply_env_overrides(c, env({{"PROVBIND_SEED", "11"},
                              {"PROVBIND_EPSILON", "0.3"},
                              {"PROVBIND_LLM_BACKEND", "http"},
                              {"PROVBIND_LLM_MODEL", "m2"}}));
  CHECK(c.seed == 11);
  CHECK(c.features.word2vec.seed == 11);
  CHECK(c.epsilon == 0.3);
  CHECK(c.llm.backend == LlmBackendKind::http);
  CHECK(c.llm.http.model == "m2");

  auto d = PipelineConfig{};
  apply_env_overrides(d, env({}));
  CHECK(d.seed == 7);
  CHECK_THROWS_AS(apply_env_overrides(d, env({{"PROVBIND_SEED", "12abc"}})), ConfigError);
  CHECK_THROWS_AS(apply_env_overrides(d, env({{"PROVBIND_EPSILON", "lots"}})), ConfigError);
  CHECK_THROWS_AS(apply_env_overrides(d, env({{"PROVBIND_LLM_BACKEND", "x"}})), ConfigError);
}
