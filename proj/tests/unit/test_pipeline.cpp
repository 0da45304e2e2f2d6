#include <doctest.h>

#include "provbind/error.hpp"
#include "provbind/pipeline.hpp"
#include "provbind/synth.hpp"
#include "support.hpp"

using namespace provbind;

namespace {

PipelineConfig config_in(const testing::TempDir& dir) {
  PipelineConfig c;
  c.paths.artifacts = dir / "artifacts";
  c.encoder.epochs = 3;
  c.encoder.output_dim = 8;
  c.features.word2vec.dim = 8;
  return c;
}

void ingest_small(const PipelineConfig& c, const testing::TempDir& dir) {
  write_scenario(generate_scenario(load_scenario(std::filesystem::path(PROVBIND_DATA_DIR) / "scenarios/small.json")),
                 dir / "scenario");
  pipeline::ingest(c, dir / "scenario/benign.jsonl", "benign");
  pipeline::ingest(c, dir / "scenario/attack.jsonl", "attack");
}

}  // namespace

TEST_CASE("steps name the missing upstream artifact") {
  testing::TempDir dir;
  const auto c = config_in(dir);
  try {
    pipeline::detect(c);
    FAIL("detect should need an encoder");
  } catch (const MissingArtifactError& e) {
    CHECK(e.artifact() == "encoder");
  }
  CHECK_THROWS_AS(pipeline::train(c), MissingArtifactError);
  CHECK_THROWS_AS(pipeline::report(c), MissingArtifactError);
  try {
    pipeline::ingest(c, dir / "nothing.jsonl", "x");
    FAIL("ingest should need events");
  } catch (const MissingArtifactError& e) {
    CHECK(e.artifact() == "events");
  }
}

TEST_CASE("zero epochs leave a header-only loss trace") {
  testing::TempDir dir;
  auto c = config_in(dir);
  c.encoder.epochs = 0;
  ingest_small(c, dir);
  const auto r = pipeline::train(c);
  CHECK(r.loss_trace.empty());
  const auto trace = testing::slurp(c.paths.loss_trace());
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 1);
}

TEST_CASE("the full pipeline produces a report") {
  testing::TempDir dir;
  const auto c = config_in(dir);
  ingest_small(c, dir);
  const auto trained = pipeline::train(c);
  CHECK(trained.loss_trace.size() == 3);
  const auto kb = pipeline::profile(c);
  CHECK(kb.profiles().size() > 5);
  CHECK(std::filesystem::exists(c.paths.kb_dir() / "embeddings.csv"));
  const auto alerts = pipeline::detect(c);
  for (std::size_t i = 1; i < alerts.size(); ++i) CHECK(alerts[i - 1].score >= alerts[i].score);
  CHECK(read_alerts(c.paths.alerts()) == alerts);

  auto backend = pipeline::make_backend(c);
  const auto repo = pipeline::investigate(c, *backend, false);
  CHECK(repo.status == InvestigationStatus::completed);
  CHECK(std::filesystem::exists(c.paths.journal()));
  const auto report = pipeline::report(c);
  CHECK_FALSE(report.markdown.empty());
  CHECK(testing::slurp(c.paths.reports_dir() / "report.md") == report.markdown);

  // Resuming a completed investigation changes nothing.
  const auto again = pipeline::investigate(c, *backend, true);
  CHECK(again.llm_calls == repo.llm_calls);
}
