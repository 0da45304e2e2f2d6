#include <doctest.h>

#include <algorithm>

#include "provbind/error.hpp"
#include "provbind/repository.hpp"
#include "support.hpp"

using namespace provbind;
using nlohmann::json;

namespace {

IOCRecord ioc(std::string uuid, KillChainPhase phase, std::uint64_t seq, IocStatus status = IocStatus::validated) {
  IOCRecord r;
  r.node_uuid = std::move(uuid);
  r.graph_name = "g";
  r.identity = "subject::x";
  r.phase = phase;
  r.event = "did something";
  r.confidence = 0.8;
  r.status = status;
  r.admitted_seq = seq;
  return r;
}

InvestigationRepository populated() {
  InvestigationRepository repo;
  repo.log("stage1", "analyst", "verdict", {{"node_uuid", "a"}, {"verdict", "ANOMALY"}});
  repo.log("stage1", "analyst", "verdict", {{"node_uuid", "b"}, {"verdict", "ANOMALY"}});
  repo.log("stage1", "analyst", "verdict", {{"node_uuid", "c"}, {"verdict", "ANOMALY"}});
  repo.iocs.emplace("a", ioc("a", KillChainPhase::CC, 1));
  repo.iocs.emplace("b", ioc("b", KillChainPhase::IC, 2));
  repo.iocs.emplace("c", ioc("c", KillChainPhase::CC, 3));
  repo.iocs.emplace("d", ioc("d", KillChainPhase::DE, 4, IocStatus::refuted));
  repo.iocs["a"].related_ioc_refs = {"b"};
  repo.iocs["c"].origin = IocOrigin::lead;
  repo.iocs["c"].cited_evidence = {"edge 1"};
  repo.hypotheses.push_back({"H1", HypothesisKind::missing_stage, "no recon", {"IR"}, HypothesisStatus::open,
                             {{"g", "e", "look here"}}});
  repo.evidence["a"].insert({"a", "b", "READ", 3, 10, 20});
  repo.processed_alerts = {"g/a"};
  repo.adjudicated = {{"a", "ANOMALY"}};
  repo.completed_stage = 2;
  repo.iteration = 1;
  repo.llm_calls = 7;
  repo.notes = ReportNotes{"sum", {"fix"}};
  return repo;
}

}  // namespace

TEST_CASE("phase codes and titles") {
  for (const auto p : kAllPhases) CHECK(parse_phase(to_string(p)) == p);
  CHECK_FALSE(parse_phase("ZZ"));
  CHECK(phase_title(KillChainPhase::DE) == "Data Exfiltration");
}

TEST_CASE("journal sequence numbers are dense from one") {
  InvestigationRepository repo;
  for (int i = 0; i < 5; ++i) CHECK(repo.log("s", "a", "x", json::object()).seq == static_cast<std::uint64_t>(i + 1));
}

TEST_CASE("narrative groups by kill-chain phase in admission order") {
  const auto repo = populated();
  const auto n = repo.narrative();
  REQUIRE(n.size() == 2);
  CHECK(n[0].first == KillChainPhase::IC);
  CHECK(n[1].first == KillChainPhase::CC);
  REQUIRE(n[1].second.size() == 2);
  CHECK(n[1].second[0]->node_uuid == "a");
  CHECK(n[1].second[1]->node_uuid == "c");
  CHECK(repo.validated().size() == 3);
  CHECK(repo.refuted().size() == 1);
}

TEST_CASE("gatekeeping requires a prior anomaly verdict") {
  auto repo = populated();
  CHECK(repo.gatekeeping_holds());
  repo.iocs.emplace("z", ioc("z", KillChainPhase::LM, 9));
  CHECK_FALSE(repo.gatekeeping_holds());
  repo.log("stage2", "analyst", "verdict", {{"node_uuid", "z"}, {"verdict", "BENIGN"}});
  CHECK_FALSE(repo.gatekeeping_holds());
}

TEST_CASE("repository survives a save/load cycle") {
  testing::TempDir dir;
  const auto repo = populated();
  repo.save(dir / "inv.json");
  const auto back = InvestigationRepository::load(dir / "inv.json");
  CHECK(back.to_json() == repo.to_json());
  back.save(dir / "again.json");
  CHECK(testing::slurp(dir / "inv.json") == testing::slurp(dir / "again.json"));

  repo.write_journal(dir / "journal.jsonl");
  const auto text = testing::slurp(dir / "journal.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(json::parse(text.substr(0, text.find('\n')))["seq"] == 1);
}

TEST_CASE("loading reports missing and corrupt files") {
  testing::TempDir dir;
  CHECK_THROWS_AS(InvestigationRepository::load(dir / "none.json"), MissingArtifactError);
  {
    std::ofstream(dir / "bad.json") << "{]";
  }
  CHECK_THROWS_AS(InvestigationRepository::load(dir / "bad.json"), FormatError);
  auto j = populated().to_json();
  j["iocs"][0]["kill_chain_phase"] = "ZZ";
  CHECK_THROWS_AS(InvestigationRepository::from_json(j), FormatError);
  j = populated().to_json();
  j.erase("journal");
  CHECK_THROWS_AS(InvestigationRepository::from_json(j), FormatError);
}
