#include <doctest.h>

#include <regex>

#include "fixtures/mai_fixture.hpp"
#include "provbind/report.hpp"
#include "support.hpp"

using namespace provbind;

namespace {

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

InvestigationRepository investigated() {
  fixtures::MaiHarness h;
  return run_investigation(fixtures::mai_alerts(), h.context());
}

}  // namespace

TEST_CASE("empty investigations report no incident") {
  InvestigationRepository repo;
  repo.status = InvestigationStatus::completed;
  const auto r = reporter_compose(repo);
  CHECK(r.markdown.starts_with("# Incident report"));
  CHECK(r.markdown.find("No incident found") != std::string::npos);
  CHECK(r.markdown.find("## Attack narrative") == std::string::npos);
  CHECK(r.graph_nodes == 0);
  CHECK(r.attack_graph == "digraph attack {\n  rankdir=LR;\n  node [shape=box];\n}\n");
}

TEST_CASE("each validated IOC appears exactly once in the narrative") {
  const auto repo = investigated();
  const auto r = reporter_compose(repo);
  for (const char* uuid : {"A", "B", "C"}) CHECK(occurrences(r.markdown, std::string("`") + uuid + "`") == 1);
  CHECK(occurrences(r.markdown, "`D`") == 0);
  CHECK(occurrences(r.markdown, "`E`") == 0);
  // Kill-chain order.
  const auto ic = r.markdown.find("(IC)");
  const auto cc = r.markdown.find("(CC)");
  const auto de = r.markdown.find("(DE)");
  CHECK(ic < cc);
  CHECK(cc < de);
  CHECK(r.markdown.find("**IOC-1** `A`") != std::string::npos);
  CHECK(r.markdown.find("related: IOC-1") != std::string::npos);
  CHECK(r.markdown.find("Rotate credentials") != std::string::npos);
  CHECK(r.markdown.find("## Hypotheses") != std::string::npos);
}

TEST_CASE("attack graph links causally related IOCs") {
  const auto r = reporter_compose(investigated());
  CHECK(r.graph_nodes == 3);
  CHECK(r.attack_graph.find("\"A\" -> \"B\"") != std::string::npos);
  CHECK(r.attack_graph.find("\"B\" -> \"C\"") != std::string::npos);
  CHECK(r.attack_graph.find("\"D\"") == std::string::npos);
}

TEST_CASE("refuted IOCs move to the appendix") {
  auto repo = investigated();
  repo.iocs.at("B").status = IocStatus::refuted;
  const auto r = reporter_compose(repo);
  const auto appendix = r.markdown.find("## Appendix: dismissed findings");
  REQUIRE(appendix != std::string::npos);
  CHECK(occurrences(r.markdown, "`B`") == 1);
  CHECK(r.markdown.find("`B`") > appendix);
  CHECK(r.markdown.find("a dismissed finding") != std::string::npos);
}

TEST_CASE("without reporter notes a summary is derived") {
  auto repo = investigated();
  repo.notes.reset();
  const auto r = reporter_compose(repo);
  CHECK(r.markdown.find("3 validated indicators of compromise spanning Initial Compromise") != std::string::npos);
  const auto payload = reporter_payload(repo);
  CHECK(payload["narrative"].size() == 3);
  CHECK(payload["narrative"][0]["ioc"] == "IOC-1");
}

TEST_CASE("report files are written") {
  testing::TempDir dir;
  const auto r = reporter_compose(investigated());
  write_report(r, dir / "reports/report.md", dir / "reports/attack_graph.dot");
  CHECK(testing::slurp(dir / "reports/report.md") == r.markdown);
  CHECK(testing::slurp(dir / "reports/attack_graph.dot") == r.attack_graph);
}
