#include <doctest.h>

#include <set>

#include "provbind/error.hpp"
#include "provbind/ingest.hpp"
#include "provbind/synth.hpp"
#include "support.hpp"

using namespace provbind;
using nlohmann::json;

namespace {

json small_spec() {
  return json::parse(R"({
    "seed": 5,
    "identities": [
      {"name": "web", "nodes": 4, "events": 6, "events_jitter": 1,
       "operations": {"READ": 1, "SEND": 1}, "files": ["/srv/a"], "ports": [80]},
      {"name": "db", "nodes": 3, "events": 6, "events_jitter": 1,
       "operations": {"WRITE": 1}, "files": ["/var/db"]}
    ],
    "injections": [{"claimed": "web", "behaves_like": "db", "count": 2}],
    "background": 1
  })");
}

}  // namespace

TEST_CASE("scenario generation honours template counts") {
  const auto spec = parse_scenario(small_spec());
  CHECK(spec.labelled_nodes() == 4 + 3 + 2 + 2);
  const auto s = generate_scenario(spec);
  CHECK(s.labels["nodes"].size() == spec.labelled_nodes());
  REQUIRE(s.labels["anomalies"].size() == 2);
  CHECK(s.labels["anomalies"][0] == "attack:web:x0000");

  std::set<std::string> benign_subjects;
  for (const auto& e : s.benign) {
    benign_subjects.insert(e.subject_uuid);
    CHECK(e.event_id.starts_with("benign-"));
  }
  CHECK(benign_subjects.size() == 7);
  for (std::size_t i = 1; i < s.benign.size(); ++i) CHECK(s.benign[i - 1].timestamp <= s.benign[i].timestamp);

  // Injected processes claim one name but act like the other identity.
  for (const auto& e : s.attack) {
    if (e.subject_uuid.find(":x") == std::string::npos) continue;
    CHECK(e.subject_attrs.at("name") == "web");
    CHECK(e.operation == "WRITE");
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto spec = parse_scenario(small_spec());
  const auto a = generate_scenario(spec);
  const auto b = generate_scenario(spec);
  REQUIRE(a.benign.size() == b.benign.size());
  for (std::size_t i = 0; i < a.benign.size(); ++i) CHECK(format_event_line(a.benign[i]) == format_event_line(b.benign[i]));
  auto other = spec;
  other.seed = 6;
  const auto c = generate_scenario(other);
  CHECK(format_event_line(c.benign.front()) != format_event_line(a.benign.front()));
}

TEST_CASE("written scenarios ingest cleanly") {
  testing::TempDir dir;
  write_scenario(generate_scenario(parse_scenario(small_spec())), dir.path());
  const auto benign = parse_events_file(dir / "benign.jsonl");
  CHECK(benign.skipped == 0);
  const auto g = build_graph(benign.events, kDefaultWindowNs, "benign");
  CHECK(g.find("benign:web:00000")->identity.text() == "subject::web");
  CHECK(json::parse(testing::slurp(dir / "labels.json"))["seed"] == 5);
}

TEST_CASE("shorthand injections rotate through identities") {
  auto j = small_spec();
  j.erase("injections");
  j["injected"] = 3;
  const auto spec = parse_scenario(j);
  std::size_t total = 0;
  for (const auto& inj : spec.injections) {
    CHECK(inj.claimed != inj.behaves_like);
    total += inj.count;
  }
  CHECK(total == 3);
}

TEST_CASE("invalid scenarios are configuration errors") {
  const auto broken = [](auto mutate) {
    auto j = small_spec();
    mutate(j);
    return j;
  };
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["identities"] = json::array(); })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["identities"][0]["operations"] = {{"FORK", 1}}; })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["identities"][1]["operations"] = {{"SEND", 1}}; })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["identities"][0]["ports"] = {70000}; })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["injections"][0]["behaves_like"] = "ghost"; })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["injections"][0]["behaves_like"] = "web"; })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["injected"] = 2; })), ConfigError);
  CHECK_THROWS_AS(parse_scenario(broken([](json& j) { j["identities"][0]["nodes"] = "many"; })), ConfigError);
  testing::TempDir dir;
  {
    std::ofstream(dir / "bad.json") << "{";
  }
  CHECK_THROWS_AS(load_scenario(dir / "bad.json"), ConfigError);
}

TEST_CASE("bundled scenarios parse") {
  for (const char* name : {"default.json", "small.json"}) {
    CAPTURE(name);
    const auto spec = load_scenario(std::filesystem::path(PROVBIND_DATA_DIR) / "scenarios" / name);
    CHECK(spec.identities.size() == 5);
    CHECK_FALSE(spec.injections.empty());
  }
}
