#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "provbind/detector.hpp"
#include "provbind/error.hpp"
#include "provbind/random.hpp"
#include "support.hpp"

using namespace provbind;

namespace {

std::map<IdentityLabel, IdentityProfile> two_profiles() {
  std::map<IdentityLabel, IdentityProfile> p;
  p[IdentityLabel("subject::a")] = {IdentityLabel("subject::a"), {0, 0}, 2.0, 10};
  p[IdentityLabel("subject::b")] = {IdentityLabel("subject::b"), {10, 0}, 1.0, 10};
  return p;
}

}  // namespace

TEST_CASE("nearest prototype picks the closest centroid") {
  const auto p = two_profiles();
  const std::vector<double> z{1, 0};
  CHECK(nearest_prototype(z, p).label.text() == "subject::a");
  const std::vector<double> mid{5, 0};
  const auto m = nearest_prototype(mid, p);
  CHECK(m.label.text() == "subject::a");
  CHECK(m.distance == 5.0);
  CHECK_THROWS_AS(nearest_prototype(z, {}), ConfigError);
}

TEST_CASE("nearest prototype matches a brute-force scan") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<IdentityLabel, IdentityProfile> p;
    for (int c = 0; c < 10; ++c) {
      IdentityLabel l("subject::p" + std::to_string(c));
      p[l] = {l, {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)}, 1.0, 3};
    }
    const std::vector<double> z{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    std::string best;
    double best_d = 1e300;
    for (const auto& [l, prof] : p) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += (z[k] - prof.centroid[k]) * (z[k] - prof.centroid[k]);
      if (std::sqrt(s) < best_d) {
        best_d = std::sqrt(s);
        best = l.text();
      }
    }
    const auto m = nearest_prototype(z, p);
    CHECK(m.label.text() == best);
    CHECK(m.distance == doctest::Approx(best_d).epsilon(1e-12));
  }
}

TEST_CASE("detect_node applies both criteria") {
  const auto p = two_profiles();
  const IdentityLabel a("subject::a");
  const std::vector<double> inside{1, 0};
  CHECK_FALSE(detect_node(inside, a, p));

  // Outside a's sphere but still closest to a.
  const std::vector<double> far{-3, 0};
  const auto dev = detect_node(far, a, p);
  REQUIRE(dev);
  CHECK(dev->violation == Violation::deviation);
  CHECK(dev->score == doctest::Approx(0.5));

  // Inside a's (enlarged) sphere but closer to b.
  auto wide = p;
  wide[a].radius = 7.0;
  const std::vector<double> near_b{6, 0};
  const auto mis = detect_node(near_b, a, wide);
  REQUIRE(mis);
  CHECK(mis->violation == Violation::mismatch);
  CHECK(mis->matched.text() == "subject::b");
  CHECK(mis->score == doctest::Approx(1.0));

  const std::vector<double> at_b{10, 0};
  const auto both = detect_node(at_b, a, p);
  REQUIRE(both);
  CHECK(both->violation == Violation::both);
  CHECK(both->score == doctest::Approx((10.0 - 2.0) / (2.0 + 1e-9) + 1.0));
  CHECK(both->explanation.find("subject::b") != std::string::npos);

  const auto unknown = detect_node(inside, IdentityLabel("subject::zzz"), p);
  REQUIRE(unknown);
  CHECK(unknown->violation == Violation::unknown_identity);
  CHECK_FALSE(unknown->radius);
  CHECK(unknown->score == 2.0);
}

TEST_CASE("violation kinds stay consistent with the geometry") {
  Rng rng(9);
  const auto p = two_profiles();
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<double> z{rng.uniform(-5, 15), rng.uniform(-5, 5)};
    const IdentityLabel claimed(trial % 2 ? "subject::a" : "subject::b");
    const auto& prof = p.at(claimed);
    const double d = euclidean_distance(z, prof.centroid);
    const bool dev = d > prof.radius;
    const bool mis = nearest_prototype(z, p).label != claimed;
    const auto alert = detect_node(z, claimed, p);
    CHECK(alert.has_value() == (dev || mis));
    if (!alert) continue;
    CHECK(alert->score >= 0.0);
    CHECK(*alert->deviation == d);
    if (dev && mis) CHECK(alert->violation == Violation::both);
    if (dev && !mis) CHECK(alert->violation == Violation::deviation);
    if (!dev && mis) CHECK(alert->violation == Violation::mismatch);
  }
}

TEST_CASE("a node whose embedding sits in another identity's cluster alerts") {
  std::vector<RawEvent> evs;
  for (int i = 0; i < 4; ++i) {
    auto e = testing::event("a" + std::to_string(i), "fa", "READ", i);
    e.subject_attrs = {{"name", "a"}};
    evs.push_back(e);
    auto f = testing::event("b" + std::to_string(i), "fb", "READ", i);
    f.subject_attrs = {{"name", "b"}};
    evs.push_back(f);
  }
  const auto g = build_graph(evs, 10, "train");
  std::map<std::string, Vec> z;
  for (const auto& [uuid, n] : g.nodes()) z[uuid] = uuid[0] == 'a'   ? Vec{0.0, 0.1 * (uuid.back() - '0')}
                                    : uuid[0] == 'b' ? Vec{5.0, 0.0}
                                                     : Vec{-5.0, 5.0};
  const std::vector<ProvenanceGraph> gs{g};
  const std::vector<std::map<std::string, Vec>> zs{z};
  const auto kb = build_knowledge_base(gs, zs, 0.0);

  // Re-detecting the training data flags nothing on criterion 1.
  for (const auto& al : detect_embeddings(g, z, kb)) CHECK(al.violation != Violation::deviation);

  auto tampered = z;
  tampered["a1"] = z["b1"];
  const auto alerts = detect_embeddings(g, tampered, kb);
  const auto hit = std::find_if(alerts.begin(), alerts.end(), [](const Alert& a) { return a.node_uuid == "a1"; });
  REQUIRE(hit != alerts.end());
  CHECK(hit->matched.text() == "subject::b");
  CHECK((hit->violation == Violation::mismatch || hit->violation == Violation::both));

  for (std::size_t i = 1; i < alerts.size(); ++i) CHECK(alerts[i - 1].score >= alerts[i].score);
  CHECK(detect_embeddings(ProvenanceGraph{}, {}, kb).empty());
}

TEST_CASE("alerts round-trip through JSONL") {
  testing::TempDir dir;
  const auto p = two_profiles();
  std::vector<Alert> alerts;
  const std::vector<double> z1{10, 0}, z2{0.3, 0.1};
  alerts.push_back(*detect_node(z1, IdentityLabel("subject::a"), p));
  alerts.push_back(*detect_node(z2, IdentityLabel("subject::new"), p));
  alerts[0].node_uuid = "n1";
  alerts[0].graph_name = "g";
  alerts[1].node_uuid = "n2";
  alerts[1].graph_name = "g";
  write_alerts(alerts, dir / "alerts.jsonl");
  CHECK(read_alerts(dir / "alerts.jsonl") == alerts);
  CHECK(parse_alert_line(format_alert_line(alerts[1])) == alerts[1]);

  std::ostringstream table;
  print_alert_table(alerts, table);
  CHECK(table.str().find("n1") != std::string::npos);
  CHECK(table.str().find("unknown_identity") != std::string::npos);
}
