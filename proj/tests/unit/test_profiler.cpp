#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "provbind/error.hpp"
#include "provbind/profiler.hpp"
#include "provbind/random.hpp"
#include "support.hpp"

using namespace provbind;

namespace {

Vec random_vec(Rng& rng, std::size_t d) {
  Vec v(d);
  for (auto& x : v) x = rng.uniform(-3.0, 3.0);
  return v;
}

// Graph of `per` nginx and `per` sshd processes plus their files; embeddings
// are supplied directly so the profiler is tested without an encoder.
struct Fixture {
  std::vector<ProvenanceGraph> graphs;
  std::vector<std::map<std::string, Vec>> embeddings;
};

Fixture fixture(std::size_t per, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawEvent> evs;
  for (std::size_t i = 0; i < per; ++i) {
    auto a = testing::event("ng" + std::to_string(i), "f:index", "READ", static_cast<std::int64_t>(i));
    a.subject_attrs = {{"name", "nginx"}};
    a.object_attrs = {{"path", "/srv/index.html"}};
    auto b = testing::event("ss" + std::to_string(i), "f:shadow", "READ", static_cast<std::int64_t>(i));
    b.subject_attrs = {{"name", "sshd"}};
    b.object_attrs = {{"path", "/etc/shadow"}};
    evs.push_back(a);
    evs.push_back(b);
  }
  Fixture f;
  f.graphs.push_back(build_graph(evs, 10, "day1"));
  std::map<std::string, Vec> z;
  for (const auto& [uuid, n] : f.graphs[0].nodes()) {
    Vec v = random_vec(rng, 3);
    if (n.identity.text() == "subject::nginx") v[0] += 10;
    z.emplace(uuid, v);
  }
  f.embeddings.push_back(z);
  return f;
}

}  // namespace

TEST_CASE("centroid is the arithmetic mean") {
  const std::vector<Vec> m{{0, 0}, {2, 2}};
  CHECK(compute_centroid(m) == Vec{1, 1});
  const std::vector<Vec> one{{4, -1, 2}};
  CHECK(compute_centroid(one) == one[0]);
  const std::vector<Vec> none;
  CHECK_THROWS_AS(compute_centroid(none), ConfigError);
}

TEST_CASE("radius is the covering order statistic") {
  std::vector<double> d;
  for (int i = 1; i <= 10; ++i) d.push_back(i);
  CHECK(radius_from_distances(d, 0.2) == 8.0);
  CHECK(radius_from_distances(d, 0.0) == 10.0);
  CHECK(radius_from_distances(d, 0.05) == 10.0);
  CHECK(radius_from_distances(d, 0.1) == 9.0);
  CHECK(radius_from_distances({0.0}, 0.5) == 0.0);
  CHECK_THROWS_AS(radius_from_distances(d, 1.0), ConfigError);
  CHECK_THROWS_AS(radius_from_distances(d, -0.1), ConfigError);
}

TEST_CASE("radius agrees with a scan over candidate radii") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + rng.below(40);
    std::vector<Vec> members;
    for (std::uint64_t i = 0; i < n; ++i) members.push_back(random_vec(rng, 2));
    const double eps = rng.uniform(0.0, 0.5);
    const auto mu = compute_centroid(members);
    const double r = compute_radius(members, mu, eps);

    std::vector<double> dist;
    for (const auto& m : members) dist.push_back(euclidean_distance(m, mu));
    std::sort(dist.begin(), dist.end());
    double best = dist.back();
    for (const double cand : dist) {
      const auto inside = std::count_if(dist.begin(), dist.end(), [&](double x) { return x <= cand; });
      if (static_cast<double>(inside) >= (1.0 - eps) * static_cast<double>(n) - 1e-12) {
        best = cand;
        break;
      }
    }
    CHECK(r == best);
  }
}

TEST_CASE("a lone member at its centroid has zero radius") {
  const std::vector<Vec> m{{1.5, 2.5}};
  const auto p = build_profile(IdentityLabel("file::x"), m, 0.02);
  CHECK(p.radius == 0.0);
  CHECK(p.count == 1);
}

TEST_CASE("profiles do not depend on member order") {
  Rng rng(12);
  std::vector<Vec> m;
  for (int i = 0; i < 25; ++i) m.push_back(random_vec(rng, 4));
  const auto p = build_profile(IdentityLabel("subject::a"), m, 0.1);
  std::reverse(m.begin(), m.end());
  const auto q = build_profile(IdentityLabel("subject::a"), m, 0.1);
  CHECK(p.radius == q.radius);
  for (std::size_t k = 0; k < 4; ++k) CHECK(p.centroid[k] == doctest::Approx(q.centroid[k]).epsilon(1e-14));
}

TEST_CASE("knowledge base groups members by identity") {
  const auto f = fixture(5, 1);
  const auto kb = build_knowledge_base(f.graphs, f.embeddings, 0.2);
  REQUIRE(kb.profiles().size() == 4);
  CHECK(kb.profile(IdentityLabel("subject::nginx"))->count == 5);
  CHECK(kb.profile(IdentityLabel("subject::sshd"))->count == 5);
  CHECK(kb.profile(IdentityLabel("file::shadow"))->count == 1);
  CHECK(kb.members().size() == 12);
  CHECK(kb.dim() == 3);
  for (const auto& m : kb.members()) CHECK(kb.find_metadata(m.uuid) != nullptr);
  CHECK(kb.find_metadata("ng0")->edge_summaries.size() == 1);
  CHECK(kb.find_metadata("ng0")->edge_summaries[0].starts_with("out READ file::index.html x1"));

  for (const auto& [label, prof] : kb.profiles()) {
    std::size_t outside = 0;
    for (const auto& m : kb.members())
      if (m.label == label && euclidean_distance(m.z, prof.centroid) > prof.radius) ++outside;
    CHECK(outside <= static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(prof.count))));
  }
}

TEST_CASE("an empty graph set is a configuration error") {
  const std::vector<ProvenanceGraph> none;
  const std::vector<std::map<std::string, Vec>> nz;
  CHECK_THROWS_AS(build_knowledge_base(none, nz, 0.02), ConfigError);
}

TEST_CASE("knn matches an exhaustive scan") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto f = fixture(1 + rng.below(12), 100 + trial);
    const auto kb = build_knowledge_base(f.graphs, f.embeddings, 0.02);
    const auto q = random_vec(rng, 3);
    const auto k = 1 + rng.below(6);
    const auto got = knn_query(kb, q, k);

    std::vector<std::pair<double, std::string>> all;
    for (const auto& m : kb.members()) all.emplace_back(euclidean_distance(m.z, q), m.uuid);
    std::sort(all.begin(), all.end());
    REQUIRE(got.size() == std::min<std::size_t>(k, all.size()));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].uuid == all[i].second);
      CHECK(got[i].distance == all[i].first);
    }
  }
}

TEST_CASE("knn edge cases") {
  const auto f = fixture(3, 2);
  const auto kb = build_knowledge_base(f.graphs, f.embeddings, 0.02);
  const auto& stored = kb.members()[2];
  const auto hit = knn_query(kb, stored.z, 1);
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].uuid == stored.uuid);
  CHECK(hit[0].distance == 0.0);
  CHECK(knn_query(kb, stored.z, 100).size() == kb.members().size());
  CHECK(knn_query(BenignKnowledgeBase{}, stored.z, 3).empty());
}

TEST_CASE("attribute query ranks exact identities first") {
  const auto f = fixture(3, 3);
  const auto kb = build_knowledge_base(f.graphs, f.embeddings, 0.02);
  const auto exact = attribute_query(kb, "subject::nginx");
  REQUIRE(exact.size() >= 3);
  CHECK(std::vector<std::string>(exact.begin(), exact.begin() + 3) == std::vector<std::string>{"ng0", "ng1", "ng2"});
  CHECK(attribute_query(kb, "no-such-thing").empty());
  const auto sub = attribute_query(kb, "NGIN");
  CHECK(std::find(sub.begin(), sub.end(), "ng1") != sub.end());
  const auto path = attribute_query(kb, "/etc/sha");
  CHECK(std::find(path.begin(), path.end(), "f:shadow") != path.end());
}

TEST_CASE("embedding export round-trips exactly") {
  testing::TempDir dir;
  const auto f = fixture(1, 5);
  const auto kb = build_knowledge_base(f.graphs, f.embeddings, 0.02);
  export_embeddings(kb, dir / "e.csv");
  const auto rows = read_embeddings_csv(dir / "e.csv");
  REQUIRE(rows.size() == kb.members().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].uuid == kb.members()[i].uuid);
    CHECK(rows[i].z == kb.members()[i].z);
  }
  export_embeddings(BenignKnowledgeBase{}, dir / "empty.csv");
  CHECK(read_embeddings_csv(dir / "empty.csv").empty());
}

TEST_CASE("knowledge base persists byte-identically") {
  testing::TempDir dir;
  const auto f = fixture(4, 6);
  const auto kb = build_knowledge_base(f.graphs, f.embeddings, 0.05);
  write_knowledge_base(kb, dir / "a");
  const auto back = read_knowledge_base(dir / "a");
  CHECK(back.profiles() == kb.profiles());
  CHECK(back.epsilon() == kb.epsilon());
  write_knowledge_base(back, dir / "b");
  for (const char* file : {"profiles.json", "members.json", "embeddings.bin", "metadata.jsonl"})
    CHECK(testing::slurp(dir / "a" / file) == testing::slurp(dir / "b" / file));
}
