#include <doctest.h>

#include <cmath>

#include "provbind/error.hpp"
#include "provbind/features.hpp"
#include "provbind/linalg.hpp"
#include "provbind/random.hpp"
#include "support.hpp"

using namespace provbind;
using testing::event;

namespace {

// Vocabulary with hand-set rows, bypassing training.
SemanticVocab fixed_vocab(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  Word2VecConfig cfg;
  cfg.dim = rows.front().second.size();
  std::vector<std::string> tokens;
  std::vector<float> table;
  for (const auto& [t, v] : rows) {
    tokens.push_back(t);
    table.insert(table.end(), v.begin(), v.end());
  }
  return SemanticVocab(cfg, tokens, table);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  Vec x(a.begin(), a.end()), y(b.begin(), b.end());
  return cosine_similarity(x, y);
}

}  // namespace

TEST_CASE("summary of an isolated node is its identity") {
  const Entity cat{"c", EntityKind::subject, {{"name", "cat"}}, IdentityLabel("subject::cat")};
  const ProvenanceGraph g("g", {{"c", cat}}, {}, 0, 0);
  CHECK(build_node_summary(cat, g) == TokenSequence{"subject::cat"});
}

TEST_CASE("summary lists incident operations in temporal order") {
  const std::vector<RawEvent> evs{event("s", "f", "READ", 5), event("s", "f", "WRITE", 1)};
  const auto g = build_graph(evs, 1);
  CHECK(build_node_summary(*g.find("s"), g) == TokenSequence{"subject::proc", "WRITE", "READ"});
}

TEST_CASE("aggregated edges contribute one token each") {
  // Three READ aggregates separated by more than the window, plus one merged pair.
  const std::vector<RawEvent> evs{event("s", "f", "READ", 0), event("s", "f", "READ", 1), event("s", "f", "READ", 100),
                                  event("s", "g", "OPEN", 50), event("s", "f", "READ", 200)};
  const auto g = build_graph(evs, 10);
  CHECK(build_node_summary(*g.find("s"), g) == TokenSequence{"subject::proc", "READ", "OPEN", "READ", "READ"});
}

TEST_CASE("skip-gram places co-occurring tokens closer") {
  std::vector<TokenSequence> corpus;
  for (int i = 0; i < 200; ++i) {
    corpus.push_back({"A", "B", "A", "B"});
    corpus.push_back({"C", "D", "C", "D"});
  }
  Word2VecConfig cfg;
  cfg.dim = 16;
  cfg.window = 2;
  cfg.epochs = 10;
  const auto vocab = train_semantic_vocab(corpus, cfg);
  CHECK(cosine(vocab.lookup("A"), vocab.lookup("B")) > cosine(vocab.lookup("A"), vocab.lookup("C")));
}

TEST_CASE("single-token corpus yields one finite vector") {
  const std::vector<TokenSequence> corpus{{"only"}};
  const auto vocab = train_semantic_vocab(corpus, Word2VecConfig{});
  REQUIRE(vocab.size() == 1);
  for (const float x : vocab.lookup("only")) CHECK(std::isfinite(x));
}

TEST_CASE("vocabulary training is reproducible and persists bit-exactly") {
  std::vector<TokenSequence> corpus{{"subject::a", "READ", "WRITE"}, {"file::b", "READ"}, {"subject::a", "SEND"}};
  const auto v1 = train_semantic_vocab(corpus, Word2VecConfig{});
  const auto v2 = train_semantic_vocab(corpus, Word2VecConfig{});
  CHECK(v1 == v2);

  testing::TempDir dir;
  write_vocab(v1, OperationVocab::defaults(), dir / "vocab");
  const auto back = read_vocab(dir / "vocab");
  CHECK(back.vocab == v1);
  CHECK(back.ops == OperationVocab::defaults());
}

TEST_CASE("empty corpus is a configuration error") {
  const std::vector<TokenSequence> corpus;
  CHECK_THROWS_AS(train_semantic_vocab(corpus, Word2VecConfig{}), ConfigError);
}

TEST_CASE("semantic encoding is the mean of in-vocabulary rows") {
  const auto vocab = fixed_vocab({{"subject::proc", {1.0f, 2.0f}}, {"READ", {3.0f, -2.0f}}});
  const std::vector<RawEvent> one{event("s", "f", "READ", 1)};
  const auto g = build_graph(one, 10);
  const auto x = semantic_encode(*g.find("s"), g, vocab);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(x[1] == doctest::Approx(0.0));

  // The file node's identity is OOV: (0 + READ) / 2.
  const auto xf = semantic_encode(*g.find("f"), g, vocab);
  CHECK(xf[0] == doctest::Approx(1.5));
  CHECK(xf[1] == doctest::Approx(-1.0));

  const Entity lone{"z", EntityKind::subject, {}, IdentityLabel("subject::proc")};
  const ProvenanceGraph solo("g", {{"z", lone}}, {}, 0, 0);
  CHECK(semantic_encode(lone, solo, vocab) == Vec{1.0, 2.0});

  const auto empty = fixed_vocab({{"other", {1.0f, 1.0f}}});
  CHECK(semantic_encode(lone, solo, empty) == Vec{0.0, 0.0});
}

TEST_CASE("action counts are l2-normalised") {
  const std::vector<double> c1{3, 4};
  const auto a = normalize_counts(c1);
  CHECK(a[0] == doctest::Approx(0.6));
  CHECK(a[1] == doctest::Approx(0.8));
  const std::vector<double> c2{5, 0, 0};
  CHECK(normalize_counts(c2) == Vec{1, 0, 0});
  const std::vector<double> c3{0, 0, 0};
  CHECK(normalize_counts(c3) == Vec{0, 0, 0});
}

TEST_CASE("action vectors have unit norm whenever the node has events") {
  Rng rng(5);
  const std::vector<std::string> ops{"READ", "WRITE", "SEND", "RECV", "OPEN"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawEvent> evs;
    const auto n = 1 + rng.below(30);
    for (std::uint64_t i = 0; i < n; ++i)
      evs.push_back(event("s" + std::to_string(rng.below(3)), "f" + std::to_string(rng.below(3)), ops[rng.below(5)],
                          static_cast<std::int64_t>(rng.below(1000))));
    const auto g = build_graph(evs, 20);
    for (const auto& [uuid, node] : g.nodes())
      CHECK(l2_norm(action_frequency_encode(node, g, OperationVocab::defaults())) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("action counts use aggregated edge weights") {
  const std::vector<RawEvent> evs{event("s", "f", "READ", 0), event("s", "f", "READ", 1), event("s", "f", "READ", 2),
                                  event("s", "g", "WRITE", 3), event("s", "g", "WRITE", 4), event("s", "g", "WRITE", 5),
                                  event("s", "g", "WRITE", 6)};
  const auto g = build_graph(evs, 100);
  const OperationVocab ops({"READ", "WRITE"});
  const auto x = action_frequency_encode(*g.find("s"), g, ops);
  CHECK(x[0] == doctest::Approx(0.6));
  CHECK(x[1] == doctest::Approx(0.8));
}

TEST_CASE("temporal encoding of idle periods") {
  CHECK(temporal_encode_timestamps({0, 10, 30}) == Vec{0.0, 1.0, 0.5});
  CHECK(temporal_encode_timestamps({0, 10, 20}) == Vec{0.0, 0.0, 0.0});
  CHECK(temporal_encode_timestamps({7}) == Vec{0.0, 0.0, 0.0});
  CHECK(temporal_encode_timestamps({}) == Vec{0.0, 0.0, 0.0});
  CHECK(temporal_encode_timestamps({30, 0, 10}) == Vec{0.0, 1.0, 0.5});
}

TEST_CASE("temporal encoding stays inside the unit cube") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> ts;
    const auto n = rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) ts.push_back(static_cast<std::int64_t>(rng.below(1'000'000)));
    const auto x = temporal_encode_timestamps(ts);
    for (const double v : x) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (x != Vec{0, 0, 0}) {
      CHECK(x[0] == 0.0);
      CHECK(x[1] == 1.0);
    }
  }
}

TEST_CASE("h0 concatenates the three encodings") {
  const auto vocab = fixed_vocab({{"subject::proc", {0.1f, 0.2f}}});
  const std::vector<RawEvent> evs{event("s", "f", "READ", 0), event("s", "f", "READ", 10), event("s", "g", "WRITE", 30)};
  const auto g = build_graph(evs, 5);
  const OperationVocab ops({"READ", "WRITE"});
  const auto f = initial_features(*g.find("s"), g, vocab, ops);
  REQUIRE(f.h0.size() == feature_dim(vocab, ops));
  Vec expect = f.x_sem;
  expect.insert(expect.end(), f.x_act.begin(), f.x_act.end());
  expect.insert(expect.end(), f.x_tmp.begin(), f.x_tmp.end());
  CHECK(f.h0 == expect);
  CHECK(f.x_tmp == Vec{0.0, 1.0, 0.5});
}

TEST_CASE("features do not depend on input event order") {
  std::vector<RawEvent> evs;
  Rng rng(3);
  for (int i = 0; i < 40; ++i)
    evs.push_back(event("s" + std::to_string(rng.below(4)), "f" + std::to_string(rng.below(5)), i % 3 ? "READ" : "SEND",
                        static_cast<std::int64_t>(rng.below(500))));
  std::vector<TokenSequence> corpus{{"subject::proc", "READ", "SEND"}};
  const auto vocab = train_semantic_vocab(corpus, Word2VecConfig{});
  const auto base = graph_features(build_graph(evs, 25), vocab, OperationVocab::defaults());
  rng.shuffle(evs.begin(), evs.end());
  CHECK(graph_features(build_graph(evs, 25), vocab, OperationVocab::defaults()) == base);
}
