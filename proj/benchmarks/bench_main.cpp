#include <benchmark/benchmark.h>

#include <fmt/format.h>

#include "provbind/detector.hpp"
#include "provbind/encoder.hpp"
#include "provbind/ingest.hpp"
#include "provbind/profiler.hpp"
#include "provbind/random.hpp"

using namespace provbind;

namespace {

std::vector<RawEvent> random_events(std::size_t n, std::size_t procs, std::uint64_t seed) {
  Rng rng(seed);
  static const char* ops[] = {"READ", "WRITE", "OPEN", "CLOSE", "EXECUTE"};
  std::vector<RawEvent> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RawEvent e;
    e.event_id = fmt::format("e{}", i);
    const auto p = rng.below(procs);
    e.subject_uuid = fmt::format("p{}", p);
    e.subject_attrs = {{"name", fmt::format("proc{}", p % 8)}};
    const auto f = rng.below(procs * 2);
    e.object_uuid = fmt::format("f{}", f);
    e.object_kind = EntityKind::file;
    e.object_attrs = {{"path", fmt::format("/data/file{}", f % 16)}};
    e.operation = ops[rng.below(5)];
    e.timestamp = static_cast<std::int64_t>(rng.below(3'600'000'000'000ULL));
    out.push_back(std::move(e));
  }
  return out;
}

BenignKnowledgeBase random_kb(std::size_t members, std::size_t dim, std::size_t identities) {
  Rng rng(5);
  std::map<std::string, std::vector<Vec>> groups;
  std::vector<KbMember> m;
  std::map<std::string, KbMetadata> meta;
  for (std::size_t i = 0; i < members; ++i) {
    Vec z(dim);
    for (auto& x : z) x = rng.uniform(-1.0, 1.0);
    const auto label = fmt::format("subject::id{}", i % identities);
    groups[label].push_back(z);
    m.push_back({fmt::format("n{:06}", i), "g", IdentityLabel(label), z});
    meta[m.back().uuid] = KbMetadata{{}, "g", {}};
  }
  std::map<IdentityLabel, IdentityProfile> profiles;
  for (const auto& [label, zs] : groups) profiles[IdentityLabel(label)] = build_profile(IdentityLabel(label), zs, 0.02);
  return BenignKnowledgeBase(0.02, std::move(profiles), std::move(m), std::move(meta));
}

void BM_BuildGraph(benchmark::State& state) {
  const auto events = random_events(static_cast<std::size_t>(state.range(0)), 200, 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(events, kDefaultWindowNs, "g"));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildGraph)->Arg(1'000)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const auto events = random_events(static_cast<std::size_t>(state.range(0)) * 8, static_cast<std::size_t>(state.range(0)), 2);
  const auto graph = build_graph(events, kDefaultWindowNs, "g");
  const MessageGraph mg(graph);
  const auto params = init_params({69, 32, 32}, Activation::relu, Aggregation::mean, 3);
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(mg.size()), 69);
  for (auto _ : state) benchmark::DoNotOptimize(forward_pass(mg, h0, params));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mg.size()));
}
BENCHMARK(BM_Forward)->Arg(100)->Arg(1'000)->Arg(5'000)->Unit(benchmark::kMillisecond);

void BM_KnnQuery(benchmark::State& state) {
  const auto kb = random_kb(static_cast<std::size_t>(state.range(0)), 32, 30);
  Rng rng(9);
  Vec q(32);
  for (auto& x : q) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(knn_query(kb, q, 5));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_KnnQuery)->Arg(1'000)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMicrosecond);

void BM_DetectNode(benchmark::State& state) {
  const auto kb = random_kb(3'000, 32, static_cast<std::size_t>(state.range(0)));
  Vec z(32, 0.1);
  const IdentityLabel claimed("subject::id0");
  for (auto _ : state) benchmark::DoNotOptimize(detect_node(z, claimed, kb.profiles()));
}
BENCHMARK(BM_DetectNode)->Arg(10)->Arg(100)->Arg(1'000);

}  // namespace

BENCHMARK_MAIN();
