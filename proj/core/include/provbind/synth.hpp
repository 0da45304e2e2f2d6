#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provbind/ingest.hpp"

namespace provbind {

/// Behaviour of one process identity in a generated scenario.
struct IdentityTemplate {
  std::string name;
  std::size_t nodes = 0;
  std::size_t events = 30;         // per node, mean
  std::size_t events_jitter = 5;   // +- uniform
  std::map<std::string, double> operations;  // relative weights
  std::vector<std::string> files;
  std::vector<int> ports;
  std::int64_t rhythm_ns = 1'000'000'000;
  double rhythm_jitter = 0.2;  // fraction of rhythm_ns
};

/// `count` processes named `claimed` that act like `behaves_like`.
struct Injection {
  std::string claimed;
  std::string behaves_like;
  std::size_t count = 0;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  std::int64_t start_ns = 1'700'000'000'000'000'000;
  std::string benign_graph = "benign";
  std::string attack_graph = "attack";
  std::size_t background = 0;  // benign nodes per identity mixed into the attack set
  std::vector<IdentityTemplate> identities;
  std::vector<Injection> injections;

  std::size_t labelled_nodes() const;
};

/// Throws ConfigError on an invalid spec. An integer "injected" field is
/// shorthand for round-robin swaps between consecutive identities.
ScenarioSpec parse_scenario(const nlohmann::json& j);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct SyntheticScenario {
  std::vector<RawEvent> benign;
  std::vector<RawEvent> attack;
  nlohmann::json labels;  // {"nodes": [...], "anomalies": [uuid...]}
};

SyntheticScenario generate_scenario(const ScenarioSpec& spec);

/// benign.jsonl, attack.jsonl and labels.json under dir.
void write_scenario(const SyntheticScenario& scenario, const std::filesystem::path& dir);

}  // namespace provbind
