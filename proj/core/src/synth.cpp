#include "provbind/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "provbind/error.hpp"
#include "provbind/random.hpp"

namespace provbind {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kFileOps{"READ", "WRITE", "OPEN", "CLOSE", "EXECUTE", "MODIFY"};
const std::set<std::string, std::less<>> kNetOps{"CONNECT", "SEND", "RECV"};

template <typename T>
T field(const json& j, const char* key, T fallback, std::string_view where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ConfigError(fmt::format("scenario {}.{}: {}", where, key, ex.what()));
  }
}

IdentityTemplate parse_template(const json& j, std::size_t index) {
  const auto where = fmt::format("identities[{}]", index);
  if (!j.is_object()) throw ConfigError("scenario " + where + " must be an object");
  IdentityTemplate t;
  t.name = field<std::string>(j, "name", "", where);
  if (t.name.empty()) throw ConfigError("scenario " + where + " needs a name");
  t.nodes = field<std::size_t>(j, "nodes", 0, where);
  t.events = field<std::size_t>(j, "events", t.events, where);
  t.events_jitter = field<std::size_t>(j, "events_jitter", t.events_jitter, where);
  t.operations = field<std::map<std::string, double>>(j, "operations", {}, where);
  t.files = field<std::vector<std::string>>(j, "files", {}, where);
  t.ports = field<std::vector<int>>(j, "ports", {}, where);
  t.rhythm_ns = field<std::int64_t>(j, "rhythm_ns", t.rhythm_ns, where);
  t.rhythm_jitter = field<double>(j, "rhythm_jitter", t.rhythm_jitter, where);

  if (t.events == 0 || t.events_jitter >= t.events)
    throw ConfigError(fmt::format("scenario {}: events must exceed events_jitter", where));
  if (t.rhythm_ns <= 0 || t.rhythm_jitter < 0.0 || t.rhythm_jitter >= 1.0)
    throw ConfigError(fmt::format("scenario {}: rhythm_ns > 0 and rhythm_jitter in [0, 1) required", where));
  if (t.operations.empty()) throw ConfigError(fmt::format("scenario {}: operations must not be empty", where));
  double total = 0.0;
  for (const auto& [op, w] : t.operations) {
    if (!(w >= 0.0)) throw ConfigError(fmt::format("scenario {}: weight of {} must be non-negative", where, op));
    if (kFileOps.contains(op)) {
      if (t.files.empty() && w > 0.0) throw ConfigError(fmt::format("scenario {}: {} needs a file pool", where, op));
    } else if (kNetOps.contains(op)) {
      if (t.ports.empty() && w > 0.0) throw ConfigError(fmt::format("scenario {}: {} needs ports", where, op));
    } else {
      throw ConfigError(fmt::format("scenario {}: operation {} is not supported by the generator", where, op));
    }
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError(fmt::format("scenario {}: operation weights sum to zero", where));
  for (const int p : t.ports)
    if (p <= 0 || p > 65535) throw ConfigError(fmt::format("scenario {}: port {} out of range", where, p));
  return t;
}

struct Generator {
  const ScenarioSpec& spec;
  Rng rng;

  std::string sample_op(const IdentityTemplate& t) {
    double total = 0.0;
    for (const auto& [op, w] : t.operations) total += w;
    double u = rng.uniform() * total;
    for (const auto& [op, w] : t.operations) {
      if (u < w) return op;
      u -= w;
    }
    // Rounding fell off the end; return the last positive weight.
    for (auto it = t.operations.rbegin(); it != t.operations.rend(); ++it)
      if (it->second > 0.0) return it->first;
    return t.operations.begin()->first;
  }

  /// Events of one process named `name` that behaves like `behaviour`.
  void emit_process(const std::string& uuid, const std::string& name, const IdentityTemplate& behaviour,
                    std::vector<RawEvent>& out) {
    const AttrMap subject_attrs{{"name", name}, {"pid", std::to_string(1000 + rng.below(60000))}};
    const auto spread = 2 * behaviour.events_jitter + 1;
    const auto n = behaviour.events - behaviour.events_jitter + rng.below(spread);
    auto t = spec.start_ns + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(behaviour.rhythm_ns) * 4));
    for (std::size_t k = 0; k < n; ++k) {
      const double step = static_cast<double>(behaviour.rhythm_ns) * (1.0 + behaviour.rhythm_jitter * rng.uniform(-1.0, 1.0));
      t += std::max<std::int64_t>(1, static_cast<std::int64_t>(step));
      RawEvent ev;
      ev.subject_uuid = uuid;
      ev.operation = sample_op(behaviour);
      ev.timestamp = t;
      ev.subject_attrs = subject_attrs;
      if (kNetOps.contains(ev.operation)) {
        const int port = behaviour.ports[rng.below(behaviour.ports.size())];
        ev.object_kind = EntityKind::netflow;
        ev.object_uuid = fmt::format("{}/net/{}", uuid, port);
        ev.object_attrs = {{"remote_ip", fmt::format("10.{}.{}.{}", port / 256 % 256, port % 256, 1 + port % 200)},
                           {"port", std::to_string(port)}};
      } else {
        const auto& path = behaviour.files[rng.below(behaviour.files.size())];
        ev.object_kind = EntityKind::file;
        ev.object_uuid = "file:" + path;
        ev.object_attrs = {{"path", path}};
      }
      out.push_back(std::move(ev));
    }
  }
};

void finalize(std::vector<RawEvent>& events, const std::string& graph) {
  std::sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
    return std::tie(a.timestamp, a.subject_uuid, a.object_uuid, a.operation) <
           std::tie(b.timestamp, b.subject_uuid, b.object_uuid, b.operation);
  });
  for (std::size_t i = 0; i < events.size(); ++i) events[i].event_id = fmt::format("{}-{:07}", graph, i);
}

}  // namespace

std::size_t ScenarioSpec::labelled_nodes() const {
  std::size_t n = 0;
  for (const auto& t : identities) n += t.nodes + background;
  for (const auto& inj : injections) n += inj.count;
  return n;
}

ScenarioSpec parse_scenario(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  ScenarioSpec s;
  s.seed = field<std::uint64_t>(j, "seed", s.seed, "root");
  s.start_ns = field<std::int64_t>(j, "start_ns", s.start_ns, "root");
  s.benign_graph = field<std::string>(j, "benign_graph", s.benign_graph, "root");
  s.attack_graph = field<std::string>(j, "attack_graph", s.attack_graph, "root");
  s.background = field<std::size_t>(j, "background", 0, "root");
  if (s.start_ns < 0) throw ConfigError("scenario start_ns must be non-negative");
  if (s.benign_graph.empty() || s.attack_graph.empty() || s.benign_graph == s.attack_graph)
    throw ConfigError("scenario graph names must be distinct and non-empty");

  if (!j.contains("identities") || !j["identities"].is_array() || j["identities"].empty())
    throw ConfigError("scenario needs a non-empty identities array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < j["identities"].size(); ++i) {
    auto t = parse_template(j["identities"][i], i);
    if (!names.insert(t.name).second) throw ConfigError("scenario identity listed twice: " + t.name);
    s.identities.push_back(std::move(t));
  }

  if (j.contains("injections") && j.contains("injected"))
    throw ConfigError("scenario may give injections or injected, not both");
  if (j.contains("injected")) {
    const auto total = field<std::size_t>(j, "injected", 0, "root");
    if (total > 0 && s.identities.size() < 2) throw ConfigError("identity swaps need at least two identities");
    const auto n = s.identities.size();
    for (std::size_t i = 0; i < n && total > 0; ++i) {
      const auto count = total / n + (i < total % n ? 1 : 0);
      if (count > 0) s.injections.push_back({s.identities[i].name, s.identities[(i + 1) % n].name, count});
    }
  } else if (j.contains("injections")) {
    if (!j["injections"].is_array()) throw ConfigError("scenario injections must be an array");
    for (std::size_t i = 0; i < j["injections"].size(); ++i) {
      const auto& e = j["injections"][i];
      const auto where = fmt::format("injections[{}]", i);
      Injection inj{field<std::string>(e, "claimed", "", where), field<std::string>(e, "behaves_like", "", where),
                    field<std::size_t>(e, "count", 1, where)};
      if (!names.contains(inj.claimed) || !names.contains(inj.behaves_like))
        throw ConfigError(fmt::format("scenario {} references an unknown identity", where));
      if (inj.claimed == inj.behaves_like) throw ConfigError(fmt::format("scenario {} swaps an identity with itself", where));
      s.injections.push_back(std::move(inj));
    }
  }
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scenario " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ConfigError(fmt::format("scenario {} is not valid JSON: {}", path.string(), ex.what()));
  }
  return parse_scenario(j);
}

SyntheticScenario generate_scenario(const ScenarioSpec& spec) {
  Generator gen{spec, Rng(spec.seed)};
  SyntheticScenario out;
  json nodes = json::array();
  json anomalies = json::array();
  const auto find = [&spec](const std::string& name) -> const IdentityTemplate& {
    return *std::find_if(spec.identities.begin(), spec.identities.end(),
                         [&name](const IdentityTemplate& t) { return t.name == name; });
  };

  for (const auto& t : spec.identities) {
    for (std::size_t i = 0; i < t.nodes; ++i) {
      const auto uuid = fmt::format("{}:{}:{:05}", spec.benign_graph, t.name, i);
      gen.emit_process(uuid, t.name, t, out.benign);
      nodes.push_back({{"uuid", uuid}, {"graph", spec.benign_graph}, {"identity", "subject::" + t.name},
                       {"behaves_like", "subject::" + t.name}, {"anomalous", false}});
    }
  }
  for (const auto& t : spec.identities) {
    for (std::size_t i = 0; i < spec.background; ++i) {
      const auto uuid = fmt::format("{}:{}:{:05}", spec.attack_graph, t.name, i);
      gen.emit_process(uuid, t.name, t, out.attack);
      nodes.push_back({{"uuid", uuid}, {"graph", spec.attack_graph}, {"identity", "subject::" + t.name},
                       {"behaves_like", "subject::" + t.name}, {"anomalous", false}});
    }
  }
  std::size_t injected = 0;
  for (const auto& inj : spec.injections) {
    for (std::size_t i = 0; i < inj.count; ++i) {
      const auto uuid = fmt::format("{}:{}:x{:04}", spec.attack_graph, inj.claimed, injected++);
      gen.emit_process(uuid, inj.claimed, find(inj.behaves_like), out.attack);
      nodes.push_back({{"uuid", uuid}, {"graph", spec.attack_graph}, {"identity", "subject::" + inj.claimed},
                       {"behaves_like", "subject::" + inj.behaves_like}, {"anomalous", true}});
      anomalies.push_back(uuid);
    }
  }
  finalize(out.benign, spec.benign_graph);
  finalize(out.attack, spec.attack_graph);
  out.labels = {{"seed", spec.seed},
                {"benign_graph", spec.benign_graph},
                {"attack_graph", spec.attack_graph},
                {"nodes", nodes},
                {"anomalies", anomalies}};
  return out;
}

void write_scenario(const SyntheticScenario& scenario, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write_events = [&dir](const std::vector<RawEvent>& events, const char* file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    for (const auto& e : events) out << format_event_line(e) << '\n';
  };
  write_events(scenario.benign, "benign.jsonl");
  write_events(scenario.attack, "attack.jsonl");
  std::ofstream labels(dir / "labels.json", std::ios::binary);
  if (!labels) throw IoError("cannot write " + (dir / "labels.json").string());
  labels << scenario.labels.dump(2) << '\n';
}

}  // namespace provbind
