#include "provbind/detector.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "provbind/error.hpp"

namespace provbind {

using nlohmann::json;

std::string_view to_string(Violation v) noexcept {
  switch (v) {
    case Violation::deviation:
      return "deviation";
    case Violation::mismatch:
      return "mismatch";
    case Violation::both:
      return "both";
    case Violation::unknown_identity:
      return "unknown_identity";
  }
  return "deviation";
}

Violation parse_violation(std::string_view text) {
  if (text == "deviation") return Violation::deviation;
  if (text == "mismatch") return Violation::mismatch;
  if (text == "both") return Violation::both;
  if (text == "unknown_identity") return Violation::unknown_identity;
  throw FormatError("unknown violation kind '" + std::string(text) + "'");
}

PrototypeMatch nearest_prototype(std::span<const double> z, const std::map<IdentityLabel, IdentityProfile>& profiles) {
  if (profiles.empty()) throw ConfigError("no identity profiles to match against");
  std::optional<PrototypeMatch> best;
  // Map iteration is label-ascending, so strict < keeps the smallest label on ties.
  for (const auto& [label, p] : profiles) {
    if (p.centroid.size() != z.size())
      throw ConfigError(fmt::format("embedding dimension {} does not match profile dimension {}", z.size(),
                                    p.centroid.size()));
    const double d = euclidean_distance(z, p.centroid);
    if (!best || d < best->distance) best = PrototypeMatch{label, d};
  }
  return *best;
}

std::optional<Alert> detect_node(std::span<const double> z, const IdentityLabel& claimed,
                                 const std::map<IdentityLabel, IdentityProfile>& profiles) {
  const auto match = nearest_prototype(z, profiles);
  Alert a;
  a.claimed = claimed;
  a.matched = match.label;
  a.matched_distance = match.distance;

  const auto it = profiles.find(claimed);
  if (it == profiles.end()) {
    a.violation = Violation::unknown_identity;
    a.score = 2.0;
    a.explanation = fmt::format("declared {} has no benign profile; behaves like {}, distance={:.6g}",
                                claimed.text(), match.label.text(), match.distance);
    return a;
  }
  const auto& prof = it->second;
  const double d = euclidean_distance(z, prof.centroid);
  const bool deviates = d > prof.radius;
  const bool mismatched = match.label != claimed;
  if (!deviates && !mismatched) return std::nullopt;

  a.deviation = d;
  a.radius = prof.radius;
  a.violation = deviates && mismatched ? Violation::both : deviates ? Violation::deviation : Violation::mismatch;
  a.score = std::max(0.0, d - prof.radius) / (prof.radius + kScoreDelta) + (mismatched ? 1.0 : 0.0);
  a.explanation = fmt::format("declared {} behaves like {}, d={:.6g}, R={:.6g}", claimed.text(), match.label.text(),
                              d, prof.radius);
  return a;
}

std::vector<Alert> detect_embeddings(const ProvenanceGraph& graph, const std::map<std::string, Vec>& embeddings,
                                     const BenignKnowledgeBase& kb) {
  std::vector<Alert> alerts;
  for (const auto& [uuid, node] : graph.nodes()) {
    const auto it = embeddings.find(uuid);
    if (it == embeddings.end()) throw ConfigError("missing embedding for node " + uuid);
    if (auto alert = detect_node(it->second, node.identity, kb.profiles())) {
      alert->node_uuid = uuid;
      alert->graph_name = graph.name();
      alerts.push_back(std::move(*alert));
    }
  }
  std::stable_sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node_uuid < b.node_uuid;
  });
  return alerts;
}

std::vector<Alert> detect_graph(const ProvenanceGraph& graph, const EncoderParams& params,
                                const SemanticVocab& vocab, const OperationVocab& ops,
                                const BenignKnowledgeBase& kb) {
  if (graph.nodes().empty()) return {};
  if (kb.dim() != params.output_dim())
    throw ConfigError(fmt::format("embedding dimension {} does not match knowledge base dimension {}",
                                  params.output_dim(), kb.dim()));
  return detect_embeddings(graph, embed_graph(graph, vocab, ops, params), kb);
}

// ---------------------------------------------------------------------------

std::string format_alert_line(const Alert& a) {
  json j;
  j["node_uuid"] = a.node_uuid;
  j["graph_name"] = a.graph_name;
  j["claimed_identity"] = a.claimed.text();
  j["matched_identity"] = a.matched.text();
  j["matched_distance"] = a.matched_distance;
  j["deviation"] = a.deviation ? json(*a.deviation) : json(nullptr);
  j["radius"] = a.radius ? json(*a.radius) : json(nullptr);
  j["violation"] = std::string(to_string(a.violation));
  j["explanation"] = a.explanation;
  j["score"] = a.score;
  return j.dump();
}

Alert parse_alert_line(std::string_view line) {
  try {
    const auto j = json::parse(line);
    Alert a;
    a.node_uuid = j.at("node_uuid").get<std::string>();
    a.graph_name = j.at("graph_name").get<std::string>();
    a.claimed = IdentityLabel(j.at("claimed_identity").get<std::string>());
    a.matched = IdentityLabel(j.at("matched_identity").get<std::string>());
    a.matched_distance = j.at("matched_distance").get<double>();
    if (!j.at("deviation").is_null()) a.deviation = j.at("deviation").get<double>();
    if (!j.at("radius").is_null()) a.radius = j.at("radius").get<double>();
    a.violation = parse_violation(j.at("violation").get<std::string>());
    a.explanation = j.at("explanation").get<std::string>();
    a.score = j.at("score").get<double>();
    return a;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed alert record: ") + ex.what());
  }
}

void write_alerts(const std::vector<Alert>& alerts, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& a : alerts) out << format_alert_line(a) << '\n';
}

std::vector<Alert> read_alerts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("alerts", path.string());
  std::vector<Alert> alerts;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) alerts.push_back(parse_alert_line(line));
  return alerts;
}

void print_alert_table(const std::vector<Alert>& alerts, std::ostream& out, std::size_t limit) {
  out << fmt::format("{:<8} {:<18} {:<24} {:<24} {:>10} {:>10}  {}\n", "score", "violation", "claimed", "matched",
                     "d", "R", "node");
  const auto shown = std::min(limit, alerts.size());
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& a = alerts[i];
    out << fmt::format("{:<8.4f} {:<18} {:<24} {:<24} {:>10} {:>10}  {}\n", a.score, to_string(a.violation),
                       a.claimed.text(), a.matched.text(), a.deviation ? fmt::format("{:.4g}", *a.deviation) : "-",
                       a.radius ? fmt::format("{:.4g}", *a.radius) : "-", a.node_uuid);
  }
  if (alerts.size() > shown) out << fmt::format("... {} more\n", alerts.size() - shown);
  out << fmt::format("{} alert(s)\n", alerts.size());
}

}  // namespace provbind
