#include "provbind/profiler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "provbind/binary_io.hpp"
#include "provbind/error.hpp"

namespace provbind {

using nlohmann::json;

Vec compute_centroid(std::span<const Vec> members) {
  if (members.empty()) throw ConfigError("cannot compute the centroid of an empty member set");
  Vec sum(members.front().size(), 0.0);
  for (const auto& m : members) {
    if (m.size() != sum.size()) throw ConfigError("member embeddings differ in dimension");
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += m[k];
  }
  const auto n = static_cast<double>(members.size());
  for (auto& x : sum) x /= n;
  return sum;
}

double radius_from_distances(std::vector<double> distances, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError(fmt::format("epsilon {} outside [0, 1)", epsilon));
  if (distances.empty()) throw ConfigError("cannot compute the radius of an empty member set");
  const auto n = distances.size();
  // ceil((1 - eps) * n) == n - floor(eps * n); the slack absorbs the rounding
  // of eps * n when it is mathematically an integer.
  const auto outside = static_cast<std::size_t>(std::floor(epsilon * static_cast<double>(n) + 1e-9));
  const std::size_t m = std::max<std::size_t>(1, n - std::min(outside, n));
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(m - 1), distances.end());
  return distances[m - 1];
}

double compute_radius(std::span<const Vec> members, std::span<const double> centroid, double epsilon) {
  std::vector<double> d;
  d.reserve(members.size());
  for (const auto& m : members) d.push_back(euclidean_distance(m, centroid));
  return radius_from_distances(std::move(d), epsilon);
}

IdentityProfile build_profile(IdentityLabel label, std::span<const Vec> members, double epsilon) {
  IdentityProfile p;
  p.label = std::move(label);
  p.centroid = compute_centroid(members);
  p.radius = compute_radius(members, p.centroid, epsilon);
  p.count = members.size();
  return p;
}

// ---------------------------------------------------------------------------

BenignKnowledgeBase::BenignKnowledgeBase(double epsilon, std::map<IdentityLabel, IdentityProfile> profiles,
                                         std::vector<KbMember> members, std::map<std::string, KbMetadata> metadata)
    : epsilon_(epsilon), profiles_(std::move(profiles)), members_(std::move(members)), metadata_(std::move(metadata)) {
  std::sort(members_.begin(), members_.end(), [](const KbMember& a, const KbMember& b) {
    return std::tie(a.label, a.uuid, a.graph_name) < std::tie(b.label, b.uuid, b.graph_name);
  });
  for (const auto& m : members_) {
    if (!profiles_.contains(m.label)) throw FormatError("member " + m.uuid + " has no profile");
    if (!metadata_.contains(m.uuid)) throw FormatError("member " + m.uuid + " has no metadata");
  }
}

const IdentityProfile* BenignKnowledgeBase::profile(const IdentityLabel& label) const {
  const auto it = profiles_.find(label);
  return it == profiles_.end() ? nullptr : &it->second;
}

const KbMetadata* BenignKnowledgeBase::find_metadata(std::string_view uuid) const {
  const auto it = metadata_.find(std::string(uuid));
  return it == metadata_.end() ? nullptr : &it->second;
}

std::size_t BenignKnowledgeBase::dim() const noexcept {
  return profiles_.empty() ? 0 : profiles_.begin()->second.centroid.size();
}

std::vector<std::string> edge_summaries(const ProvenanceGraph& graph, std::string_view uuid) {
  std::vector<std::string> out;
  for (const auto i : graph.incident_edges(uuid)) {
    const auto& e = graph.edges()[i];
    const bool outgoing = e.src == uuid;
    const auto* peer = graph.find(outgoing ? e.dst : e.src);
    out.push_back(fmt::format("{} {} {} x{} @{}", outgoing ? "out" : "in", e.operation,
                              peer ? peer->identity.text() : std::string("?"), e.weight, e.first_ts));
  }
  return out;
}

BenignKnowledgeBase build_knowledge_base(std::span<const ProvenanceGraph> graphs,
                                         std::span<const std::map<std::string, Vec>> embeddings, double epsilon) {
  if (graphs.empty()) throw ConfigError("no benign graphs to profile");
  if (graphs.size() != embeddings.size()) throw ConfigError("one embedding map per graph is required");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError(fmt::format("epsilon {} outside [0, 1)", epsilon));

  std::vector<KbMember> members;
  std::map<std::string, KbMetadata> metadata;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto& graph = graphs[g];
    for (const auto& [uuid, node] : graph.nodes()) {
      const auto it = embeddings[g].find(uuid);
      if (it == embeddings[g].end()) throw ConfigError("missing embedding for node " + uuid);
      members.push_back(KbMember{uuid, graph.name(), node.identity, it->second});
      metadata.try_emplace(uuid, KbMetadata{node.attrs, graph.name(), edge_summaries(graph, uuid)});
    }
  }
  std::sort(members.begin(), members.end(), [](const KbMember& a, const KbMember& b) {
    return std::tie(a.label, a.uuid, a.graph_name) < std::tie(b.label, b.uuid, b.graph_name);
  });

  std::map<IdentityLabel, IdentityProfile> profiles;
  for (std::size_t start = 0; start < members.size();) {
    std::size_t end = start;
    std::vector<Vec> group;
    while (end < members.size() && members[end].label == members[start].label) group.push_back(members[end++].z);
    profiles.emplace(members[start].label, build_profile(members[start].label, group, epsilon));
    start = end;
  }
  return BenignKnowledgeBase(epsilon, std::move(profiles), std::move(members), std::move(metadata));
}

BenignKnowledgeBase build_knowledge_base(std::span<const ProvenanceGraph> graphs, const EncoderParams& params,
                                         const SemanticVocab& vocab, const OperationVocab& ops, double epsilon) {
  std::vector<std::map<std::string, Vec>> embeddings;
  for (const auto& g : graphs) embeddings.push_back(embed_graph(g, vocab, ops, params));
  return build_knowledge_base(graphs, embeddings, epsilon);
}

// ---------------------------------------------------------------------------
// Queries

std::vector<Neighbor> LinearScanIndex::search(std::span<const double> query, std::size_t k) const {
  struct Scored {
    double distance;
    const KbMember* member;
  };
  std::vector<Scored> scored;
  scored.reserve(members_.size());
  for (const auto& m : members_) scored.push_back({euclidean_distance(m.z, query), &m});
  const auto take = std::min(k, scored.size());
  const auto less = [](const Scored& a, const Scored& b) {
    return std::tie(a.distance, a.member->uuid, a.member->graph_name) <
           std::tie(b.distance, b.member->uuid, b.member->graph_name);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), less);
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({scored[i].member->uuid, scored[i].member->label, scored[i].distance});
  return out;
}

std::vector<Neighbor> knn_query(const BenignKnowledgeBase& kb, std::span<const double> query, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (kb.members().empty()) return {};
  if (query.size() != kb.dim())
    throw ConfigError(fmt::format("query dimension {} does not match knowledge base dimension {}", query.size(), kb.dim()));
  return LinearScanIndex(kb.members()).search(query, k);
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::vector<std::string> attribute_query(const BenignKnowledgeBase& kb, std::string_view pattern) {
  std::vector<std::string> out;
  if (pattern.empty()) return out;
  std::set<std::string> seen;
  for (const auto& m : kb.members())
    if (m.label.text() == pattern && seen.insert(m.uuid).second) out.push_back(m.uuid);

  const auto needle = lower(pattern);
  for (const auto& m : kb.members()) {
    if (seen.contains(m.uuid)) continue;
    bool hit = lower(m.label.text()).find(needle) != std::string::npos;
    if (const auto* meta = kb.find_metadata(m.uuid); meta && !hit) {
      for (const auto& [key, value] : meta->attrs) {
        if (lower(value).find(needle) != std::string::npos) {
          hit = true;
          break;
        }
      }
    }
    if (hit && seen.insert(m.uuid).second) out.push_back(m.uuid);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

void export_embeddings(const BenignKnowledgeBase& kb, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "uuid,identity";
  for (std::size_t k = 0; k < kb.dim(); ++k) out << ",z" << k;
  out << '\n';
  for (const auto& m : kb.members()) {
    out << m.uuid << ',' << m.label.text();
    for (const double x : m.z) out << ',' << fmt::format("{:.17g}", x);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<EmbeddingRow> read_embeddings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<EmbeddingRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    EmbeddingRow row;
    std::getline(ss, row.uuid, ',');
    std::getline(ss, row.identity, ',');
    std::string cell;
    while (std::getline(ss, cell, ',')) row.z.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_knowledge_base(const BenignKnowledgeBase& kb, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json profiles = json::array();
  for (const auto& [label, p] : kb.profiles()) {
    profiles.push_back({{"label", label.text()}, {"centroid", p.centroid}, {"radius", p.radius}, {"count", p.count}});
  }
  json header{{"epsilon", kb.epsilon()}, {"dim", kb.dim()}, {"profiles", profiles}};
  std::ofstream(dir / "profiles.json") << header.dump(2) << '\n';

  json manifest = json::array();
  std::ofstream blob(dir / "embeddings.bin", std::ios::binary);
  for (const auto& m : kb.members()) {
    manifest.push_back({{"uuid", m.uuid}, {"graph_name", m.graph_name}, {"label", m.label.text()}});
    binary::write_blob<double>(blob, m.z);
  }
  std::ofstream(dir / "members.json") << json{{"dtype", "float64-le"}, {"dim", kb.dim()}, {"members", manifest}}.dump(1)
                                      << '\n';
  std::ofstream meta(dir / "metadata.jsonl");
  for (const auto& [uuid, md] : kb.metadata()) {
    json attrs = json::object();
    for (const auto& [k, v] : md.attrs) attrs[k] = v;
    meta << json{{"uuid", uuid}, {"graph_name", md.graph_name}, {"attrs", attrs}, {"edges", md.edge_summaries}}.dump()
         << '\n';
  }
  if (!blob || !meta) throw IoError("failed writing knowledge base " + dir.string());
}

BenignKnowledgeBase read_knowledge_base(const std::filesystem::path& dir) {
  const auto profiles_path = dir / "profiles.json";
  std::ifstream pin(profiles_path);
  if (!pin) throw MissingArtifactError("knowledge base", profiles_path.string());
  try {
    const auto header = json::parse(pin);
    std::map<IdentityLabel, IdentityProfile> profiles;
    for (const auto& p : header.at("profiles")) {
      IdentityProfile prof{IdentityLabel(p.at("label").get<std::string>()), p.at("centroid").get<Vec>(),
                           p.at("radius").get<double>(), p.at("count").get<std::size_t>()};
      profiles.emplace(prof.label, std::move(prof));
    }
    std::ifstream min(dir / "members.json");
    if (!min) throw MissingArtifactError("knowledge base members", (dir / "members.json").string());
    const auto manifest = json::parse(min);
    const auto dim = manifest.at("dim").get<std::size_t>();
    std::ifstream blob(dir / "embeddings.bin", std::ios::binary);
    if (!blob) throw MissingArtifactError("knowledge base embeddings", (dir / "embeddings.bin").string());
    std::vector<KbMember> members;
    for (const auto& m : manifest.at("members")) {
      members.push_back(KbMember{m.at("uuid").get<std::string>(), m.at("graph_name").get<std::string>(),
                                 IdentityLabel(m.at("label").get<std::string>()), binary::read_blob<double>(blob, dim)});
    }
    std::map<std::string, KbMetadata> metadata;
    std::ifstream meta(dir / "metadata.jsonl");
    if (!meta) throw MissingArtifactError("knowledge base metadata", (dir / "metadata.jsonl").string());
    std::string line;
    while (std::getline(meta, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      KbMetadata md;
      for (const auto& [k, v] : j.at("attrs").items()) md.attrs[k] = v.get<std::string>();
      md.graph_name = j.at("graph_name").get<std::string>();
      md.edge_summaries = j.at("edges").get<std::vector<std::string>>();
      metadata.emplace(j.at("uuid").get<std::string>(), std::move(md));
    }
    return BenignKnowledgeBase(header.at("epsilon").get<double>(), std::move(profiles), std::move(members),
                               std::move(metadata));
  } catch (const json::exception& ex) {
    throw FormatError("corrupt knowledge base " + dir.string() + ": " + ex.what());
  }
}

}  // namespace provbind
