#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "provbind/encoder.hpp"
#include "provbind/features.hpp"
#include "provbind/ingest.hpp"
#include "provbind/linalg.hpp"

namespace provbind {

/// Benign behavioural boundary of one identity: a hypersphere around the
/// centroid of its member embeddings.
struct IdentityProfile {
  IdentityLabel label;
  Vec centroid;
  double radius = 0.0;
  std::size_t count = 0;

  friend bool operator==(const IdentityProfile&, const IdentityProfile&) = default;
};

inline constexpr double kDefaultEpsilon = 0.02;

/// Arithmetic mean. ConfigError on an empty member list.
Vec compute_centroid(std::span<const Vec> members);

/// Smallest radius enclosing at least ceil((1 - epsilon) * N) members, i.e.
/// that order statistic of the member-to-centroid distances. epsilon must lie
/// in [0, 1).
double compute_radius(std::span<const Vec> members, std::span<const double> centroid, double epsilon);

/// Same rule over precomputed distances.
double radius_from_distances(std::vector<double> distances, double epsilon);

IdentityProfile build_profile(IdentityLabel label, std::span<const Vec> members, double epsilon);

struct KbMember {
  std::string uuid;
  std::string graph_name;
  IdentityLabel label;
  Vec z;
};

struct KbMetadata {
  AttrMap attrs;
  std::string graph_name;
  std::vector<std::string> edge_summaries;  // "<dir> <OP> <peer identity> x<weight> @<first_ts>"
};

struct Neighbor {
  std::string uuid;
  IdentityLabel label;
  double distance = 0.0;
};

/// Nearest-neighbour index over member embeddings. Exact linear scan is the
/// only implementation; an approximate index can slot in behind this.
class VectorIndex {
 public:
  virtual ~VectorIndex() = default;
  virtual std::vector<Neighbor> search(std::span<const double> query, std::size_t k) const = 0;
};

class LinearScanIndex final : public VectorIndex {
 public:
  explicit LinearScanIndex(std::span<const KbMember> members) : members_(members) {}
  std::vector<Neighbor> search(std::span<const double> query, std::size_t k) const override;

 private:
  std::span<const KbMember> members_;
};

/// Benign profiles plus the member embeddings and provenance metadata the
/// analyst consults. Immutable once built; concurrent reads are safe.
class BenignKnowledgeBase {
 public:
  BenignKnowledgeBase() = default;
  BenignKnowledgeBase(double epsilon, std::map<IdentityLabel, IdentityProfile> profiles,
                      std::vector<KbMember> members, std::map<std::string, KbMetadata> metadata);

  double epsilon() const noexcept { return epsilon_; }
  const std::map<IdentityLabel, IdentityProfile>& profiles() const noexcept { return profiles_; }
  /// Members sorted by (label, uuid, graph name).
  const std::vector<KbMember>& members() const noexcept { return members_; }
  const std::map<std::string, KbMetadata>& metadata() const noexcept { return metadata_; }
  const IdentityProfile* profile(const IdentityLabel& label) const;
  const KbMetadata* find_metadata(std::string_view uuid) const;
  std::size_t dim() const noexcept;

 private:
  double epsilon_ = kDefaultEpsilon;
  std::map<IdentityLabel, IdentityProfile> profiles_;
  std::vector<KbMember> members_;
  std::map<std::string, KbMetadata> metadata_;
};

/// Incident-edge digest of a node, most recent aggregates last.
std::vector<std::string> edge_summaries(const ProvenanceGraph& graph, std::string_view uuid);

/// Embeds every node of every benign graph and profiles each identity over
/// the pooled members.
BenignKnowledgeBase build_knowledge_base(std::span<const ProvenanceGraph> graphs, const EncoderParams& params,
                                         const SemanticVocab& vocab, const OperationVocab& ops, double epsilon);

/// Same, from embeddings computed elsewhere (one map per graph).
BenignKnowledgeBase build_knowledge_base(std::span<const ProvenanceGraph> graphs,
                                         std::span<const std::map<std::string, Vec>> embeddings, double epsilon);

/// k nearest members by Euclidean distance, ties by uuid.
std::vector<Neighbor> knn_query(const BenignKnowledgeBase& kb, std::span<const double> query, std::size_t k);

/// Exact identity matches first, then members whose attributes contain
/// pattern case-insensitively. Each uuid appears once.
std::vector<std::string> attribute_query(const BenignKnowledgeBase& kb, std::string_view pattern);

/// CSV: uuid,identity,z0..z{d-1}
void export_embeddings(const BenignKnowledgeBase& kb, const std::filesystem::path& path);
struct EmbeddingRow {
  std::string uuid;
  std::string identity;
  Vec z;
};
std::vector<EmbeddingRow> read_embeddings_csv(const std::filesystem::path& path);

/// Directory layout: profiles.json, embeddings.bin (float64), members.json
/// (uuid manifest), metadata.jsonl.
void write_knowledge_base(const BenignKnowledgeBase& kb, const std::filesystem::path& dir);
BenignKnowledgeBase read_knowledge_base(const std::filesystem::path& dir);

}  // namespace provbind
