#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provbind/encoder.hpp"
#include "provbind/features.hpp"
#include "provbind/ingest.hpp"
#include "provbind/profiler.hpp"

namespace provbind {

enum class Violation { deviation, mismatch, both, unknown_identity };

std::string_view to_string(Violation v) noexcept;
Violation parse_violation(std::string_view text);

/// Identity-consistency violation of one node.
struct Alert {
  std::string node_uuid;
  std::string graph_name;
  IdentityLabel claimed;
  IdentityLabel matched;
  double matched_distance = 0.0;
  std::optional<double> deviation;  // absent when the claimed identity has no profile
  std::optional<double> radius;
  Violation violation = Violation::deviation;
  std::string explanation;
  double score = 0.0;

  friend bool operator==(const Alert&, const Alert&) = default;
};

struct PrototypeMatch {
  IdentityLabel label;
  double distance = 0.0;
};

/// Closest centroid; ties go to the lexicographically smallest label.
/// ConfigError without profiles.
PrototypeMatch nearest_prototype(std::span<const double> z, const std::map<IdentityLabel, IdentityProfile>& profiles);

inline constexpr double kScoreDelta = 1e-9;

/// nullopt for a benign node. Score is the relative excess over the claimed
/// radius plus one when the nearest prototype is another identity; unknown
/// identities score 2.
std::optional<Alert> detect_node(std::span<const double> z, const IdentityLabel& claimed,
                                 const std::map<IdentityLabel, IdentityProfile>& profiles);

/// Embeds and checks every node. Sorted by score descending, then uuid.
std::vector<Alert> detect_graph(const ProvenanceGraph& graph, const EncoderParams& params,
                                const SemanticVocab& vocab, const OperationVocab& ops,
                                const BenignKnowledgeBase& kb);

/// Same, over precomputed embeddings.
std::vector<Alert> detect_embeddings(const ProvenanceGraph& graph, const std::map<std::string, Vec>& embeddings,
                                     const BenignKnowledgeBase& kb);

std::string format_alert_line(const Alert& alert);
Alert parse_alert_line(std::string_view line);
void write_alerts(const std::vector<Alert>& alerts, const std::filesystem::path& path);
std::vector<Alert> read_alerts(const std::filesystem::path& path);

/// Fixed-width table for terminals.
void print_alert_table(const std::vector<Alert>& alerts, std::ostream& out, std::size_t limit = 50);

}  // namespace provbind
