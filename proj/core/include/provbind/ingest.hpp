#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace provbind {

enum class EntityKind { subject, file, netflow };

std::string_view to_string(EntityKind kind) noexcept;
std::optional<EntityKind> parse_entity_kind(std::string_view text) noexcept;

using AttrMap = std::map<std::string, std::string>;

/// Fine-grained identity of an entity, "<prefix>::<key>".
class IdentityLabel {
 public:
  IdentityLabel() = default;
  explicit IdentityLabel(std::string text) : text_(std::move(text)) {}

  const std::string& text() const noexcept { return text_; }
  std::string_view prefix() const noexcept;
  std::string_view key() const noexcept;
  bool empty() const noexcept { return text_.empty(); }

  friend auto operator<=>(const IdentityLabel&, const IdentityLabel&) = default;

 private:
  std::string text_;
};

/// Ordered operation vocabulary. The order fixes the layout of the action
/// frequency vector, so it must be identical across the whole pipeline.
class OperationVocab {
 public:
  OperationVocab() = default;
  explicit OperationVocab(std::vector<std::string> ops);

  /// READ WRITE EXECUTE OPEN CLOSE CONNECT SEND RECV FORK CLONE MODIFY
  static OperationVocab defaults();

  std::optional<std::size_t> index_of(std::string_view op) const noexcept;
  bool contains(std::string_view op) const noexcept { return index_of(op).has_value(); }
  std::size_t size() const noexcept { return ops_.size(); }
  const std::vector<std::string>& operations() const noexcept { return ops_; }

  friend bool operator==(const OperationVocab&, const OperationVocab&) = default;

 private:
  std::vector<std::string> ops_;
};

struct RawEvent {
  std::string event_id;
  std::string subject_uuid;
  std::string object_uuid;
  std::string operation;
  std::int64_t timestamp = 0;  // ns since epoch
  AttrMap subject_attrs;
  AttrMap object_attrs;
  EntityKind object_kind = EntityKind::file;

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

struct Entity {
  std::string uuid;
  EntityKind kind = EntityKind::subject;
  AttrMap attrs;
  IdentityLabel identity;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct ProvEdge {
  std::string src;
  std::string dst;
  std::string operation;
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
  std::uint64_t weight = 1;

  friend bool operator==(const ProvEdge&, const ProvEdge&) = default;
};

/// Immutable after construction; safe to share read-only across threads.
class ProvenanceGraph {
 public:
  ProvenanceGraph() = default;
  ProvenanceGraph(std::string name, std::map<std::string, Entity> nodes,
                  std::vector<ProvEdge> edges, std::int64_t window_start,
                  std::int64_t window_end);

  const std::string& name() const noexcept { return name_; }
  const std::map<std::string, Entity>& nodes() const noexcept { return nodes_; }
  const std::vector<ProvEdge>& edges() const noexcept { return edges_; }
  std::int64_t window_start() const noexcept { return window_start_; }
  std::int64_t window_end() const noexcept { return window_end_; }

  const Entity* find(std::string_view uuid) const;
  bool contains(std::string_view uuid) const { return find(uuid) != nullptr; }

  /// Indices into edges() of every edge touching uuid, ordered by first_ts
  /// (ties by edge index). Empty for unknown nodes.
  std::span<const std::size_t> incident_edges(std::string_view uuid) const;

  /// Distinct neighbours of uuid over in- and out-edges, sorted by uuid.
  std::vector<std::string> neighbors(std::string_view uuid) const;

 private:
  std::string name_;
  std::map<std::string, Entity> nodes_;
  std::vector<ProvEdge> edges_;
  std::int64_t window_start_ = 0;
  std::int64_t window_end_ = 0;
  std::map<std::string, std::vector<std::size_t>, std::less<>> incidence_;
};

struct ParseResult {
  std::vector<RawEvent> events;
  std::size_t skipped = 0;  // malformed lines
  std::size_t lines = 0;    // non-blank lines seen
};

/// Parse JSON Lines audit records. Malformed lines are skipped and counted;
/// FormatError when more than half of the non-blank lines are malformed.
ParseResult parse_events(std::istream& in, const OperationVocab& ops = OperationVocab::defaults());
ParseResult parse_events_file(const std::filesystem::path& path,
                              const OperationVocab& ops = OperationVocab::defaults());

/// Parse one record; nullopt when the line is not a valid RawEvent.
std::optional<RawEvent> parse_event_line(std::string_view line, const OperationVocab& ops);
std::string format_event_line(const RawEvent& event);

inline constexpr std::int64_t kDefaultWindowNs = 10'000'000'000;

/// Sort events and collapse repeats of (src, dst, operation) into weighted
/// edges. An aggregate is anchored at its first timestamp and absorbs later
/// events no more than window_ns after it.
ProvenanceGraph build_graph(std::span<const RawEvent> events, std::int64_t window_ns = kDefaultWindowNs,
                            std::string name = "graph");

/// subject::<process name>, file::<basename>, net::<remote port>. Missing key
/// attributes give "<prefix>::unknown" and a logged warning.
IdentityLabel derive_identity(EntityKind kind, const AttrMap& attrs);

/// Writes <prefix>.graph.json, <prefix>.nodes.jsonl and <prefix>.edges.jsonl.
void write_graph(const ProvenanceGraph& graph, const std::filesystem::path& prefix);
ProvenanceGraph read_graph(const std::filesystem::path& prefix);
bool graph_exists(const std::filesystem::path& prefix);

}  // namespace provbind
