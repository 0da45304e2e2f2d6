#include "provbind/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <tuple>
#include <utility>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "provbind/error.hpp"

namespace provbind {

using nlohmann::json;

std::string_view to_string(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::subject:
      return "subject";
    case EntityKind::file:
      return "file";
    case EntityKind::netflow:
      return "netflow";
  }
  return "subject";
}

std::optional<EntityKind> parse_entity_kind(std::string_view text) noexcept {
  if (text == "subject") return EntityKind::subject;
  if (text == "file") return EntityKind::file;
  if (text == "netflow") return EntityKind::netflow;
  return std::nullopt;
}

std::string_view IdentityLabel::prefix() const noexcept {
  const auto pos = text_.find("::");
  return pos == std::string::npos ? std::string_view{} : std::string_view(text_).substr(0, pos);
}

std::string_view IdentityLabel::key() const noexcept {
  const auto pos = text_.find("::");
  return pos == std::string::npos ? std::string_view(text_) : std::string_view(text_).substr(pos + 2);
}

OperationVocab::OperationVocab(std::vector<std::string> ops) : ops_(std::move(ops)) {
  if (ops_.empty()) throw ConfigError("operation vocabulary is empty");
  auto sorted = ops_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("operation vocabulary contains duplicates");
}

OperationVocab OperationVocab::defaults() {
  return OperationVocab({"READ", "WRITE", "EXECUTE", "OPEN", "CLOSE", "CONNECT", "SEND", "RECV", "FORK",
                         "CLONE", "MODIFY"});
}

std::optional<std::size_t> OperationVocab::index_of(std::string_view op) const noexcept {
  for (std::size_t i = 0; i < ops_.size(); ++i)
    if (ops_[i] == op) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Graph

ProvenanceGraph::ProvenanceGraph(std::string name, std::map<std::string, Entity> nodes,
                                 std::vector<ProvEdge> edges, std::int64_t window_start,
                                 std::int64_t window_end)
    : name_(std::move(name)),
      nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      window_start_(window_start),
      window_end_(window_end) {
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    if (!nodes_.contains(e.src) || !nodes_.contains(e.dst))
      throw FormatError("edge endpoint missing from node set: " + e.src + " -> " + e.dst);
    if (e.first_ts > e.last_ts || e.weight == 0)
      throw FormatError("invalid edge aggregate " + e.src + " -> " + e.dst);
    if (e.first_ts < window_start_ || e.last_ts > window_end_)
      throw FormatError("edge timestamps outside graph window: " + e.src + " -> " + e.dst);
    incidence_[e.src].push_back(i);
    if (e.dst != e.src) incidence_[e.dst].push_back(i);
  }
  for (auto& [uuid, idx] : incidence_) {
    std::stable_sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) {
      return std::tie(edges_[a].first_ts, a) < std::tie(edges_[b].first_ts, b);
    });
  }
}

const Entity* ProvenanceGraph::find(std::string_view uuid) const {
  const auto it = nodes_.find(std::string(uuid));
  return it == nodes_.end() ? nullptr : &it->second;
}

std::span<const std::size_t> ProvenanceGraph::incident_edges(std::string_view uuid) const {
  const auto it = incidence_.find(uuid);
  if (it == incidence_.end()) return {};
  return it->second;
}

std::vector<std::string> ProvenanceGraph::neighbors(std::string_view uuid) const {
  std::vector<std::string> out;
  for (const auto i : incident_edges(uuid)) {
    const auto& e = edges_[i];
    const auto& other = e.src == uuid ? e.dst : e.src;
    if (other != uuid) out.push_back(other);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::optional<AttrMap> parse_attrs(const json& j) {
  AttrMap attrs;
  if (j.is_null()) return attrs;
  if (!j.is_object()) return std::nullopt;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      attrs[key] = value.get<std::string>();
    } else if (value.is_number_integer() || value.is_number_unsigned() || value.is_boolean() ||
               value.is_number_float()) {
      attrs[key] = value.dump();
    } else if (!value.is_null()) {
      return std::nullopt;
    }
  }
  return attrs;
}

json attrs_to_json(const AttrMap& attrs) {
  json j = json::object();
  for (const auto& [k, v] : attrs) j[k] = v;
  return j;
}

}  // namespace

std::optional<RawEvent> parse_event_line(std::string_view line, const OperationVocab& ops) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;

  const auto str = [&j](const char* key) -> std::optional<std::string> {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };

  RawEvent ev;
  auto event_id = str("event_id");
  auto subject = str("subject_uuid");
  auto object = str("object_uuid");
  auto op = str("operation");
  auto kind_text = str("object_kind");
  if (!event_id || !subject || !object || !op || !kind_text) return std::nullopt;
  if (subject->empty() || object->empty() || !ops.contains(*op)) return std::nullopt;
  const auto kind = parse_entity_kind(*kind_text);
  if (!kind) return std::nullopt;

  const auto ts = j.find("timestamp");
  if (ts == j.end() || !(ts->is_number_integer() || ts->is_number_unsigned())) return std::nullopt;
  if (ts->is_number_unsigned()) {
    const auto v = ts->get<std::uint64_t>();
    if (v > static_cast<std::uint64_t>(INT64_MAX)) return std::nullopt;
    ev.timestamp = static_cast<std::int64_t>(v);
  } else {
    ev.timestamp = ts->get<std::int64_t>();
  }
  if (ev.timestamp < 0) return std::nullopt;

  auto sattrs = parse_attrs(j.value("subject_attrs", json()));
  auto oattrs = parse_attrs(j.value("object_attrs", json()));
  if (!sattrs || !oattrs) return std::nullopt;

  ev.event_id = std::move(*event_id);
  ev.subject_uuid = std::move(*subject);
  ev.object_uuid = std::move(*object);
  ev.operation = std::move(*op);
  ev.object_kind = *kind;
  ev.subject_attrs = std::move(*sattrs);
  ev.object_attrs = std::move(*oattrs);
  return ev;
}

std::string format_event_line(const RawEvent& ev) {
  json j;
  j["event_id"] = ev.event_id;
  j["subject_uuid"] = ev.subject_uuid;
  j["object_uuid"] = ev.object_uuid;
  j["operation"] = ev.operation;
  j["timestamp"] = ev.timestamp;
  j["subject_attrs"] = attrs_to_json(ev.subject_attrs);
  j["object_attrs"] = attrs_to_json(ev.object_attrs);
  j["object_kind"] = std::string(to_string(ev.object_kind));
  return j.dump();
}

ParseResult parse_events(std::istream& in, const OperationVocab& ops) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.lines;
    if (auto ev = parse_event_line(line, ops)) {
      result.events.push_back(std::move(*ev));
    } else {
      ++result.skipped;
      spdlog::debug("skipping malformed event on line {}", line_no);
    }
  }
  if (in.bad()) throw IoError("failed reading event stream");
  if (result.lines > 0 && result.skipped * 2 > result.lines)
    throw FormatError("more than half of the input lines are malformed (" + std::to_string(result.skipped) +
                      "/" + std::to_string(result.lines) + "); wrong input format?");
  if (result.skipped > 0) spdlog::warn("skipped {} malformed event line(s)", result.skipped);
  return result;
}

ParseResult parse_events_file(const std::filesystem::path& path, const OperationVocab& ops) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event log: " + path.string());
  return parse_events(in, ops);
}

// ---------------------------------------------------------------------------
// Identity and aggregation

IdentityLabel derive_identity(EntityKind kind, const AttrMap& attrs) {
  const auto lookup = [&attrs](std::initializer_list<const char*> keys) -> std::optional<std::string> {
    for (const char* k : keys) {
      const auto it = attrs.find(k);
      if (it != attrs.end() && !it->second.empty()) return it->second;
    }
    return std::nullopt;
  };

  std::string prefix;
  std::optional<std::string> key;
  switch (kind) {
    case EntityKind::subject:
      prefix = "subject";
      key = lookup({"name", "process_name"});
      break;
    case EntityKind::file: {
      prefix = "file";
      if (auto path = lookup({"path"})) {
        auto p = *path;
        while (!p.empty() && (p.back() == '/' || p.back() == '\\')) p.pop_back();
        const auto slash = p.find_last_of("/\\");
        auto base = slash == std::string::npos ? p : p.substr(slash + 1);
        if (!base.empty()) key = std::move(base);
      }
      break;
    }
    case EntityKind::netflow:
      prefix = "net";
      key = lookup({"port", "remote_port"});
      break;
  }
  if (!key) {
    spdlog::warn("{} entity lacks its identity attribute; using {}::unknown", to_string(kind), prefix);
    return IdentityLabel(prefix + "::unknown");
  }
  return IdentityLabel(prefix + "::" + *key);
}

ProvenanceGraph build_graph(std::span<const RawEvent> events, std::int64_t window_ns, std::string name) {
  if (window_ns <= 0) throw ConfigError("aggregation window must be positive");

  std::vector<const RawEvent*> order;
  order.reserve(events.size());
  for (const auto& e : events) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const RawEvent* a, const RawEvent* b) {
    return std::tie(a->timestamp, a->event_id, a->subject_uuid, a->object_uuid, a->operation) <
           std::tie(b->timestamp, b->event_id, b->subject_uuid, b->object_uuid, b->operation);
  });

  struct NodeDraft {
    EntityKind kind;
    AttrMap attrs;
  };
  std::map<std::string, NodeDraft> drafts;
  const auto note = [&drafts](const std::string& uuid, EntityKind kind, const AttrMap& attrs) {
    auto [it, inserted] = drafts.try_emplace(uuid, NodeDraft{kind, attrs});
    if (!inserted) {
      // Earliest record wins per attribute; later records only fill gaps.
      for (const auto& [k, v] : attrs) it->second.attrs.try_emplace(k, v);
    }
  };

  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::size_t> open;
  std::vector<ProvEdge> edges;
  for (const auto* ev : order) {
    note(ev->subject_uuid, EntityKind::subject, ev->subject_attrs);
    note(ev->object_uuid, ev->object_kind, ev->object_attrs);

    Key key{ev->subject_uuid, ev->object_uuid, ev->operation};
    const auto it = open.find(key);
    if (it != open.end() && ev->timestamp - edges[it->second].first_ts <= window_ns) {
      auto& agg = edges[it->second];
      ++agg.weight;
      agg.last_ts = ev->timestamp;
      continue;
    }
    edges.push_back(ProvEdge{ev->subject_uuid, ev->object_uuid, ev->operation, ev->timestamp, ev->timestamp, 1});
    open[std::move(key)] = edges.size() - 1;
  }

  std::map<std::string, Entity> nodes;
  for (auto& [uuid, d] : drafts) {
    auto identity = derive_identity(d.kind, d.attrs);
    nodes.emplace(uuid, Entity{uuid, d.kind, std::move(d.attrs), std::move(identity)});
  }

  const std::int64_t start = order.empty() ? 0 : order.front()->timestamp;
  const std::int64_t end = order.empty() ? 0 : order.back()->timestamp;
  return ProvenanceGraph(std::move(name), std::move(nodes), std::move(edges), start, end);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  return std::filesystem::path(prefix.string() + suffix);
}

}  // namespace

bool graph_exists(const std::filesystem::path& prefix) {
  return std::filesystem::exists(with_suffix(prefix, ".graph.json"));
}

void write_graph(const ProvenanceGraph& graph, const std::filesystem::path& prefix) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  const auto header_path = with_suffix(prefix, ".graph.json");
  std::ofstream header(header_path);
  if (!header) throw IoError("cannot write " + header_path.string());
  json h;
  h["name"] = graph.name();
  h["window_start"] = graph.window_start();
  h["window_end"] = graph.window_end();
  h["node_count"] = graph.nodes().size();
  h["edge_count"] = graph.edges().size();
  header << h.dump(2) << '\n';

  std::ofstream nodes(with_suffix(prefix, ".nodes.jsonl"));
  for (const auto& [uuid, n] : graph.nodes()) {
    json j;
    j["uuid"] = uuid;
    j["kind"] = std::string(to_string(n.kind));
    j["attrs"] = attrs_to_json(n.attrs);
    j["identity"] = n.identity.text();
    nodes << j.dump() << '\n';
  }
  std::ofstream edges(with_suffix(prefix, ".edges.jsonl"));
  for (const auto& e : graph.edges()) {
    json j;
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["operation"] = e.operation;
    j["first_ts"] = e.first_ts;
    j["last_ts"] = e.last_ts;
    j["weight"] = e.weight;
    edges << j.dump() << '\n';
  }
  if (!nodes || !edges) throw IoError("failed writing graph " + prefix.string());
}

ProvenanceGraph read_graph(const std::filesystem::path& prefix) {
  const auto header_path = with_suffix(prefix, ".graph.json");
  std::ifstream header(header_path);
  if (!header) throw MissingArtifactError("graph", header_path.string());
  json h;
  try {
    h = json::parse(header);
    std::map<std::string, Entity> nodes;
    std::ifstream nin(with_suffix(prefix, ".nodes.jsonl"));
    if (!nin) throw MissingArtifactError("graph nodes", with_suffix(prefix, ".nodes.jsonl").string());
    std::string line;
    while (std::getline(nin, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      const auto kind = parse_entity_kind(j.at("kind").get<std::string>());
      if (!kind) throw FormatError("unknown entity kind in " + prefix.string());
      Entity e{j.at("uuid").get<std::string>(), *kind, *parse_attrs(j.at("attrs")),
               IdentityLabel(j.at("identity").get<std::string>())};
      nodes.emplace(e.uuid, std::move(e));
    }
    std::vector<ProvEdge> edges;
    std::ifstream ein(with_suffix(prefix, ".edges.jsonl"));
    if (!ein) throw MissingArtifactError("graph edges", with_suffix(prefix, ".edges.jsonl").string());
    while (std::getline(ein, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      edges.push_back(ProvEdge{j.at("src").get<std::string>(), j.at("dst").get<std::string>(),
                               j.at("operation").get<std::string>(), j.at("first_ts").get<std::int64_t>(),
                               j.at("last_ts").get<std::int64_t>(), j.at("weight").get<std::uint64_t>()});
    }
    return ProvenanceGraph(h.at("name").get<std::string>(), std::move(nodes), std::move(edges),
                           h.at("window_start").get<std::int64_t>(), h.at("window_end").get<std::int64_t>());
  } catch (const json::exception& ex) {
    throw FormatError("corrupt graph artifact " + prefix.string() + ": " + ex.what());
  }
}

}  // namespace provbind
