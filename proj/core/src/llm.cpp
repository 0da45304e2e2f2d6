#include "provbind/llm.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace provbind {

using nlohmann::json;

std::string_view to_string(AgentRole role) noexcept {
  switch (role) {
    case AgentRole::analyst:
      return "analyst";
    case AgentRole::investigator:
      return "investigator";
    case AgentRole::leader:
      return "leader";
    case AgentRole::reporter:
      return "reporter";
  }
  return "analyst";
}

AgentRole parse_agent_role(std::string_view text) {
  if (text == "analyst") return AgentRole::analyst;
  if (text == "investigator") return AgentRole::investigator;
  if (text == "leader") return AgentRole::leader;
  if (text == "reporter") return AgentRole::reporter;
  throw ConfigError("unknown agent role '" + std::string(text) + "'");
}

std::string payload_digest(const json& payload) {
  const auto text = payload.dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

// ---------------------------------------------------------------------------
// Scripted backend

namespace {

const json* lookup_path(const json& root, std::string_view path) {
  const json* node = &root;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const auto key = std::string(path.substr(start, dot == std::string_view::npos ? path.npos : dot - start));
    if (!node->is_object()) return nullptr;
    const auto it = node->find(key);
    if (it == node->end()) return nullptr;
    node = &*it;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return node;
}

}  // namespace

ScriptedBackend::ScriptedBackend(json script) {
  const auto& entries = script.is_array() ? script : script.at("entries");
  for (const auto& e : entries) {
    Entry entry;
    entry.role = parse_agent_role(e.at("role").get<std::string>());
    if (e.contains("digest")) entry.digest = e.at("digest").get<std::string>();
    if (e.contains("match"))
      for (const auto& [path, value] : e.at("match").items()) entry.match.emplace_back(path, value);
    if (e.contains("responses")) {
      for (const auto& r : e.at("responses")) entry.responses.push_back(r);
    } else {
      entry.responses.push_back(e.at("response"));
    }
    if (entry.responses.empty()) throw ConfigError("script entry without responses");
    entries_.push_back(std::move(entry));
  }
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("LLM script", path.string());
  try {
    return ScriptedBackend(json::parse(in));
  } catch (const json::exception& ex) {
    throw ConfigError("invalid LLM script " + path.string() + ": " + ex.what());
  }
}

std::string ScriptedBackend::complete(const LlmRequest& request) {
  const auto digest = payload_digest(request.payload);
  calls_.push_back({request.role, digest});

  const auto matches = [&](const Entry& e) {
    return std::all_of(e.match.begin(), e.match.end(), [&](const auto& m) {
      const auto* v = lookup_path(request.payload, m.first);
      return v != nullptr && *v == m.second;
    });
  };
  Entry* chosen = nullptr;
  for (auto& e : entries_)
    if (!chosen && e.role == request.role && e.digest && *e.digest == digest) chosen = &e;
  for (auto& e : entries_)
    if (!chosen && e.role == request.role && !e.digest && !e.match.empty() && matches(e)) chosen = &e;
  for (auto& e : entries_)
    if (!chosen && e.role == request.role && !e.digest && e.match.empty()) chosen = &e;
  if (!chosen)
    throw LlmTransportError(fmt::format("no scripted {} response for payload digest {}", to_string(request.role), digest));

  const auto& r = chosen->responses[std::min(chosen->served, chosen->responses.size() - 1)];
  ++chosen->served;
  return r.is_string() ? r.get<std::string>() : r.dump();
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("LLM endpoint is empty");
}

json HttpBackend::build_body(const LlmRequest& request) const {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", request.payload.dump(2)}});
  for (const auto& r : request.repairs) {
    messages.push_back({{"role", "assistant"}, {"content", r.previous_response}});
    messages.push_back({{"role", "user"},
                        {"content", "Your previous answer was rejected: " + r.error +
                                        ". Reply again with one JSON object that follows the requested format."}});
  }
  json body{{"model", config_.model}, {"messages", messages}, {"temperature", config_.temperature}};
  if (config_.json_mode) body["response_format"] = {{"type", "json_object"}};
  return body;
}

std::string HttpBackend::complete(const LlmRequest& request) {
  // Split "scheme://host[:port]/path".
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("LLM endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const auto base = url.substr(0, path_start);
  const auto path = path_start == std::string::npos ? std::string("/") : url.substr(path_start);

  httplib::Client client(base);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto res = client.Post(path, headers, build_body(request).dump(), "application/json");
  if (!res) throw LlmTransportError("LLM request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw LlmTransportError(fmt::format("LLM endpoint returned HTTP {}: {}", res->status, res->body.substr(0, 200)));
  const auto body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw LlmTransportError("LLM endpoint returned non-JSON body");
  const auto* content = lookup_path(body, "choices");
  if (!content || !content->is_array() || content->empty())
    throw LlmTransportError("LLM response has no choices");
  const auto& msg = (*content)[0];
  if (!msg.contains("message") || !msg["message"].contains("content") || !msg["message"]["content"].is_string())
    throw LlmTransportError("LLM response has no message content");
  return msg["message"]["content"].get<std::string>();
}

// ---------------------------------------------------------------------------
// Prompts

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.prompts[AgentRole::leader] =
      "You lead the security operations team for one provenance graph. You receive the table of validated "
      "indicators of compromise (IOCs), map every IOC onto the cyber kill chain, and direct follow-up work "
      "where the chain has gaps.\n"
      "Duties:\n"
      "1. Link the IOCs into one attack story, using each IOC's event description and its related_ioc_refs.\n"
      "2. State which kill-chain phases are covered (with evidence) and which are missing. Phase codes: IC "
      "initial compromise, IR internal reconnaissance, CC command and control, PE privilege escalation, LM "
      "lateral movement, MP maintain persistence, DE data exfiltration, CT covering tracks.\n"
      "3. When a stage is missing, or an IOC does not fit the story, emit a hypothesis. Hypotheses may only "
      "reference node_uuid values from the table or phase codes, and follow-up leads must name concrete "
      "graph_name and node_uuid targets.\n"
      "4. List IOCs you consider false positives so they are removed from the IOC store.\n"
      "5. Set coherent to true when the IOCs already form a complete chain with no actionable gap.\n"
      "Answer with JSON only: {\"coherent\": bool, \"phase_coverage\": {\"<phase>\": [node_uuid]}, "
      "\"missing_phases\": [phase], \"false_positives\": [node_uuid], \"hypotheses\": [{\"kind\": "
      "\"missing_stage\"|\"false_positive\", \"statement\": str, \"target_refs\": [node_uuid or phase], "
      "\"leads\": [{\"graph_name\": str, \"node_uuid\": str, \"reason\": str}]}]}";
  p.prompts[AgentRole::analyst] =
      "You are the analyst. Each input (an alert or an investigator lead) is one node that may be malicious. "
      "Judge it against the trusted benign context and decide ANOMALY or BENIGN.\n"
      "Guidance:\n"
      "1. Compare the target with both retrieved groups: similar_nodes (nearest benign embeddings) and "
      "same_identity_peers (benign nodes with the same identity). A difference from the similar node is not "
      "by itself an anomaly; flag ANOMALY only when the differing behaviour is malicious in its own right.\n"
      "2. The reason field is a hint from another agent; stay objective.\n"
      "3. Cite concrete neighbour edges, operations or timing in cited_evidence.\n"
      "4. Always give a confidence between 0 and 1, including for BENIGN.\n"
      "Answer with JSON only: {\"verdict\": \"ANOMALY\"|\"BENIGN\", \"confidence\": number, "
      "\"cited_evidence\": [str], \"rationale\": str}";
  p.prompts[AgentRole::investigator] =
      "You are the investigator. Each task is one confirmed IOC. Check its malicious behaviour from the "
      "temporal neighbourhood, assign its kill-chain phase (IC, IR, CC, PE, LM, MP, DE, CT), describe the "
      "concrete malicious action as event, and propose neighbouring nodes the analyst should check next. Each "
      "lead must carry graph_name, node_uuid and reason; the reason only explains why the node looks risky.\n"
      "Answer with JSON only: {\"event\": str, \"kill_chain_phase\": str, \"leads\": [{\"graph_name\": str, "
      "\"node_uuid\": str, \"reason\": str}]}";
  p.prompts[AgentRole::reporter] =
      "You are the reporter. From the structured attack data, write material for a Markdown report aimed at "
      "human security analysts: the campaign flow, the main IOCs, why each IOC was judged malicious, and "
      "remediation steps. Refer to IOCs by their ioc_id labels, not by node_uuid.\n"
      "Answer with JSON only: {\"summary\": str, \"remediation\": [str]}";
  return p;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  auto p = defaults();
  for (const auto role : {AgentRole::analyst, AgentRole::investigator, AgentRole::leader, AgentRole::reporter}) {
    const auto file = dir / (std::string(to_string(role)) + ".txt");
    std::ifstream in(file);
    if (!in) continue;
    std::stringstream ss;
    ss << in.rdbuf();
    p.prompts[role] = ss.str();
  }
  return p;
}

const std::string& PromptSet::get(AgentRole role) const {
  const auto it = prompts.find(role);
  if (it == prompts.end()) throw ConfigError("no prompt template for role " + std::string(to_string(role)));
  return it->second;
}

// ---------------------------------------------------------------------------
// Schemas

namespace {

bool is_phase_code(const std::string& s) {
  static const std::array<const char*, 9> codes{"IC", "IR", "CC", "PE", "LM", "MP", "DE", "CT", "UNASSIGNED"};
  return std::any_of(codes.begin(), codes.end(), [&](const char* c) { return s == c; });
}

std::optional<std::string> check_leads(const json& leads, const char* where) {
  if (!leads.is_array()) return fmt::format("{} must be an array", where);
  for (const auto& l : leads) {
    if (!l.is_object()) return fmt::format("{} entries must be objects", where);
    for (const char* key : {"graph_name", "node_uuid", "reason"})
      if (!l.contains(key) || !l[key].is_string()) return fmt::format("{} entry lacks string field {}", where, key);
  }
  return std::nullopt;
}

std::optional<std::string> check_string_array(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  if (!j[key].is_array()) return fmt::format("{} must be an array", key);
  for (const auto& x : j[key])
    if (!x.is_string()) return fmt::format("{} must contain strings", key);
  return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_response(AgentRole role, const json& r) {
  if (!r.is_object()) return "response is not a JSON object";
  switch (role) {
    case AgentRole::analyst: {
      if (!r.contains("verdict") || !r["verdict"].is_string()) return "missing string field verdict";
      const auto v = r["verdict"].get<std::string>();
      if (v != "ANOMALY" && v != "BENIGN") return "verdict must be ANOMALY or BENIGN";
      if (!r.contains("confidence") || !r["confidence"].is_number()) return "missing numeric field confidence";
      const double c = r["confidence"].get<double>();
      if (!(c >= 0.0 && c <= 1.0)) return "confidence must lie in [0, 1]";
      if (auto e = check_string_array(r, "cited_evidence")) return e;
      if (r.contains("rationale") && !r["rationale"].is_string()) return "rationale must be a string";
      return std::nullopt;
    }
    case AgentRole::investigator: {
      if (!r.contains("event") || !r["event"].is_string()) return "missing string field event";
      if (!r.contains("kill_chain_phase") || !r["kill_chain_phase"].is_string())
        return "missing string field kill_chain_phase";
      if (!is_phase_code(r["kill_chain_phase"].get<std::string>())) return "unknown kill_chain_phase";
      if (!r.contains("leads")) return "missing array field leads";
      return check_leads(r["leads"], "leads");
    }
    case AgentRole::leader: {
      if (!r.contains("coherent") || !r["coherent"].is_boolean()) return "missing boolean field coherent";
      if (!r.contains("hypotheses") || !r["hypotheses"].is_array()) return "missing array field hypotheses";
      for (const auto& h : r["hypotheses"]) {
        if (!h.is_object()) return "hypotheses entries must be objects";
        if (!h.contains("kind") || !h["kind"].is_string()) return "hypothesis lacks kind";
        const auto kind = h["kind"].get<std::string>();
        if (kind != "missing_stage" && kind != "false_positive") return "hypothesis kind must be missing_stage or false_positive";
        if (!h.contains("statement") || !h["statement"].is_string()) return "hypothesis lacks statement";
        if (auto e = check_string_array(h, "target_refs")) return e;
        if (!h.contains("target_refs")) return "hypothesis lacks target_refs";
        if (h.contains("leads"))
          if (auto e = check_leads(h["leads"], "hypothesis leads")) return e;
      }
      if (auto e = check_string_array(r, "false_positives")) return e;
      if (auto e = check_string_array(r, "missing_phases")) return e;
      if (r.contains("phase_coverage") && !r["phase_coverage"].is_object()) return "phase_coverage must be an object";
      return std::nullopt;
    }
    case AgentRole::reporter: {
      if (!r.contains("summary") || !r["summary"].is_string()) return "missing string field summary";
      if (auto e = check_string_array(r, "remediation")) return e;
      if (!r.contains("remediation")) return "missing array field remediation";
      return std::nullopt;
    }
  }
  return "unknown role";
}

std::string OfflineBackend::complete(const LlmRequest& request) {
  const auto& p = request.payload;
  json r;
  switch (request.role) {
    case AgentRole::analyst: {
      const bool alerted = p.value("reason", std::string()).starts_with("detector alert");
      r = {{"verdict", alerted ? "ANOMALY" : "BENIGN"},
           {"confidence", alerted ? 0.7 : 0.6},
           {"cited_evidence", json::array()},
           {"rationale", alerted ? "identity-consistency violation reported by the detector"
                                 : "no detector evidence for this node"}};
      break;
    }
    case AgentRole::investigator: {
      const auto ioc = p.value("ioc", json::object());
      r = {{"event", fmt::format("{} behaved outside its profile", ioc.value("identity", std::string("node")))},
           {"kill_chain_phase", "UNASSIGNED"},
           {"leads", json::array()}};
      break;
    }
    case AgentRole::leader:
      r = {{"coherent", true}, {"hypotheses", json::array()}, {"false_positives", json::array()},
           {"missing_phases", json::array()}, {"phase_coverage", json::object()}};
      break;
    case AgentRole::reporter:
      r = {{"summary", fmt::format("{} detector alerts were confirmed without further expansion.",
                                   p.value("narrative", json::array()).size())},
           {"remediation", {"Review the processes behind each IOC against their expected behaviour."}}};
      break;
  }
  return r.dump();
}

// ---------------------------------------------------------------------------
// Client

LlmClient::LlmClient(LlmBackend& backend, PromptSet prompts, std::size_t max_calls, std::size_t max_attempts)
    : backend_(backend), prompts_(std::move(prompts)), max_calls_(max_calls), max_attempts_(std::max<std::size_t>(1, max_attempts)) {}

json LlmClient::invoke(AgentRole role, const json& payload) {
  LlmRequest request{role, prompts_.get(role), payload, {}};
  const auto digest = payload_digest(payload);
  std::string last_raw;
  std::string last_error;
  bool transport_failure = false;
  for (std::size_t attempt = 1; attempt <= max_attempts_; ++attempt) {
    if (calls_used_ >= max_calls_)
      throw BudgetExhaustedError(fmt::format("LLM call budget of {} calls is spent", max_calls_));
    ++calls_used_;
    LlmCallRecord record{role, digest, attempt, false, {}};
    std::string raw;
    try {
      raw = backend_.complete(request);
    } catch (const LlmTransportError& ex) {
      transport_failure = true;
      last_error = ex.what();
      record.error = last_error;
      if (on_call) on_call(record);
      continue;
    }
    transport_failure = false;
    prompt_tokens_ += (request.system_prompt.size() + payload.dump().size()) / 4 + 1;
    completion_tokens_ += raw.size() / 4 + 1;
    const auto parsed = json::parse(raw, nullptr, false);
    std::optional<std::string> problem =
        parsed.is_discarded() ? std::optional<std::string>("response is not valid JSON") : validate_response(role, parsed);
    record.valid = !problem;
    record.error = problem.value_or("");
    if (on_call) on_call(record);
    if (!problem) return parsed;
    last_raw = raw;
    last_error = *problem;
    request.repairs.push_back({raw, *problem});
  }
  if (transport_failure) throw LlmTransportError(last_error);
  throw LlmSchemaError(fmt::format("{} response failed validation after {} attempts: {}", to_string(role),
                                   max_attempts_, last_error),
                       last_raw);
}

}  // namespace provbind
