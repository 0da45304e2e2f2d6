#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provbind/error.hpp"

namespace provbind {

enum class AgentRole { analyst, investigator, leader, reporter };

std::string_view to_string(AgentRole role) noexcept;
AgentRole parse_agent_role(std::string_view text);

/// Transport failure (network, HTTP status, unmatched script entry).
class LlmTransportError : public Error {
 public:
  using Error::Error;
};

/// The model kept answering outside the role's JSON schema.
class LlmSchemaError : public Error {
 public:
  LlmSchemaError(std::string message, std::string raw) : Error(std::move(message)), raw_(std::move(raw)) {}
  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// The call budget is spent; no request was sent.
class BudgetExhaustedError : public Error {
 public:
  using Error::Error;
};

struct RepairTurn {
  std::string previous_response;
  std::string error;
};

struct LlmRequest {
  AgentRole role = AgentRole::analyst;
  std::string system_prompt;
  nlohmann::json payload;
  std::vector<RepairTurn> repairs;  // earlier invalid answers, oldest first
};

/// Hex SHA-256 of the canonical (sorted-key, compact) payload serialisation.
std::string payload_digest(const nlohmann::json& payload);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Raw model text. Throws LlmTransportError on transport failure.
  virtual std::string complete(const LlmRequest& request) = 0;
};

/// Deterministic offline backend driven by a script document:
///
///   {"entries": [
///     {"role": "analyst", "digest": "<sha256>", "response": {...}},
///     {"role": "analyst", "match": {"target.node_uuid": "n1"}, "response": {...}},
///     {"role": "leader", "responses": [{...}, {...}]},
///     {"role": "analyst", "response": "raw text, sent verbatim"}]}
///
/// Lookup order: digest entries, then match entries (every dotted path must
/// equal the payload value), then role-only entries; file order within each
/// tier. "responses" are handed out in order and the last one repeats.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(nlohmann::json script);
  static ScriptedBackend from_file(const std::filesystem::path& path);

  std::string complete(const LlmRequest& request) override;

  struct CallRecord {
    AgentRole role;
    std::string digest;
  };
  const std::vector<CallRecord>& calls() const noexcept { return calls_; }

 private:
  struct Entry {
    AgentRole role;
    std::optional<std::string> digest;
    std::vector<std::pair<std::string, nlohmann::json>> match;
    std::vector<nlohmann::json> responses;
    std::size_t served = 0;
  };
  std::vector<Entry> entries_;
  std::vector<CallRecord> calls_;
};

/// Adapter for tests and embedding applications.
class FunctionBackend final : public LlmBackend {
 public:
  using Fn = std::function<std::string(const LlmRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const LlmRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

/// Rule-based stand-in for offline runs: trusts detector alerts, rejects
/// every other lead, expands nothing and declares the chain coherent.
class OfflineBackend final : public LlmBackend {
 public:
  std::string complete(const LlmRequest& request) override;
};

struct HttpBackendConfig {
  std::string endpoint = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key;
  double temperature = 0.0;
  bool json_mode = true;
  int timeout_seconds = 120;
};

/// OpenAI-style chat-completion client: system prompt, the payload as the
/// user message, and one assistant/user exchange per repair turn.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  std::string complete(const LlmRequest& request) override;

  /// Request body that complete() would POST.
  nlohmann::json build_body(const LlmRequest& request) const;

 private:
  HttpBackendConfig config_;
};

/// System prompts per role.
struct PromptSet {
  std::map<AgentRole, std::string> prompts;

  static PromptSet defaults();
  /// Overrides from <dir>/<role>.txt where present.
  static PromptSet load(const std::filesystem::path& dir);
  const std::string& get(AgentRole role) const;
};

/// nullopt when the response satisfies the role's schema, else the reason.
std::optional<std::string> validate_response(AgentRole role, const nlohmann::json& response);

struct LlmCallRecord {
  AgentRole role;
  std::string digest;
  std::size_t attempt = 0;
  bool valid = false;
  std::string error;
};

/// Budgeted, schema-checked access to a backend. Each attempt counts as one
/// call against max_calls.
class LlmClient {
 public:
  LlmClient(LlmBackend& backend, PromptSet prompts, std::size_t max_calls, std::size_t max_attempts = 3);

  /// Parsed, validated response. Retries schema violations with an error
  /// echo and transport failures, up to max_attempts in total.
  nlohmann::json invoke(AgentRole role, const nlohmann::json& payload);

  std::size_t calls_used() const noexcept { return calls_used_; }
  std::size_t max_calls() const noexcept { return max_calls_; }
  bool exhausted() const noexcept { return calls_used_ >= max_calls_; }
  void set_calls_used(std::size_t n) noexcept { calls_used_ = n; }
  std::uint64_t prompt_tokens() const noexcept { return prompt_tokens_; }
  std::uint64_t completion_tokens() const noexcept { return completion_tokens_; }
  void set_token_counts(std::uint64_t prompt, std::uint64_t completion) noexcept {
    prompt_tokens_ = prompt;
    completion_tokens_ = completion;
  }

  /// Invoked after every attempt; the orchestrator journals these.
  std::function<void(const LlmCallRecord&)> on_call;

 private:
  LlmBackend& backend_;
  PromptSet prompts_;
  std::size_t max_calls_;
  std::size_t max_attempts_;
  std::size_t calls_used_ = 0;
  std::uint64_t prompt_tokens_ = 0;
  std::uint64_t completion_tokens_ = 0;
};

}  // namespace provbind
