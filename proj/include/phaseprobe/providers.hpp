#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace phaseprobe::providers {

struct ProviderConfig {
  std::string provider_id;
  std::string base_url;  // "replay:<dir>" or an http(s) chat endpoint
  std::string model_name;
  std::optional<std::string> system_prompt;  // opaque persona text
  nlohmann::json sampling = nlohmann::json::object();  // sent and recorded verbatim
  double rate_limit = 60.0;  // request starts per minute, > 0
  int max_retries = 2;       // transient transport retries, >= 0
  int backoff_base_ms = 250;
  std::vector<std::string> refusal_patterns;  // case-insensitive regex, applied to response text

  static ProviderConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string api_key_env_var() const;  // PHASEPROBE_API_KEY_<PROVIDER_ID>
  void validate() const;                // throws ManifestInvalid
};

enum class Outcome { ok, refusal, transport_error };
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

// One stateless prompt -> response exchange with full provenance.
struct SessionRecord {
  std::string record_id;
  std::string provider_id;
  std::string model_name;
  std::string prompt_id;
  int trial_index = 0;
  std::string request_text;
  std::string response_text;
  nlohmann::json sampling = nlohmann::json::object();
  std::string started_at;
  std::string finished_at;
  Outcome outcome = Outcome::ok;
  int attempts = 1;
  std::string error;

  nlohmann::json to_json() const;
  static SessionRecord from_json(const nlohmann::json& j);
};

// A disposable session's entire content: an optional system message and
// exactly one user message. There is no history parameter anywhere, so a
// multi-turn exchange cannot be expressed.
struct ChatTurn {
  std::optional<std::string> system;
  std::string user;
};

struct AttemptResult {
  enum class Status { ok, refusal, transport };
  Status status = Status::ok;
  std::string text;
  std::string error;
  bool retryable = false;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Executes one fresh session. prompt_id / trial_index key replay
  // fixtures and are recorded for provenance.
  virtual AttemptResult complete(const ProviderConfig& config, const ChatTurn& turn,
                                 std::string_view prompt_id, int trial_index) = 0;
};

// Deterministic offline provider resolving (prompt_id, trial_index) to
// `<dir>/<prompt_id>/<trial_index>.txt`.
class ReplayBackend final : public ChatBackend {
 public:
  explicit ReplayBackend(std::filesystem::path dir);  // throws FixtureMissing if dir absent
  AttemptResult complete(const ProviderConfig&, const ChatTurn&, std::string_view prompt_id,
                         int trial_index) override;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

std::unique_ptr<ChatBackend> load_replay_fixtures(const std::filesystem::path& dir);

// Test double: replays a programmed sequence of attempt results and keeps
// a transcript of every session it saw.
class ScriptedBackend final : public ChatBackend {
 public:
  void push(AttemptResult result);
  void push_ok(std::string text);
  void push_transport_failure(std::string error, bool retryable = true);

  AttemptResult complete(const ProviderConfig&, const ChatTurn& turn, std::string_view prompt_id,
                         int trial_index) override;

  struct SeenSession {
    ChatTurn turn;
    std::string prompt_id;
    int trial_index;
  };
  const std::vector<SeenSession>& transcript() const { return transcript_; }

 private:
  std::mutex mutex_;
  std::vector<AttemptResult> script_;
  std::size_t next_ = 0;
  std::vector<SeenSession> transcript_;
};

// Live adapter for chat-completion style HTTP APIs. Builds a fresh
// connection per attempt; bearer token read from the provider's
// PHASEPROBE_API_KEY_<ID> environment variable.
class HttpChatBackend final : public ChatBackend {
 public:
  AttemptResult complete(const ProviderConfig&, const ChatTurn&, std::string_view prompt_id,
                         int trial_index) override;
};

// Token bucket: capacity = permits-per-minute, continuous refill, so at
// most rate_limit request starts are admitted in any minute.
class RateLimiter {
 public:
  using ClockFn = std::function<std::chrono::steady_clock::time_point()>;
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit RateLimiter(double permits_per_minute, ClockFn clock = {}, SleepFn sleep = {});

  void acquire();       // blocks until a permit is available
  bool try_acquire();   // non-blocking

 private:
  void refill_locked(std::chrono::steady_clock::time_point now);

  std::mutex mutex_;
  double capacity_;
  double tokens_;
  double per_ms_;
  std::chrono::steady_clock::time_point last_;
  ClockFn clock_;
  SleepFn sleep_;
};

struct SessionHooks {
  RateLimiter* limiter = nullptr;
  std::function<void(std::chrono::milliseconds)> sleep;  // backoff sleep, injectable for tests
};

// Runs one disposable session: admission through the rate limiter, a
// single system+user exchange, exponential backoff on transient
// transport errors (attempts <= max_retries + 1). Failures come back as
// the record's outcome, never as exceptions, so partial results stay
// recordable.
SessionRecord complete_disposable(const ProviderConfig& config, ChatBackend& backend,
                                  std::string_view prompt_text, std::string_view prompt_id,
                                  int trial_index, const SessionHooks& hooks = {});

// Picks the backend from config.base_url ("replay:<dir>" or http/https).
// Relative replay paths resolve against `base_dir` when given.
std::unique_ptr<ChatBackend> make_backend(const ProviderConfig& config,
                                          const std::filesystem::path& base_dir = {});

}  // namespace phaseprobe::providers
