#include "phaseprobe/providers.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"
#include "phaseprobe/errors.hpp"
#include "phaseprobe/util.hpp"

namespace phaseprobe::providers {

namespace {

constexpr std::string_view kReplayScheme = "replay:";

std::chrono::milliseconds backoff_delay(int base_ms, int attempt) {
  // attempt is 1-based; first retry waits base, then doubles, capped.
  constexpr std::int64_t kMaxDelayMs = 8000;
  const std::int64_t delay = static_cast<std::int64_t>(base_ms) << (attempt - 1);
  return std::chrono::milliseconds(std::min(delay, kMaxDelayMs));
}

}  // namespace

ProviderConfig ProviderConfig::from_json(const nlohmann::json& j) {
  ProviderConfig c;
  c.provider_id = j.at("provider_id").get<std::string>();
  c.base_url = j.value("base_url", std::string{});
  c.model_name = j.value("model_name", std::string{});
  if (j.contains("system_prompt") && !j["system_prompt"].is_null()) {
    c.system_prompt = j["system_prompt"].get<std::string>();
  }
  c.sampling = j.value("sampling", nlohmann::json::object());
  c.rate_limit = j.value("rate_limit", 60.0);
  c.max_retries = j.value("max_retries", 2);
  c.backoff_base_ms = j.value("backoff_base_ms", 250);
  c.refusal_patterns = j.value("refusal_patterns", std::vector<std::string>{});
  c.validate();
  return c;
}

nlohmann::json ProviderConfig::to_json() const {
  nlohmann::json j;
  j["provider_id"] = provider_id;
  j["base_url"] = base_url;
  j["model_name"] = model_name;
  j["system_prompt"] = system_prompt ? nlohmann::json(*system_prompt) : nlohmann::json(nullptr);
  j["sampling"] = sampling;
  j["rate_limit"] = rate_limit;
  j["max_retries"] = max_retries;
  j["backoff_base_ms"] = backoff_base_ms;
  j["refusal_patterns"] = refusal_patterns;
  return j;
}

std::string ProviderConfig::api_key_env_var() const {
  std::string env = "PHASEPROBE_API_KEY_";
  for (char c : provider_id) {
    env += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
               : '_';
  }
  return env;
}

void ProviderConfig::validate() const {
  if (provider_id.empty()) throw ManifestInvalid("provider_id must be non-empty");
  if (!(rate_limit > 0)) {
    throw ManifestInvalid("provider '" + provider_id + "': rate_limit must be > 0");
  }
  if (max_retries < 0) {
    throw ManifestInvalid("provider '" + provider_id + "': max_retries must be >= 0");
  }
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::ok: return "ok";
    case Outcome::refusal: return "refusal";
    case Outcome::transport_error: return "transport_error";
  }
  return "ok";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "ok") return Outcome::ok;
  if (s == "refusal") return Outcome::refusal;
  if (s == "transport_error") return Outcome::transport_error;
  throw Error("unknown outcome: " + std::string(s));
}

nlohmann::json SessionRecord::to_json() const {
  nlohmann::json j;
  j["record_id"] = record_id;
  j["provider_id"] = provider_id;
  j["model_name"] = model_name;
  j["prompt_id"] = prompt_id;
  j["trial_index"] = trial_index;
  j["request_text"] = request_text;
  j["response_text"] = response_text;
  j["sampling"] = sampling;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["outcome"] = std::string(to_string(outcome));
  j["attempts"] = attempts;
  j["error"] = error;
  return j;
}

SessionRecord SessionRecord::from_json(const nlohmann::json& j) {
  SessionRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.provider_id = j.at("provider_id").get<std::string>();
  r.model_name = j.value("model_name", std::string{});
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.trial_index = j.at("trial_index").get<int>();
  r.request_text = j.value("request_text", std::string{});
  r.response_text = j.value("response_text", std::string{});
  r.sampling = j.value("sampling", nlohmann::json::object());
  r.started_at = j.value("started_at", std::string{});
  r.finished_at = j.value("finished_at", std::string{});
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.attempts = j.value("attempts", 1);
  r.error = j.value("error", std::string{});
  return r;
}

ReplayBackend::ReplayBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw FixtureMissing("replay fixture directory not found: " + dir_.string());
  }
}

AttemptResult ReplayBackend::complete(const ProviderConfig&, const ChatTurn&,
                                      std::string_view prompt_id, int trial_index) {
  const std::filesystem::path path =
      dir_ / std::filesystem::path(std::string(prompt_id)) / (std::to_string(trial_index) + ".txt");
  AttemptResult res;
  if (!std::filesystem::is_regular_file(path)) {
    res.status = AttemptResult::Status::transport;
    res.error = "FixtureMissing: " + path.string();
    res.retryable = false;  // a missing fixture never heals
    return res;
  }
  res.status = AttemptResult::Status::ok;
  res.text = util::read_file(path);
  // Fixtures are stored with a trailing newline for editor friendliness.
  if (!res.text.empty() && res.text.back() == '\n') res.text.pop_back();
  return res;
}

std::unique_ptr<ChatBackend> load_replay_fixtures(const std::filesystem::path& dir) {
  return std::make_unique<ReplayBackend>(dir);
}

void ScriptedBackend::push(AttemptResult result) {
  std::lock_guard lock(mutex_);
  script_.push_back(std::move(result));
}

void ScriptedBackend::push_ok(std::string text) {
  AttemptResult r;
  r.status = AttemptResult::Status::ok;
  r.text = std::move(text);
  push(std::move(r));
}

void ScriptedBackend::push_transport_failure(std::string error, bool retryable) {
  AttemptResult r;
  r.status = AttemptResult::Status::transport;
  r.error = std::move(error);
  r.retryable = retryable;
  push(std::move(r));
}

AttemptResult ScriptedBackend::complete(const ProviderConfig&, const ChatTurn& turn,
                                        std::string_view prompt_id, int trial_index) {
  std::lock_guard lock(mutex_);
  transcript_.push_back({turn, std::string(prompt_id), trial_index});
  if (next_ >= script_.size()) {
    AttemptResult r;
    r.status = AttemptResult::Status::transport;
    r.error = "scripted backend exhausted";
    r.retryable = false;
    return r;
  }
  return script_[next_++];
}

AttemptResult HttpChatBackend::complete(const ProviderConfig& config, const ChatTurn& turn,
                                        std::string_view, int) {
  AttemptResult res;

  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch match;
  if (!std::regex_match(config.base_url, match, url_re)) {
    res.status = AttemptResult::Status::transport;
    res.error = "invalid base_url: " + config.base_url;
    res.retryable = false;
    return res;
  }
  const std::string host = match[1].str();
  std::string path = match[2].matched ? match[2].str() : std::string{};
  while (!path.empty() && path.back() == '/') path.pop_back();
  path += "/chat/completions";

  nlohmann::json body;
  body["model"] = config.model_name;
  auto messages = nlohmann::json::array();
  if (turn.system) messages.push_back({{"role", "system"}, {"content", *turn.system}});
  messages.push_back({{"role", "user"}, {"content", turn.user}});
  body["messages"] = std::move(messages);
  for (const auto& [key, value] : config.sampling.items()) body[key] = value;

  httplib::Headers headers = {{"Content-Type", "application/json"}};
  if (const char* key = std::getenv(config.api_key_env_var().c_str())) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  // A brand-new client per attempt: no connection or conversation state
  // survives between sessions.
  httplib::Client client(host);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  auto http = client.Post(path, headers, body.dump(), "application/json");

  if (!http) {
    res.status = AttemptResult::Status::transport;
    res.error = "network error: " + httplib::to_string(http.error());
    res.retryable = true;
    return res;
  }

  const int status = http->status;
  if (status == 200) {
    try {
      const nlohmann::json reply = nlohmann::json::parse(http->body);
      const auto& choice = reply.at("choices").at(0);
      if (choice.value("finish_reason", std::string{}) == "content_filter") {
        res.status = AttemptResult::Status::refusal;
        res.error = "platform content filter";
        return res;
      }
      res.status = AttemptResult::Status::ok;
      res.text = choice.at("message").at("content").get<std::string>();
      return res;
    } catch (const nlohmann::json::exception& e) {
      res.status = AttemptResult::Status::transport;
      res.error = std::string("malformed completion response: ") + e.what();
      res.retryable = true;
      return res;
    }
  }

  const std::string lower_body = util::to_lower(http->body);
  if (status >= 400 && status < 500 && status != 429 &&
      (lower_body.find("content_policy") != std::string::npos ||
       lower_body.find("content_filter") != std::string::npos ||
       lower_body.find("content management policy") != std::string::npos)) {
    res.status = AttemptResult::Status::refusal;
    res.error = "platform block (HTTP " + std::to_string(status) + ")";
    return res;
  }

  res.status = AttemptResult::Status::transport;
  res.error = "HTTP " + std::to_string(status);
  res.retryable = status == 429 || status >= 500;
  return res;
}

RateLimiter::RateLimiter(double permits_per_minute, ClockFn clock, SleepFn sleep)
    : capacity_(permits_per_minute),
      tokens_(permits_per_minute),
      per_ms_(permits_per_minute / 60000.0),
      clock_(clock ? std::move(clock) : [] { return std::chrono::steady_clock::now(); }),
      sleep_(sleep ? std::move(sleep)
                   : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  last_ = clock_();
}

void RateLimiter::refill_locked(std::chrono::steady_clock::time_point now) {
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(now - last_);
  if (elapsed.count() > 0) {
    tokens_ = std::min(capacity_, tokens_ + per_ms_ * static_cast<double>(elapsed.count()));
    last_ = now;
  }
}

bool RateLimiter::try_acquire() {
  std::lock_guard lock(mutex_);
  refill_locked(clock_());
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void RateLimiter::acquire() {
  for (;;) {
    std::chrono::milliseconds wait{0};
    {
      std::lock_guard lock(mutex_);
      refill_locked(clock_());
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double missing = 1.0 - tokens_;
      wait = std::chrono::milliseconds(static_cast<std::int64_t>(missing / per_ms_) + 1);
    }
    sleep_(wait);
  }
}

SessionRecord complete_disposable(const ProviderConfig& config, ChatBackend& backend,
                                  std::string_view prompt_text, std::string_view prompt_id,
                                  int trial_index, const SessionHooks& hooks) {
  if (prompt_text.empty()) throw EmptyInput("complete_disposable: prompt text must be non-empty");

  SessionRecord record;
  record.record_id =
      config.provider_id + "/" + std::string(prompt_id) + "#" + std::to_string(trial_index);
  record.provider_id = config.provider_id;
  record.model_name = config.model_name;
  record.prompt_id = std::string(prompt_id);
  record.trial_index = trial_index;
  record.request_text = std::string(prompt_text);
  record.sampling = config.sampling;
  record.started_at = util::iso8601_now();

  const ChatTurn turn{config.system_prompt, std::string(prompt_text)};
  const auto sleep = hooks.sleep
                         ? hooks.sleep
                         : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  const int max_attempts = config.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (hooks.limiter) hooks.limiter->acquire();
    const AttemptResult res = backend.complete(config, turn, prompt_id, trial_index);
    record.attempts = attempt;

    if (res.status == AttemptResult::Status::ok) {
      record.response_text = res.text;
      record.outcome = Outcome::ok;
      record.error.clear();
      for (const std::string& pattern : config.refusal_patterns) {
        const std::regex re(pattern, std::regex::icase);
        if (std::regex_search(res.text, re)) {
          record.outcome = Outcome::refusal;
          record.error = "response matched refusal pattern: " + pattern;
          break;
        }
      }
      break;
    }
    if (res.status == AttemptResult::Status::refusal) {
      record.outcome = Outcome::refusal;
      record.error = res.error;
      break;
    }
    // transport
    record.outcome = Outcome::transport_error;
    record.error = res.error;
    if (!res.retryable || attempt == max_attempts) {
      if (res.retryable) {
        record.error += " (exhausted after " + std::to_string(attempt) + " attempts)";
      }
      break;
    }
    if (config.backoff_base_ms > 0) sleep(backoff_delay(config.backoff_base_ms, attempt));
  }

  record.finished_at = util::iso8601_now();
  return record;
}

std::unique_ptr<ChatBackend> make_backend(const ProviderConfig& config,
                                          const std::filesystem::path& base_dir) {
  const std::string& url = config.base_url;
  if (url.rfind(kReplayScheme, 0) == 0) {
    std::filesystem::path dir(url.substr(kReplayScheme.size()));
    if (dir.is_relative() && !base_dir.empty()) dir = base_dir / dir;
    return std::make_unique<ReplayBackend>(dir);
  }
  if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
    return std::make_unique<HttpChatBackend>();
  }
  throw ManifestInvalid("provider '" + config.provider_id +
                        "': base_url must be replay:<dir> or an http(s) endpoint, got '" + url +
                        "'");
}

}  // namespace phaseprobe::providers
