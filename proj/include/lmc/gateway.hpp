// Copyright 2026 The LMC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Provider-agnostic chat completion with bounded parallelism, a sliding
// window rate limiter, retries with jittered exponential backoff and an
// on-disk response cache keyed by a SHA-256 digest of the request content.
//
// Transports do the actual I/O: HttpTransport speaks the OpenAI-compatible
// /chat/completions protocol, ScriptedTransport is an instrumented in-process
// stand-in for tests and mock runs.

#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "lmc/common.hpp"

namespace lmc {

enum class Purpose { kExpand, kRespond, kJudge, kCalibrate };

inline std::string_view to_string(Purpose p) {
  switch (p) {
    case Purpose::kExpand: return "expand";
    case Purpose::kRespond: return "respond";
    case Purpose::kJudge: return "judge";
    case Purpose::kCalibrate: return "calibrate";
  }
  return "?";
}

struct ProviderSpec {
  std::string provider_id;
  std::string base_endpoint;
  std::string model_name;
  int max_parallel = 1;
  int requests_per_minute = 60;
  std::string auth_env_var;
  std::chrono::milliseconds timeout{120000};

  void validate() const {
    if (provider_id.empty()) throw Error(ErrorCode::kConfig, "provider_id is empty");
    if (max_parallel < 1) throw Error(ErrorCode::kConfig, provider_id + ": max_parallel must be >= 1");
    if (requests_per_minute < 1) {
      throw Error(ErrorCode::kConfig, provider_id + ": requests_per_minute must be >= 1");
    }
  }
};

struct ChatRequest {
  std::string member_id;
  std::optional<std::string> system_text;
  std::string user_text;
  std::optional<double> temperature;  // nullopt: provider default
  int max_tokens = 1024;
  Purpose purpose = Purpose::kRespond;

  void validate() const {
    if (user_text.empty()) throw Error(ErrorCode::kInvalidArgument, "user_text is empty");
    if (max_tokens < 1) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
    if (temperature && (*temperature < 0.0 || *temperature > 2.0)) {
      throw Error(ErrorCode::kInvalidArgument, "temperature outside [0, 2]");
    }
    if (purpose == Purpose::kJudge && temperature != 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "judging requests must use temperature 0");
    }
  }
};

struct ChatResult {
  std::string request_digest;
  std::string text;
  std::int64_t latency_ms = 0;
  bool from_cache = false;
  int attempt_count = 1;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

// Request echo stored next to each cached result; also the digest preimage.
inline Json request_echo(const ChatRequest& req, const ProviderSpec& spec) {
  return Json{{"provider_id", spec.provider_id},
              {"model_name", spec.model_name},
              {"system_text", req.system_text ? Json(*req.system_text) : Json(nullptr)},
              {"user_text", req.user_text},
              {"temperature", req.temperature ? Json(*req.temperature) : Json(nullptr)},
              {"max_tokens", req.max_tokens}};
}

inline std::string request_digest(const ChatRequest& req, const ProviderSpec& spec) {
  return sha256_hex(request_echo(req, spec).dump());
}

// ---------------------------------------------------------------------------
// Time

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point t) = 0;
  void sleep_for(std::chrono::nanoseconds d) { sleep_until(now() + d); }
};

class SystemClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_until(time_point t) override { std::this_thread::sleep_until(t); }
};

// Sleeping advances virtual time instantly; lets tests check rate windows and
// backoff schedules without waiting.
class VirtualClock final : public Clock {
 public:
  time_point now() override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_until(time_point t) override {
    std::lock_guard lock(mu_);
    if (t > now_) now_ = t;
  }
  void advance(std::chrono::nanoseconds d) {
    std::lock_guard lock(mu_);
    now_ += d;
  }

 private:
  std::mutex mu_;
  time_point now_{};
};

// At most `per_minute` acquisitions in any 60 s window. Acquisition is
// serialized: the caller holding the lock waits out the window.
class RateLimiter {
 public:
  RateLimiter(int per_minute, Clock& clock) : per_minute_(static_cast<std::size_t>(per_minute)), clock_(clock) {}

  Clock::time_point acquire() {
    std::lock_guard lock(mu_);
    constexpr auto kWindow = std::chrono::seconds(60);
    for (;;) {
      const auto now = clock_.now();
      while (!issued_.empty() && issued_.front() + kWindow <= now) issued_.pop_front();
      if (issued_.size() < per_minute_) {
        issued_.push_back(now);
        return now;
      }
      clock_.sleep_until(issued_.front() + kWindow);
    }
  }

 private:
  std::size_t per_minute_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
};

class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int count_;
};

// ---------------------------------------------------------------------------
// Cache

struct CachedEntry {
  std::string text;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
};

// One JSON file per digest: {"request": <echo>, "result": {...}}.
class ResponseCache {
 public:
  explicit ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path_for(const std::string& digest) const { return dir_ / (digest + ".json"); }

  std::optional<CachedEntry> load(const std::string& digest) const {
    const auto path = path_for(digest);
    if (!fs::exists(path)) return std::nullopt;
    try {
      const Json j = Json::parse(read_file(path));
      const Json& r = j.at("result");
      return CachedEntry{r.at("text").get<std::string>(), r.value("latency_ms", std::int64_t{0}),
                         r.value("attempt_count", 1)};
    } catch (const std::exception& e) {
      warn("ignoring unreadable cache entry " + path.string() + ": " + e.what());
      return std::nullopt;
    }
  }

  void store(const std::string& digest, const Json& echo, const CachedEntry& entry) const {
    const Json j{{"request", echo},
                 {"result",
                  {{"text", entry.text}, {"latency_ms", entry.latency_ms}, {"attempt_count", entry.attempt_count}}}};
    write_file_atomic(path_for(digest), j.dump(2));
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
};

// ---------------------------------------------------------------------------
// Transports

struct TransportReply {
  enum class Kind { kOk, kTransient, kTimeout, kFatal };
  Kind kind = Kind::kOk;
  std::string text;
  int status = 200;
  std::string message;

  static TransportReply ok(std::string text) { return {Kind::kOk, std::move(text), 200, {}}; }
  static TransportReply transient(int status, std::string msg = {}) {
    return {Kind::kTransient, {}, status, std::move(msg)};
  }
  static TransportReply timeout() { return {Kind::kTimeout, {}, 0, "timed out"}; }
  static TransportReply fatal(int status, std::string msg = {}) { return {Kind::kFatal, {}, status, std::move(msg)}; }
};

inline TransportReply::Kind classify_status(int status) {
  if (status >= 200 && status < 300) return TransportReply::Kind::kOk;
  if (status == 408) return TransportReply::Kind::kTimeout;
  if (status == 409 || status == 425 || status == 429 || status >= 500) return TransportReply::Kind::kTransient;
  return TransportReply::Kind::kFatal;
}

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const ChatRequest& req, const ProviderSpec& spec, const std::string& credential) = 0;
  virtual bool requires_credential() const { return true; }
};

// In-process transport: `respond` produces each reply (it may return
// transient errors to exercise retries). Tracks call counts and the peak
// number of concurrent in-flight calls; optional per-call latency.
class ScriptedTransport : public Transport {
 public:
  using Responder = std::function<TransportReply(const ChatRequest&, const ProviderSpec&, int call_index)>;
  using Latency = std::function<std::chrono::microseconds(const ChatRequest&, int call_index)>;

  explicit ScriptedTransport(Responder respond, Latency latency = nullptr)
      : respond_(std::move(respond)), latency_(std::move(latency)) {}

  TransportReply send(const ChatRequest& req, const ProviderSpec& spec, const std::string&) override {
    const int call = calls_++;
    const int now = ++in_flight_;
    int peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
      std::atomic<int>& n;
      ~Leave() { --n; }
    } leave{in_flight_};
    if (latency_) std::this_thread::sleep_for(latency_(req, call));
    return respond_(req, spec, call);
  }

  bool requires_credential() const override { return false; }

  int calls() const { return calls_.load(); }
  int peak_concurrency() const { return peak_.load(); }

 private:
  Responder respond_;
  Latency latency_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

// ---------------------------------------------------------------------------
// Gateway

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};
  double jitter = 0.5;  // fraction of the delay randomized
};

struct GatewayOptions {
  std::optional<fs::path> cache_dir;
  RetryPolicy retry;
  std::shared_ptr<Clock> clock;  // defaults to SystemClock
  std::function<std::optional<std::string>(const std::string&)> env_lookup;  // defaults to getenv
  std::uint64_t jitter_seed = 0x5eed;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Transport> transport, GatewayOptions options = {})
      : transport_(std::move(transport)), options_(std::move(options)), jitter_rng_(make_stream(options_.jitter_seed)) {
    if (!options_.clock) options_.clock = std::make_shared<SystemClock>();
    if (!options_.env_lookup) {
      options_.env_lookup = [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
      };
    }
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
  }

  ChatResult complete(const ChatRequest& req, const ProviderSpec& spec) {
    req.validate();
    spec.validate();
    ChatResult result;
    result.request_digest = request_digest(req, spec);
    if (cache_) {
      if (auto hit = cache_->load(result.request_digest)) {
        ++cache_hits_;
        result.text = std::move(hit->text);
        result.latency_ms = hit->latency_ms;
        result.attempt_count = hit->attempt_count;
        result.from_cache = true;
        return result;
      }
    }
    std::string credential;
    if (transport_->requires_credential()) {
      auto value = spec.auth_env_var.empty() ? std::nullopt : options_.env_lookup(spec.auth_env_var);
      if (!value) {
        throw Error(ErrorCode::kAuthMissing,
                    spec.provider_id + ": credential variable '" + spec.auth_env_var + "' is not set");
      }
      credential = std::move(*value);
    }

    Provider& provider = provider_for(spec);
    Clock& clock = *options_.clock;
    TransportReply last;
    for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
      provider.limiter.acquire();
      const auto start = clock.now();
      provider.slots.acquire();
      try {
        last = transport_->send(req, spec, credential);
      } catch (...) {
        provider.slots.release();
        throw;
      }
      provider.slots.release();
      ++network_calls_;
      if (last.kind == TransportReply::Kind::kOk) {
        result.text = std::move(last.text);
        result.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(clock.now() - start).count();
        result.attempt_count = attempt;
        if (cache_) {
          cache_->store(result.request_digest, request_echo(req, spec),
                        CachedEntry{result.text, result.latency_ms, result.attempt_count});
        }
        return result;
      }
      if (last.kind == TransportReply::Kind::kFatal) {
        throw Error(ErrorCode::kProviderError, spec.provider_id + ": status " + std::to_string(last.status) +
                                                   (last.message.empty() ? "" : ": " + last.message));
      }
      if (attempt < options_.retry.max_attempts) clock.sleep_for(backoff_delay(attempt));
    }
    if (last.kind == TransportReply::Kind::kTimeout) {
      throw Error(ErrorCode::kTimeout, spec.provider_id + ": timed out after " +
                                           std::to_string(options_.retry.max_attempts) + " attempt(s)");
    }
    throw Error(ErrorCode::kRetriesExhausted, spec.provider_id + ": gave up after " +
                                                  std::to_string(options_.retry.max_attempts) +
                                                  " attempt(s); last status " + std::to_string(last.status));
  }

  // Results are positional; a failed item carries its error without
  // aborting the rest of the batch.
  std::vector<Expected<ChatResult>> complete_batch(std::span<const ChatRequest> reqs, const ProviderSpec& spec) {
    std::vector<std::pair<ChatRequest, ProviderSpec>> items;
    items.reserve(reqs.size());
    for (const auto& r : reqs) items.emplace_back(r, spec);
    return complete_all(items);
  }

  // Like complete_batch, but each request names its own provider. Each
  // provider's concurrency and rate limits still apply.
  std::vector<Expected<ChatResult>> complete_all(std::span<const std::pair<ChatRequest, ProviderSpec>> items) {
    std::vector<std::optional<Expected<ChatResult>>> slots(items.size());
    std::map<std::string, int> parallel;
    for (const auto& [req, spec] : items) parallel[spec.provider_id] = std::max(1, spec.max_parallel);
    int workers = 0;
    for (const auto& [id, n] : parallel) workers += n;
    parallel_for(
        items.size(),
        [&](std::size_t i) {
          try {
            slots[i].emplace(complete(items[i].first, items[i].second));
          } catch (const Error& e) {
            slots[i].emplace(e);
          } catch (const std::exception& e) {
            slots[i].emplace(Error(ErrorCode::kProviderError, e.what()));
          }
        },
        static_cast<unsigned>(std::max(1, workers)));
    std::vector<Expected<ChatResult>> out;
    out.reserve(items.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
  }

  std::chrono::milliseconds backoff_delay(int attempt) {
    const auto& p = options_.retry;
    double delay = static_cast<double>(p.base_delay.count()) * std::pow(2.0, attempt - 1);
    delay = std::min(delay, static_cast<double>(p.max_delay.count()));
    double u;
    {
      std::lock_guard lock(jitter_mu_);
      u = uniform_unit(jitter_rng_);
    }
    delay *= 1.0 - p.jitter + p.jitter * u;
    return std::chrono::milliseconds(static_cast<std::int64_t>(delay));
  }

  int network_calls() const { return network_calls_.load(); }
  int cache_hits() const { return cache_hits_.load(); }

 private:
  struct Provider {
    Provider(const ProviderSpec& spec, Clock& clock)
        : limiter(spec.requests_per_minute, clock), slots(spec.max_parallel) {}
    RateLimiter limiter;
    Semaphore slots;
  };

  Provider& provider_for(const ProviderSpec& spec) {
    std::lock_guard lock(providers_mu_);
    auto it = providers_.find(spec.provider_id);
    if (it == providers_.end()) {
      it = providers_.emplace(spec.provider_id, std::make_unique<Provider>(spec, *options_.clock)).first;
    }
    return *it->second;
  }

  std::shared_ptr<Transport> transport_;
  GatewayOptions options_;
  std::optional<ResponseCache> cache_;
  std::mutex providers_mu_;
  std::map<std::string, std::unique_ptr<Provider>> providers_;
  std::mutex jitter_mu_;
  Rng jitter_rng_;
  std::atomic<int> network_calls_{0};
  std::atomic<int> cache_hits_{0};
};

}  // namespace lmc
