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

#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "fixtures.hpp"
#include "lmc/gateway.hpp"
#include "lmc/http_transport.hpp"
#include "lmc/mock.hpp"

namespace lmc {
namespace {

using namespace std::chrono_literals;

ProviderSpec spec(int max_parallel = 2, int rpm = 100000) {
  ProviderSpec s;
  s.provider_id = "fake";
  s.base_endpoint = "http://127.0.0.1:1";
  s.model_name = "fake-model";
  s.max_parallel = max_parallel;
  s.requests_per_minute = rpm;
  s.auth_env_var = "FAKE_KEY";
  return s;
}

ChatRequest request(const std::string& text, Purpose purpose = Purpose::kRespond) {
  ChatRequest r;
  r.member_id = "m";
  r.user_text = text;
  r.purpose = purpose;
  if (purpose == Purpose::kJudge) r.temperature = 0.0;
  return r;
}

GatewayOptions fast_options() {
  GatewayOptions o;
  o.clock = std::make_shared<VirtualClock>();
  o.retry.base_delay = 1ms;
  return o;
}

std::shared_ptr<ScriptedTransport> echo_transport(ScriptedTransport::Latency latency = nullptr) {
  return std::make_shared<ScriptedTransport>(
      [](const ChatRequest& r, const ProviderSpec&, int) { return TransportReply::ok("echo:" + r.user_text); },
      std::move(latency));
}

TEST(Digest, DeterministicAndContentSensitive) {
  const auto a = request_digest(request("hello"), spec());
  EXPECT_EQ(a, request_digest(request("hello"), spec()));
  EXPECT_EQ(a.size(), 64u);
  EXPECT_NE(a, request_digest(request("hello!"), spec()));
  auto other = spec();
  other.model_name = "other";
  EXPECT_NE(a, request_digest(request("hello"), other));
  auto hot = request("hello");
  hot.temperature = 0.7;
  EXPECT_NE(a, request_digest(hot, spec()));
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Gateway, CacheIsIdempotent) {
  testing::TempDir dir("cache");
  auto transport = echo_transport();
  auto opts = fast_options();
  opts.cache_dir = dir.path();
  Gateway first(transport, opts);
  const auto a = first.complete(request("q"), spec());
  EXPECT_FALSE(a.from_cache);
  const auto cached_file = read_file(ResponseCache(dir.path()).path_for(a.request_digest));

  Gateway second(transport, opts);
  const auto b = second.complete(request("q"), spec());
  EXPECT_TRUE(b.from_cache);
  EXPECT_EQ(b.text, a.text);
  EXPECT_EQ(b.request_digest, a.request_digest);
  EXPECT_EQ(transport->calls(), 1);
  EXPECT_EQ(second.network_calls(), 0);
  EXPECT_EQ(read_file(ResponseCache(dir.path()).path_for(a.request_digest)), cached_file);
  const Json entry = Json::parse(cached_file);
  EXPECT_EQ(entry.at("request").at("user_text"), "q");
}

TEST(Gateway, RejectsInvalidRequests) {
  Gateway g(echo_transport(), fast_options());
  EXPECT_THROW(g.complete(request(""), spec()), Error);
  auto judge = request("x", Purpose::kJudge);
  judge.temperature = 0.3;
  EXPECT_THROW(g.complete(judge, spec()), Error);
  auto bad = spec();
  bad.max_parallel = 0;
  EXPECT_THROW(g.complete(request("x"), bad), Error);
}

TEST(Gateway, RetriesTransientFailures) {
  auto transport = std::make_shared<ScriptedTransport>([](const ChatRequest&, const ProviderSpec&, int call) {
    return call < 2 ? TransportReply::transient(503) : TransportReply::ok("fine");
  });
  Gateway g(transport, fast_options());
  const auto r = g.complete(request("x"), spec());
  EXPECT_EQ(r.text, "fine");
  EXPECT_EQ(r.attempt_count, 3);
  EXPECT_EQ(g.network_calls(), 3);
}

int code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.code());
  }
  return -1;
}

TEST(Gateway, ErrorTaxonomy) {
  auto always = [](TransportReply reply) {
    return std::make_shared<ScriptedTransport>(
        [reply](const ChatRequest&, const ProviderSpec&, int) { return reply; });
  };
  auto opts = fast_options();
  opts.retry.max_attempts = 3;
  Gateway fatal(always(TransportReply::fatal(400, "bad")), opts);
  EXPECT_EQ(code_of([&] { fatal.complete(request("x"), spec()); }), static_cast<int>(ErrorCode::kProviderError));
  Gateway slow(always(TransportReply::timeout()), opts);
  EXPECT_EQ(code_of([&] { slow.complete(request("x"), spec()); }), static_cast<int>(ErrorCode::kTimeout));
  Gateway busy(always(TransportReply::transient(429)), opts);
  EXPECT_EQ(code_of([&] { busy.complete(request("x"), spec()); }), static_cast<int>(ErrorCode::kRetriesExhausted));
  EXPECT_EQ(busy.network_calls(), 3);

  // A transport that needs credentials fails fast without the variable.
  auto http = std::make_shared<HttpTransport>();
  auto env_opts = fast_options();
  env_opts.env_lookup = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  Gateway unauth(http, env_opts);
  EXPECT_EQ(code_of([&] { unauth.complete(request("x"), spec()); }), static_cast<int>(ErrorCode::kAuthMissing));
}

TEST(Gateway, StatusClassification) {
  EXPECT_EQ(classify_status(200), TransportReply::Kind::kOk);
  EXPECT_EQ(classify_status(429), TransportReply::Kind::kTransient);
  EXPECT_EQ(classify_status(502), TransportReply::Kind::kTransient);
  EXPECT_EQ(classify_status(408), TransportReply::Kind::kTimeout);
  EXPECT_EQ(classify_status(401), TransportReply::Kind::kFatal);
}

TEST(Gateway, BacksOffExponentiallyWithinJitter) {
  auto opts = fast_options();
  opts.retry.base_delay = 100ms;
  opts.retry.max_delay = 1000ms;
  Gateway g(echo_transport(), opts);
  for (int attempt = 1; attempt <= 6; ++attempt) {
    const double nominal = std::min(100.0 * std::pow(2.0, attempt - 1), 1000.0);
    const auto d = static_cast<double>(g.backoff_delay(attempt).count());
    EXPECT_GE(d, nominal * 0.5 - 1);
    EXPECT_LE(d, nominal);
  }
}

TEST(Batch, PreservesOrderUnderRandomLatency) {
  std::mt19937_64 seed_rng(3);
  std::vector<int> delays(40);
  for (auto& d : delays) d = static_cast<int>(seed_rng() % 15);
  auto transport = echo_transport([&](const ChatRequest& r, int) {
    return std::chrono::microseconds(1000 * delays[std::stoul(r.user_text)]);
  });
  Gateway g(transport, fast_options());
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 40; ++i) reqs.push_back(request(std::to_string(i)));
  const auto out = g.complete_batch(reqs, spec(4));
  ASSERT_EQ(out.size(), reqs.size());
  for (int i = 0; i < 40; ++i) EXPECT_EQ(out[i]->text, "echo:" + std::to_string(i));
}

TEST(Batch, ConcurrencyNeverExceedsMaxParallel) {
  auto transport = echo_transport([](const ChatRequest&, int) { return std::chrono::microseconds(20000); });
  Gateway g(transport, fast_options());
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 10; ++i) reqs.push_back(request("c" + std::to_string(i)));
  const auto out = g.complete_batch(reqs, spec(3));
  EXPECT_EQ(out.size(), 10u);
  EXPECT_LE(transport->peak_concurrency(), 3);
  EXPECT_GE(transport->peak_concurrency(), 2);
}

TEST(Batch, FailedItemDoesNotAbortOthers) {
  auto transport = std::make_shared<ScriptedTransport>([](const ChatRequest& r, const ProviderSpec&, int) {
    return r.user_text == "2" ? TransportReply::fatal(400, "nope") : TransportReply::ok(r.user_text);
  });
  Gateway g(transport, fast_options());
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 5; ++i) reqs.push_back(request(std::to_string(i)));
  const auto out = g.complete_batch(reqs, spec());
  ASSERT_EQ(out.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    if (i == 2) {
      ASSERT_FALSE(out[i].has_value());
      EXPECT_EQ(out[i].error().code(), ErrorCode::kProviderError);
    } else {
      EXPECT_EQ(out[i]->text, std::to_string(i));
    }
  }
  EXPECT_TRUE(g.complete_batch(std::vector<ChatRequest>{}, spec()).empty());
}

TEST(RateLimiter, HoldsExcessRequestsUntilWindowPasses) {
  VirtualClock clock;
  RateLimiter limiter(2, clock);
  const auto t0 = limiter.acquire();
  const auto t1 = limiter.acquire();
  const auto t2 = limiter.acquire();
  EXPECT_EQ(t0, t1);
  EXPECT_EQ(t2 - t0, std::chrono::seconds(60));
  clock.advance(30s);
  const auto t3 = limiter.acquire();
  EXPECT_EQ(t3 - t0, std::chrono::seconds(90));
  const auto t4 = limiter.acquire();
  EXPECT_EQ(t4 - t0, std::chrono::seconds(120));
}

TEST(MockCouncil, DeterministicAndJudgeTokenPresent) {
  MockCouncilTransport mock;
  EXPECT_FALSE(mock.requires_credential());
  auto first = mock.send(request("Describe a dilemma."), spec(), "");
  auto second = mock.send(request("Describe a dilemma."), spec(), "");
  ASSERT_EQ(first.kind, TransportReply::Kind::kOk);
  EXPECT_EQ(first.text, second.text);
}

class LocalServer {
 public:
  LocalServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      const Json body = Json::parse(req.body);
      const std::string content = body.at("messages").back().at("content");
      if (content == "fail-once" && hits == 1) {
        res.status = 503;
        return;
      }
      if (content == "forbidden") {
        res.status = 403;
        res.set_content("{}", "application/json");
        return;
      }
      const Json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "re:" + content}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string origin() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::atomic<int> hits{0};
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpTransport, TalksToCompatibleEndpoint) {
  LocalServer server;
  auto s = spec(1);
  s.base_endpoint = server.origin();
  auto opts = fast_options();
  opts.env_lookup = [](const std::string& name) -> std::optional<std::string> {
    if (name == "FAKE_KEY") return "sekrit";
    return std::nullopt;
  };
  Gateway g(std::make_shared<HttpTransport>(), opts);
  const auto r = g.complete(request("fail-once"), s);
  EXPECT_EQ(r.text, "re:fail-once");
  EXPECT_EQ(r.attempt_count, 2);
  EXPECT_EQ(server.last_auth, "Bearer sekrit");
  EXPECT_EQ(code_of([&] { g.complete(request("forbidden"), s); }), static_cast<int>(ErrorCode::kProviderError));
}

TEST(HttpTransport, SplitsEndpoint) {
  const auto e = split_endpoint("https://api.example.com/v1/");
  EXPECT_EQ(e.origin, "https://api.example.com");
  EXPECT_EQ(e.path, "/v1");
  EXPECT_THROW(split_endpoint("api.example.com"), Error);
}

}  // namespace
}  // namespace lmc
