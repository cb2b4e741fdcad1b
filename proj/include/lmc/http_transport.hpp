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

// OpenAI-compatible chat-completions transport over cpp-httplib. Most hosted
// providers (OpenAI, Together, Mistral, Groq, vLLM, ...) accept this shape at
// <base_endpoint>/chat/completions.

#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <string>

#include "lmc/gateway.hpp"

namespace lmc {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kConfig, "endpoint lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

inline Json chat_body(const ChatRequest& req, const ProviderSpec& spec) {
  Json messages = Json::array();
  if (req.system_text) messages.push_back({{"role", "system"}, {"content", *req.system_text}});
  messages.push_back({{"role", "user"}, {"content", req.user_text}});
  Json body{{"model", spec.model_name}, {"messages", messages}, {"max_tokens", req.max_tokens}};
  if (req.temperature) body["temperature"] = *req.temperature;
  return body;
}

class HttpTransport final : public Transport {
 public:
  TransportReply send(const ChatRequest& req, const ProviderSpec& spec, const std::string& credential) override {
    const Endpoint ep = split_endpoint(spec.base_endpoint);
    httplib::Client client(ep.origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(spec.timeout).count();
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(spec.timeout).count() % 1000000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    httplib::Headers headers;
    if (!credential.empty()) headers.emplace("Authorization", "Bearer " + credential);
    auto res = client.Post(ep.path + "/chat/completions", headers, chat_body(req, spec).dump(), "application/json");
    if (!res) {
      if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
          res.error() == httplib::Error::ConnectionTimeout) {
        return TransportReply::timeout();
      }
      return TransportReply::transient(0, httplib::to_string(res.error()));
    }
    switch (classify_status(res->status)) {
      case TransportReply::Kind::kOk: break;
      case TransportReply::Kind::kTimeout: return TransportReply::timeout();
      case TransportReply::Kind::kTransient: return TransportReply::transient(res->status, res->body);
      case TransportReply::Kind::kFatal: return TransportReply::fatal(res->status, res->body);
    }
    try {
      const Json j = Json::parse(res->body);
      return TransportReply::ok(j.at("choices").at(0).at("message").at("content").get<std::string>());
    } catch (const std::exception& e) {
      return TransportReply::fatal(res->status, std::string("malformed completion body: ") + e.what());
    }
  }
};

}  // namespace lmc
