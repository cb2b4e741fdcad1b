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

// Offline stand-in for a whole council of chat models. Every reply is a pure
// function of (member, request text), so runs are reproducible without a
// network or credentials.
//
// Respondents write answers whose length depends on the member; some
// exceed a 250-word limit and get truncated downstream. Judges prefer the
// longer response, with member-specific noise, position bias and conviction,
// and occasionally forget to emit a verdict label.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lmc/gateway.hpp"
#include "lmc/pipeline.hpp"

namespace lmc {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in [0, 1) from a hash and a salt.
inline double hash_unit(std::uint64_t h, std::uint64_t salt) {
  return static_cast<double>(splitmix64(h ^ splitmix64(salt)) >> 11) * 0x1.0p-53;
}

class MockCouncilTransport final : public Transport {
 public:
  bool requires_credential() const override { return false; }

  TransportReply send(const ChatRequest& req, const ProviderSpec& spec, const std::string&) override {
    const std::uint64_t member = fnv1a64(req.member_id);
    const std::uint64_t h = fnv1a64(req.user_text, fnv1a64(spec.model_name, member));
    switch (req.purpose) {
      case Purpose::kExpand: return TransportReply::ok(expand(req.user_text, h));
      case Purpose::kRespond: return TransportReply::ok(respond(member, h));
      case Purpose::kJudge:
      case Purpose::kCalibrate: return TransportReply::ok(judge(req.user_text, member, h));
    }
    return TransportReply::fatal(400, "unknown purpose");
  }

  // Member traits, exposed for tests.
  static double verbosity(std::uint64_t member) { return 70.0 + 260.0 * hash_unit(member, 1); }
  static double position_bias(std::uint64_t member) { return 0.05 + 0.35 * hash_unit(member, 2); }
  static double noise(std::uint64_t member) { return 0.2 + 0.8 * hash_unit(member, 3); }
  static double conviction(std::uint64_t member) { return 0.5 + 2.5 * hash_unit(member, 4); }

 private:
  static const std::vector<std::string_view>& sentences() {
    static const std::vector<std::string_view> bank = {
        "It makes sense that you feel torn about this.",
        "Try to name what you need from the other person before you talk.",
        "A calm conversation at a good moment usually goes further than a confrontation.",
        "Your feelings are valid even if the situation is complicated.",
        "Consider writing down the main points you want to make.",
        "It may help to ask how they see the situation first.",
        "Set a boundary that you can actually keep.",
        "If the relationship matters to you, say so directly.",
        "Give yourself time to cool down before deciding anything.",
        "You do not have to solve everything in one talk.",
        "Look for a small step you can take this week.",
        "Someone you trust outside the situation could offer perspective.",
        "Be honest about your part without taking all of the blame.",
        "Acknowledge their feelings as well as your own.",
        "Whatever you decide, be kind to yourself afterwards.",
    };
    return bank;
  }

  static std::string expand(std::string_view prompt, std::uint64_t h) {
    std::string out = "I am facing a difficult situation and I am not sure what to do. ";
    const auto& bank = sentences();
    out += "Here is what happened: ";
    const auto words = word_count(prompt);
    out += "the situation involves " + std::to_string(words % 7 + 2) + " people close to me. ";
    out += "I keep thinking about it and I feel anxious and conflicted. ";
    out += std::string(bank[h % bank.size()]) + " ";
    out += "That is what a friend told me, but I still do not know how to act.";
    return out;
  }

  static std::string respond(std::uint64_t member, std::uint64_t h) {
    const auto& bank = sentences();
    const double target = verbosity(member) * (0.85 + 0.3 * hash_unit(h, 9));
    std::string out;
    std::size_t words = 0;
    std::uint64_t state = h;
    while (static_cast<double>(words) < target) {
      state = splitmix64(state);
      const auto s = bank[state % bank.size()];
      if (!out.empty()) out += ' ';
      out += s;
      words += word_count(s);
    }
    return out;
  }

  static std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
    const auto a = text.find(open);
    if (a == std::string_view::npos) return {};
    const auto start = a + open.size();
    const auto b = text.find(close, start);
    if (b == std::string_view::npos) return {};
    return text.substr(start, b - start);
  }

  static std::string judge(std::string_view prompt, std::uint64_t member, std::uint64_t h) {
    const double la = static_cast<double>(word_count(between(prompt, kResponseAStart, kResponseAEnd)));
    const double lb = static_cast<double>(word_count(between(prompt, kResponseBStart, kResponseBEnd)));
    if (hash_unit(h, 10) < 0.01) return "Both responses have merit and it is hard to choose between them.";
    double u = std::clamp(hash_unit(h, 11), 1e-9, 1.0 - 1e-9);
    double z = 3.0 * std::log((la + 1.0) / (lb + 1.0)) + noise(member) * std::log(u / (1.0 - u));
    bool prefer_a = z > 0.0;
    if (hash_unit(h, 12) < position_bias(member)) prefer_a = true;
    const bool strong = std::abs(z) > conviction(member);
    const char* token = prefer_a ? (strong ? "[[A>>B]]" : "[[A>B]]") : (strong ? "[[B>>A]]" : "[[B>A]]");
    std::string out = "Response A has " + std::to_string(static_cast<int>(la)) + " words and Response B has " +
                      std::to_string(static_cast<int>(lb)) + " words. ";
    out += prefer_a ? "Response A engages more fully with the situation. "
                    : "Response B engages more fully with the situation. ";
    out += "My final verdict is ";
    out += token;
    return out;
  }
};

}  // namespace lmc
