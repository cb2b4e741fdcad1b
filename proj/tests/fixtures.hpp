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

// Small builders shared by the test suites.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lmc/ballots.hpp"
#include "lmc/common.hpp"

namespace lmc::testing {

inline constexpr const char* kRef = "ref";

// Both games of one battle: `original` with the respondent in A, `swapped`
// with the respondent in B.
inline void add_couplet(std::vector<Ballot>& out, const std::string& judge, const std::string& dilemma,
                        const std::string& respondent, Verdict original, Verdict swapped,
                        const std::string& ref = kRef) {
  out.push_back(Ballot{dilemma, judge, respondent, ref, original, "", Game::kOriginal});
  out.push_back(Ballot{dilemma, judge, ref, respondent, swapped, "", Game::kSwapped});
}

inline Verdict random_verdict(std::mt19937_64& rng) {
  return kAllVerdicts[std::uniform_int_distribution<std::size_t>(0, kAllVerdicts.size() - 1)(rng)];
}

// Fresh scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lmc_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() : guard_([this](std::string_view m) { messages.emplace_back(m); }) {}
  std::vector<std::string> messages;

  bool contains(std::string_view needle) const {
    for (const auto& m : messages) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

 private:
  ScopedWarningSink guard_;
};

}  // namespace lmc::testing
