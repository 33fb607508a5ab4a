// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idk/jsonl.hpp"

namespace idk {

inline constexpr std::string_view kRefusalTemplate =
    "This question is beyond the scope of my knowledge, and I am not sure what the answer is.";
inline constexpr std::string_view kRefusalSubstring = "I am not sure what the answer is";

struct Normalization {
  bool casefold = true;
  bool collapse_whitespace = true;

  bool operator==(const Normalization&) const = default;
};

struct JudgeConfig {
  std::string refusal_template{kRefusalTemplate};
  std::vector<std::string> refusal_substrings{std::string(kRefusalSubstring)};
  Normalization normalization;

  void validate() const;
};

// {"refusal_template", "refusal_substrings", "normalization": {"casefold", "whitespace_collapse"}}.
// Missing keys keep their defaults; unknown keys are rejected.
JudgeConfig judge_config_from_json(const json& j);
json to_json(const JudgeConfig& cfg);

/// Unicode full case folding and/or collapsing whitespace runs to one space
/// (leading and trailing whitespace dropped). Invalid UTF-8 bytes become U+FFFD.
std::string normalize(std::string_view text, const Normalization& norm);

enum class Verdict { kRefusal, kCorrect, kIncorrect };

std::string_view to_string(Verdict v);

/// Judge with the configured markers pre-normalized. Cheap to copy around;
/// all methods are const and thread-safe.
class Judge {
 public:
  explicit Judge(JudgeConfig cfg = {});

  const JudgeConfig& config() const noexcept { return cfg_; }

  /// True iff some normalized gold answer occurs in the normalized response.
  bool is_correct(std::string_view response, std::span<const std::string> answers) const;

  /// True iff the template or any configured substring occurs in the response.
  bool is_refusal(std::string_view response) const;

  /// Refusal wins over correctness.
  Verdict verdict(std::string_view response, std::span<const std::string> answers) const;

  std::string normalized(std::string_view text) const { return normalize(text, cfg_.normalization); }

 private:
  bool contains_refusal_marker(const std::string& normalized_response) const;

  JudgeConfig cfg_;
  std::vector<std::string> markers_;
};

bool judge_correct(std::string_view response, std::span<const std::string> answers,
                   const JudgeConfig& cfg = {});
bool judge_refusal(std::string_view response, const JudgeConfig& cfg = {});

}  // namespace idk
