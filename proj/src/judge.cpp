// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/judge.hpp"

#include <unicode/uchar.h>
#include <unicode/ustring.h>
#include <unicode/utf16.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <set>

#include "idk/errors.hpp"

namespace idk {
namespace {

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string normalize_ascii(std::string_view text, const Normalization& norm) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (norm.collapse_whitespace && ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (norm.casefold && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

std::u16string to_utf16(std::string_view text) {
  std::u16string buf(text.size() + 1, u'\0');
  int32_t length = 0;
  UErrorCode status = U_ZERO_ERROR;
  u_strFromUTF8WithSub(reinterpret_cast<UChar*>(buf.data()), static_cast<int32_t>(buf.size()),
                       &length, text.data(), static_cast<int32_t>(text.size()), 0xFFFD, nullptr,
                       &status);
  if (U_FAILURE(status)) throw Error("UTF-8 decoding failed");
  buf.resize(static_cast<std::size_t>(length));
  return buf;
}

std::u16string fold_case(const std::u16string& in) {
  // Full folding can expand (e.g. U+00DF -> "ss"), so size twice and retry.
  std::u16string out(in.size() * 2 + 4, u'\0');
  for (int attempt = 0; attempt < 2; ++attempt) {
    UErrorCode status = U_ZERO_ERROR;
    const int32_t n = u_strFoldCase(reinterpret_cast<UChar*>(out.data()),
                                    static_cast<int32_t>(out.size()),
                                    reinterpret_cast<const UChar*>(in.data()),
                                    static_cast<int32_t>(in.size()), U_FOLD_CASE_DEFAULT, &status);
    if (status == U_BUFFER_OVERFLOW_ERROR) {
      out.assign(static_cast<std::size_t>(n) + 1, u'\0');
      continue;
    }
    if (U_FAILURE(status)) throw Error("case folding failed");
    out.resize(static_cast<std::size_t>(n));
    return out;
  }
  throw Error("case folding failed");
}

std::string to_utf8_collapsing(const std::u16string& in, bool collapse) {
  std::string out;
  out.reserve(in.size() + in.size() / 2);
  bool pending_space = false;
  int32_t i = 0;
  const auto len = static_cast<int32_t>(in.size());
  const auto* s = reinterpret_cast<const UChar*>(in.data());
  while (i < len) {
    UChar32 c;
    U16_NEXT(s, i, len, c);
    if (collapse && u_isUWhiteSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    uint8_t bytes[U8_MAX_LENGTH];
    int32_t n = 0;
    UBool error = false;
    U8_APPEND(bytes, n, U8_MAX_LENGTH, c, error);
    if (error) {
      out += "\xEF\xBF\xBD";
    } else {
      out.append(reinterpret_cast<const char*>(bytes), static_cast<std::size_t>(n));
    }
  }
  return out;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  std::string bad;
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw ValidationError("unknown keys in " + where + ": " + bad);
}

}  // namespace

void JudgeConfig::validate() const {
  if (refusal_template.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("refusal_template must be non-empty");
  }
  for (const auto& s : refusal_substrings) {
    if (s.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ValidationError("refusal_substrings entries must be non-empty");
    }
  }
}

JudgeConfig judge_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("judge config must be a JSON object");
  check_keys(j, {"refusal_template", "refusal_substrings", "normalization"}, "judge");
  JudgeConfig cfg;
  try {
    if (j.contains("refusal_template")) cfg.refusal_template = j.at("refusal_template").get<std::string>();
    if (j.contains("refusal_substrings")) {
      cfg.refusal_substrings = j.at("refusal_substrings").get<std::vector<std::string>>();
    }
    if (j.contains("normalization")) {
      const json& n = j.at("normalization");
      if (!n.is_object()) throw ValidationError("judge.normalization must be an object");
      check_keys(n, {"casefold", "whitespace_collapse"}, "judge.normalization");
      if (n.contains("casefold")) cfg.normalization.casefold = n.at("casefold").get<bool>();
      if (n.contains("whitespace_collapse")) {
        cfg.normalization.collapse_whitespace = n.at("whitespace_collapse").get<bool>();
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad judge config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const JudgeConfig& cfg) {
  return json{{"refusal_template", cfg.refusal_template},
              {"refusal_substrings", cfg.refusal_substrings},
              {"normalization",
               {{"casefold", cfg.normalization.casefold},
                {"whitespace_collapse", cfg.normalization.collapse_whitespace}}}};
}

std::string normalize(std::string_view text, const Normalization& norm) {
  if (!norm.casefold && !norm.collapse_whitespace) return std::string(text);
  if (is_ascii(text)) return normalize_ascii(text, norm);
  std::u16string wide = to_utf16(text);
  if (norm.casefold) wide = fold_case(wide);
  return to_utf8_collapsing(wide, norm.collapse_whitespace);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kRefusal:
      return "refusal";
    case Verdict::kCorrect:
      return "correct";
    case Verdict::kIncorrect:
      return "incorrect";
  }
  return "incorrect";
}

Judge::Judge(JudgeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  markers_.push_back(normalize(cfg_.refusal_template, cfg_.normalization));
  for (const auto& s : cfg_.refusal_substrings) markers_.push_back(normalize(s, cfg_.normalization));
}

bool Judge::is_correct(std::string_view response, std::span<const std::string> answers) const {
  const std::string hay = normalized(response);
  for (const auto& answer : answers) {
    const std::string needle = normalized(answer);
    if (!needle.empty() && hay.find(needle) != std::string::npos) return true;
  }
  return false;
}

bool Judge::contains_refusal_marker(const std::string& normalized_response) const {
  return std::any_of(markers_.begin(), markers_.end(), [&](const std::string& m) {
    return !m.empty() && normalized_response.find(m) != std::string::npos;
  });
}

bool Judge::is_refusal(std::string_view response) const {
  return contains_refusal_marker(normalized(response));
}

Verdict Judge::verdict(std::string_view response, std::span<const std::string> answers) const {
  if (is_refusal(response)) return Verdict::kRefusal;
  return is_correct(response, answers) ? Verdict::kCorrect : Verdict::kIncorrect;
}

bool judge_correct(std::string_view response, std::span<const std::string> answers,
                   const JudgeConfig& cfg) {
  return Judge(cfg).is_correct(response, answers);
}

bool judge_refusal(std::string_view response, const JudgeConfig& cfg) {
  return Judge(cfg).is_refusal(response);
}

}  // namespace idk
