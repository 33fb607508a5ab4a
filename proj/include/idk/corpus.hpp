// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "idk/jsonl.hpp"

namespace idk {

/// One question with every gold answer string accepted for it.
struct QaItem {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
  std::string source;

  bool operator==(const QaItem&) const = default;
};

enum class CorpusFormat { kTriviaQa, kNaturalQuestions, kGeneric };

/// "triviaqa-jsonl", "nq-jsonl" or "generic-jsonl".
CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

json to_json(const QaItem& item);

/// Loads a corpus file. Native TriviaQA rows use question_id/question and
/// answer.value + answer.aliases; NQ-Open rows use question/answer with an
/// optional id (defaults to "nq-open-<line>"). Every format is checked against
/// the QaItem invariants and duplicate ids are rejected.
std::vector<QaItem> load_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Writes the generic schema (questions.jsonl).
void save_corpus(const std::filesystem::path& path, std::span<const QaItem> items);

/// Index by id; throws on duplicates.
std::unordered_map<std::string, const QaItem*> index_corpus(std::span<const QaItem> items);

struct SplitSpec {
  double dev_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  std::vector<QaItem> train;
  std::vector<QaItem> dev;
};

/// Number of dev items for a corpus of size n: ceil(fraction * n).
std::size_t dev_size(std::size_t n, double dev_fraction);

/// Seeded shuffle, then the first dev_size() positions go to dev. Both halves
/// keep the input order of their members.
CorpusSplit split_corpus(std::span<const QaItem> items, const SplitSpec& spec);

class PromptTemplate {
 public:
  enum class Kind { kPlain, kIdkPrompt, kHir };

  static PromptTemplate plain() { return PromptTemplate(Kind::kPlain, 0.0); }
  static PromptTemplate idk_prompt() { return PromptTemplate(Kind::kIdkPrompt, 0.0); }
  // level must lie in [0, 1]
  static PromptTemplate hir(double confidence_level);

  /// "plain", "idk-prompt" or "hir:<level>".
  static PromptTemplate parse(std::string_view spec);

  Kind kind() const noexcept { return kind_; }
  double level() const noexcept { return level_; }
  std::string name() const;

 private:
  PromptTemplate(Kind kind, double level) : kind_(kind), level_(level) {}

  Kind kind_;
  double level_;
};

inline constexpr std::string_view kIdkPromptPrefix =
    "Answer the following question, and if you don't know the answer, only reply with \"I "
    "don't know\": ";

std::string format_confidence_level(double level);
std::string render_prompt(const QaItem& item, const PromptTemplate& tmpl);
std::string render_prompt(std::string_view question, const PromptTemplate& tmpl);

}  // namespace idk
