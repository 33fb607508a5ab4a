// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "idk/errors.hpp"
#include "idk/rng.hpp"

namespace fs = std::filesystem;

namespace idk {
namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

void check_item(const QaItem& item, const std::string& file, std::size_t line) {
  if (item.id.empty()) throw ParseError(file, line, "empty id");
  if (item.answers.empty()) throw ParseError(file, line, "question " + item.id + " has no answers");
  for (const auto& a : item.answers) {
    if (blank(a)) throw ParseError(file, line, "question " + item.id + " has a blank answer");
  }
}

void push_unique(std::vector<std::string>& out, std::string value) {
  if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(std::move(value));
}

QaItem parse_generic(const json& row, const std::string& file, std::size_t line) {
  QaItem item;
  item.id = field::string(row, "id", file, line);
  item.question = field::string(row, "question", file, line);
  item.answers = field::strings(row, "answers", file, line);
  item.source = row.contains("source") ? field::string(row, "source", file, line) : "";
  return item;
}

QaItem parse_triviaqa(const json& row, const std::string& file, std::size_t line) {
  QaItem item;
  item.id = field::string(row, "question_id", file, line);
  item.question = field::string(row, "question", file, line);
  const json& answer = field::require(row, "answer", file, line);
  if (!answer.is_object()) throw ParseError(file, line, "field \"answer\" must be an object");
  if (answer.contains("value")) push_unique(item.answers, field::string(answer, "value", file, line));
  if (answer.contains("aliases")) {
    for (auto& alias : field::strings(answer, "aliases", file, line)) {
      push_unique(item.answers, std::move(alias));
    }
  }
  item.source = "triviaqa";
  return item;
}

QaItem parse_nq(const json& row, const std::string& file, std::size_t line) {
  QaItem item;
  item.id = row.contains("id") ? field::string(row, "id", file, line)
                               : "nq-open-" + std::to_string(line);
  item.question = field::string(row, "question", file, line);
  const json& answer = field::require(row, "answer", file, line);
  if (answer.is_string()) {
    item.answers.push_back(answer.get<std::string>());
  } else {
    for (auto& a : field::strings(row, "answer", file, line)) push_unique(item.answers, std::move(a));
  }
  item.source = "nq-open";
  return item;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "triviaqa-jsonl") return CorpusFormat::kTriviaQa;
  if (name == "nq-jsonl") return CorpusFormat::kNaturalQuestions;
  if (name == "generic-jsonl") return CorpusFormat::kGeneric;
  throw ValidationError("unknown corpus format '" + std::string(name) +
                        "' (expected triviaqa-jsonl, nq-jsonl or generic-jsonl)");
}

std::string_view to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kTriviaQa:
      return "triviaqa-jsonl";
    case CorpusFormat::kNaturalQuestions:
      return "nq-jsonl";
    case CorpusFormat::kGeneric:
      return "generic-jsonl";
  }
  return "generic-jsonl";
}

json to_json(const QaItem& item) {
  return json{{"id", item.id}, {"question", item.question}, {"answers", item.answers},
              {"source", item.source}};
}

std::vector<QaItem> load_corpus(const fs::path& path, CorpusFormat format) {
  std::vector<QaItem> items;
  std::unordered_set<std::string> seen;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    QaItem item;
    switch (format) {
      case CorpusFormat::kTriviaQa:
        item = parse_triviaqa(row, file, line);
        break;
      case CorpusFormat::kNaturalQuestions:
        item = parse_nq(row, file, line);
        break;
      case CorpusFormat::kGeneric:
        item = parse_generic(row, file, line);
        break;
    }
    check_item(item, file, line);
    if (!seen.insert(item.id).second) throw ParseError(file, line, "duplicate id " + item.id);
    items.push_back(std::move(item));
  });
  return items;
}

void save_corpus(const fs::path& path, std::span<const QaItem> items) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.push_back(to_json(item));
  write_jsonl(path, rows);
}

std::unordered_map<std::string, const QaItem*> index_corpus(std::span<const QaItem> items) {
  std::unordered_map<std::string, const QaItem*> index;
  index.reserve(items.size());
  for (const auto& item : items) {
    if (!index.emplace(item.id, &item).second) throw ValidationError("duplicate id " + item.id);
  }
  return index;
}

std::size_t dev_size(std::size_t n, double dev_fraction) {
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
    throw ValidationError("dev_fraction must be in [0, 1), got " + std::to_string(dev_fraction));
  }
  // Tolerance absorbs products like 0.3 * 10 = 3.0000000000000004.
  const double raw = dev_fraction * static_cast<double>(n);
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(count, n);
}

CorpusSplit split_corpus(std::span<const QaItem> items, const SplitSpec& spec) {
  const std::size_t n_dev = dev_size(items.size(), spec.dev_fraction);
  const auto order = rng::permutation(items.size(), spec.seed);
  std::vector<bool> in_dev(items.size(), false);
  for (std::size_t i = 0; i < n_dev; ++i) in_dev[order[i]] = true;

  CorpusSplit split;
  split.dev.reserve(n_dev);
  split.train.reserve(items.size() - n_dev);
  for (std::size_t i = 0; i < items.size(); ++i) {
    (in_dev[i] ? split.dev : split.train).push_back(items[i]);
  }
  return split;
}

PromptTemplate PromptTemplate::hir(double confidence_level) {
  if (!(confidence_level >= 0.0 && confidence_level <= 1.0)) {
    throw ValidationError("confidence level must be in [0, 1], got " +
                          std::to_string(confidence_level));
  }
  return PromptTemplate(Kind::kHir, confidence_level);
}

PromptTemplate PromptTemplate::parse(std::string_view spec) {
  if (spec == "plain") return plain();
  if (spec == "idk-prompt") return idk_prompt();
  if (spec.starts_with("hir:")) {
    const std::string level(spec.substr(4));
    char* end = nullptr;
    const double value = std::strtod(level.c_str(), &end);
    if (level.empty() || end != level.c_str() + level.size()) {
      throw ValidationError("bad hir level in template '" + std::string(spec) + "'");
    }
    return hir(value);
  }
  throw ValidationError("unknown prompt template '" + std::string(spec) +
                        "' (expected plain, idk-prompt or hir:<level>)");
}

std::string PromptTemplate::name() const {
  switch (kind_) {
    case Kind::kPlain:
      return "plain";
    case Kind::kIdkPrompt:
      return "idk-prompt";
    case Kind::kHir:
      return "hir:" + format_confidence_level(level_);
  }
  return "plain";
}

std::string format_confidence_level(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", level);
  // -0.0 can appear from 1.1 - 1.1 style arithmetic
  if (std::string_view(buf) == "-0.0") return "0.0";
  return buf;
}

std::string render_prompt(std::string_view question, const PromptTemplate& tmpl) {
  switch (tmpl.kind()) {
    case PromptTemplate::Kind::kPlain:
      return std::string(question);
    case PromptTemplate::Kind::kIdkPrompt:
      return std::string(kIdkPromptPrefix) + std::string(question);
    case PromptTemplate::Kind::kHir:
      return "Your current knowledge expression confidence level is " +
             format_confidence_level(tmpl.level()) + ", please answer the user's question: " +
             std::string(question);
  }
  return std::string(question);
}

std::string render_prompt(const QaItem& item, const PromptTemplate& tmpl) {
  return render_prompt(item.question, tmpl);
}

}  // namespace idk
