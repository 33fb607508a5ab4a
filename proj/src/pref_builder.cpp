// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/pref_builder.hpp"

#include <algorithm>
#include <map>

#include "idk/errors.hpp"
#include "idk/rng.hpp"

namespace fs = std::filesystem;

namespace idk {

DatasetHalves split_halves(std::span<const IdkExample> dataset, std::uint64_t seed) {
  if (dataset.empty()) throw ValidationError("cannot split an empty Idk dataset");
  const std::size_t n_warmup = (dataset.size() + 1) / 2;
  const auto order = rng::permutation(dataset.size(), seed);
  std::vector<bool> warm(dataset.size(), false);
  for (std::size_t i = 0; i < n_warmup; ++i) warm[order[i]] = true;
  DatasetHalves halves;
  halves.warmup.reserve(n_warmup);
  halves.preference.reserve(dataset.size() - n_warmup);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (warm[i] ? halves.warmup : halves.preference).push_back(dataset[i]);
  }
  return halves;
}

json to_json(const PreferencePair& p) {
  return json{{"question_id", p.question_id},
              {"prompt", p.prompt},
              {"chosen", p.chosen},
              {"rejected", p.rejected},
              {"source_label", to_string(p.source_label)}};
}

json to_json(const PairSkip& s) {
  return json{{"question_id", s.question_id},
              {"source_label", to_string(s.source_label)},
              {"reason", s.reason}};
}

PairBuildResult build_pairs(std::span<const IdkExample> preference_half,
                            std::span<const SampledResponse> sft_samples,
                            std::span<const QaItem> corpus, const Judge& judge) {
  const auto index = index_corpus(corpus);
  std::map<std::string, std::vector<const SampledResponse*>> by_question;
  for (const auto& s : sft_samples) by_question[s.question_id].push_back(&s);
  for (auto& [id, v] : by_question) {
    std::sort(v.begin(), v.end(), [](const SampledResponse* a, const SampledResponse* b) {
      return a->sample_index < b->sample_index;
    });
  }

  const std::string& refusal = judge.config().refusal_template;
  PairBuildResult result;
  for (const auto& ex : preference_half) {
    auto item = index.find(ex.question_id);
    if (item == index.end()) {
      throw ValidationError("preference question " + ex.question_id + " is not in the corpus");
    }
    const auto& answers = item->second->answers;
    auto samples = by_question.find(ex.question_id);
    if (samples == by_question.end() || samples->second.empty()) {
      result.skips.push_back({ex.question_id, ex.label, "no_samples"});
      continue;
    }
    const SampledResponse* pick = nullptr;
    const Verdict wanted = ex.label == KnowledgeLabel::kIk ? Verdict::kCorrect : Verdict::kIncorrect;
    for (const SampledResponse* s : samples->second) {
      if (judge.verdict(s->response, answers) == wanted) {
        pick = s;
        break;
      }
    }
    if (!pick) {
      result.skips.push_back({ex.question_id, ex.label,
                              ex.label == KnowledgeLabel::kIk ? "no_correct_sample"
                                                              : "no_incorrect_sample"});
      continue;
    }
    PreferencePair pair;
    pair.question_id = ex.question_id;
    pair.prompt = ex.prompt;
    pair.source_label = ex.label;
    if (ex.label == KnowledgeLabel::kIk) {
      pair.chosen = pick->response;
      pair.rejected = refusal;
    } else {
      pair.chosen = refusal;
      pair.rejected = pick->response;
    }
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

std::string check_pair(const PreferencePair& pair, std::span<const std::string> answers,
                       const Judge& judge) {
  const std::string& refusal = judge.config().refusal_template;
  if (pair.chosen == pair.rejected) return "chosen equals rejected";
  if (pair.source_label == KnowledgeLabel::kIk) {
    if (judge.verdict(pair.chosen, answers) != Verdict::kCorrect) return "IK chosen is not correct";
    if (pair.rejected != refusal) return "IK rejected is not the refusal template";
  } else {
    if (pair.chosen != refusal) return "IDK chosen is not the refusal template";
    if (judge.verdict(pair.rejected, answers) != Verdict::kIncorrect) {
      return "IDK rejected is not an incorrect answer";
    }
  }
  return "";
}

PairSplit hold_out_validation(std::span<const PreferencePair> pairs, double fraction,
                              std::uint64_t seed) {
  const std::size_t n_val = dev_size(pairs.size(), fraction);
  const auto order = rng::permutation(pairs.size(), rng::combine(seed, 0x76616cULL));
  std::vector<bool> val(pairs.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) val[order[i]] = true;
  PairSplit split;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (val[i] ? split.validation : split.train).push_back(pairs[i]);
  }
  return split;
}

void write_pairs(const fs::path& path, std::span<const PreferencePair> pairs) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(to_json(p));
  write_jsonl(path, rows);
}

void write_skips(const fs::path& path, std::span<const PairSkip> skips) {
  std::vector<json> rows;
  rows.reserve(skips.size());
  for (const auto& s : skips) rows.push_back(to_json(s));
  write_jsonl(path, rows);
}

std::vector<PreferencePair> load_pairs(const fs::path& path) {
  std::vector<PreferencePair> out;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    PreferencePair p;
    p.question_id = field::string(row, "question_id", file, line);
    p.prompt = field::string(row, "prompt", file, line);
    p.chosen = field::string(row, "chosen", file, line);
    p.rejected = field::string(row, "rejected", file, line);
    p.source_label = parse_knowledge_label(field::string(row, "source_label", file, line));
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace idk
