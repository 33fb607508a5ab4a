// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/labeler.hpp"

#include <algorithm>
#include <map>

#include "idk/errors.hpp"

namespace fs = std::filesystem;

namespace idk {
namespace {

constexpr double kThresholdSlack = 1e-9;

}  // namespace

std::string_view to_string(KnowledgeLabel label) {
  return label == KnowledgeLabel::kIk ? "IK" : "IDK";
}

KnowledgeLabel parse_knowledge_label(std::string_view s) {
  if (s == "IK") return KnowledgeLabel::kIk;
  if (s == "IDK") return KnowledgeLabel::kIdk;
  throw ValidationError("label must be IK or IDK, got '" + std::string(s) + "'");
}

json to_json(const ConfidenceRecord& r) {
  return json{{"question_id", r.question_id},
              {"num_samples", r.num_samples},
              {"num_correct", r.num_correct},
              {"confidence", r.confidence},
              {"correct_responses", r.correct_responses},
              {"incorrect_responses", r.incorrect_responses},
              {"refusal_count", r.refusal_count}};
}

ConfidenceRecord confidence_record_from_json(const json& row, const std::string& file,
                                             std::size_t line) {
  ConfidenceRecord r;
  r.question_id = field::string(row, "question_id", file, line);
  r.num_samples = static_cast<int>(field::integer(row, "num_samples", file, line));
  r.num_correct = static_cast<int>(field::integer(row, "num_correct", file, line));
  r.confidence = field::number(row, "confidence", file, line);
  r.correct_responses = field::strings(row, "correct_responses", file, line);
  r.incorrect_responses = field::strings(row, "incorrect_responses", file, line);
  r.refusal_count = static_cast<int>(field::integer(row, "refusal_count", file, line));
  const auto n_correct = static_cast<int>(r.correct_responses.size());
  const auto n_incorrect = static_cast<int>(r.incorrect_responses.size());
  if (r.num_samples < 1 || r.num_correct != n_correct ||
      n_correct + n_incorrect + r.refusal_count != r.num_samples) {
    throw ParseError(file, line, "inconsistent counts for " + r.question_id);
  }
  if (r.confidence != static_cast<double>(r.num_correct) / r.num_samples) {
    throw ParseError(file, line, "confidence does not equal num_correct/num_samples for " +
                                     r.question_id);
  }
  return r;
}

std::vector<SampleSet> group_samples(std::span<const SampledResponse> responses) {
  std::map<std::string, SampleSet> groups;
  for (const auto& r : responses) {
    auto& g = groups[r.question_id];
    g.question_id = r.question_id;
    g.samples.push_back(r);
  }
  std::vector<SampleSet> out;
  out.reserve(groups.size());
  for (auto& [id, g] : groups) {
    std::sort(g.samples.begin(), g.samples.end(),
              [](const SampledResponse& a, const SampledResponse& b) {
                return a.sample_index < b.sample_index;
              });
    out.push_back(std::move(g));
  }
  return out;
}

ConfidenceRecord compute_confidence(const SampleSet& set, std::span<const std::string> answers,
                                    const Judge& judge, std::optional<int> expected_k) {
  std::vector<const SampledResponse*> ordered;
  ordered.reserve(set.samples.size());
  for (const auto& s : set.samples) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const SampledResponse* a, const SampledResponse* b) {
              return a->sample_index < b->sample_index;
            });
  const int k = expected_k.value_or(static_cast<int>(ordered.size()));
  if (k < 1) throw ValidationError("question " + set.question_id + " has no samples");
  bool dense = static_cast<int>(ordered.size()) == k;
  for (std::size_t i = 0; dense && i < ordered.size(); ++i) {
    dense = ordered[i]->sample_index == static_cast<int>(i);
  }
  if (!dense) {
    throw ValidationError("question " + set.question_id + " is missing sample indices (have " +
                          std::to_string(ordered.size()) + " of " + std::to_string(k) + ")");
  }

  ConfidenceRecord rec;
  rec.question_id = set.question_id;
  rec.num_samples = k;
  for (const SampledResponse* s : ordered) {
    switch (judge.verdict(s->response, answers)) {
      case Verdict::kRefusal:
        ++rec.refusal_count;
        break;
      case Verdict::kCorrect:
        rec.correct_responses.push_back(s->response);
        break;
      case Verdict::kIncorrect:
        rec.incorrect_responses.push_back(s->response);
        break;
    }
  }
  rec.num_correct = static_cast<int>(rec.correct_responses.size());
  rec.confidence = static_cast<double>(rec.num_correct) / static_cast<double>(k);
  return rec;
}

std::vector<ConfidenceRecord> compute_confidences(std::span<const SampledResponse> responses,
                                                  std::span<const QaItem> corpus,
                                                  const Judge& judge,
                                                  std::optional<int> expected_k) {
  const auto index = index_corpus(corpus);
  std::vector<ConfidenceRecord> out;
  for (const auto& set : group_samples(responses)) {
    auto it = index.find(set.question_id);
    if (it == index.end()) {
      throw ValidationError("samples reference question " + set.question_id +
                            " which is not in the corpus");
    }
    out.push_back(compute_confidence(set, it->second->answers, judge, expected_k));
  }
  return out;
}

void validate_threshold(double ik_threshold) {
  if (!(ik_threshold > 0.0 && ik_threshold <= 1.1 + kThresholdSlack)) {
    throw ValidationError("Ik threshold must be in (0, 1.1], got " + std::to_string(ik_threshold));
  }
}

KnowledgeLabel label(double confidence, double ik_threshold) {
  validate_threshold(ik_threshold);
  return confidence >= ik_threshold - kThresholdSlack ? KnowledgeLabel::kIk : KnowledgeLabel::kIdk;
}

KnowledgeLabel label(const ConfidenceRecord& record, double ik_threshold) {
  return label(record.confidence, ik_threshold);
}

json to_json(const IdkExample& e) {
  return json{{"question_id", e.question_id},
              {"prompt", e.prompt},
              {"response", e.response},
              {"label", to_string(e.label)},
              {"ik_threshold", e.ik_threshold}};
}

IdkExample idk_example_from_json(const json& row, const std::string& file, std::size_t line) {
  IdkExample e;
  e.question_id = field::string(row, "question_id", file, line);
  e.prompt = field::string(row, "prompt", file, line);
  e.response = field::string(row, "response", file, line);
  try {
    e.label = parse_knowledge_label(field::string(row, "label", file, line));
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& err) {
    throw ParseError(file, line, err.what());
  }
  e.ik_threshold = field::number(row, "ik_threshold", file, line);
  return e;
}

std::vector<IdkExample> build_idk_dataset(std::span<const ConfidenceRecord> records,
                                          std::span<const QaItem> corpus, double ik_threshold,
                                          const JudgeConfig& cfg, const IdkBuildOptions& options) {
  validate_threshold(ik_threshold);
  const auto index = index_corpus(corpus);
  std::vector<IdkExample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    auto it = index.find(rec.question_id);
    if (it == index.end()) {
      throw ValidationError("confidence record for " + rec.question_id +
                            " has no matching corpus item");
    }
    IdkExample e;
    e.question_id = rec.question_id;
    e.prompt = render_prompt(*it->second, options.prompt);
    e.ik_threshold = ik_threshold;
    e.label = options.force_idk ? KnowledgeLabel::kIdk : label(rec, ik_threshold);
    if (e.label == KnowledgeLabel::kIk) {
      // confidence >= threshold > 0 implies at least one correct sample
      if (rec.correct_responses.empty()) {
        throw Error("question " + rec.question_id + " labeled IK without a correct response");
      }
      e.response = rec.correct_responses.front();
    } else {
      e.response = cfg.refusal_template;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfidenceRecord> load_confidence(const fs::path& path) {
  std::vector<ConfidenceRecord> out;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    out.push_back(confidence_record_from_json(row, file, line));
  });
  return out;
}

void write_confidence(const fs::path& path, std::span<const ConfidenceRecord> records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

std::vector<IdkExample> load_idk_dataset(const fs::path& path) {
  std::vector<IdkExample> out;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    out.push_back(idk_example_from_json(row, file, line));
  });
  return out;
}

void write_idk_dataset(const fs::path& path, std::span<const IdkExample> examples) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  for (const auto& e : examples) rows.push_back(to_json(e));
  write_jsonl(path, rows);
}

}  // namespace idk
