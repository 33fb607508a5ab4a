// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idk/corpus.hpp"
#include "idk/evaluator.hpp"
#include "idk/inference.hpp"
#include "idk/judge.hpp"

namespace idk {

struct Candidate {
  std::string response;
  double score = 0.0;
};

struct Selection {
  std::size_t index = 0;
  double score = 0.0;
  std::string response;
};

/// Highest score wins, lowest index on ties. NaN scores never win over a
/// number. Throws on an empty list.
Selection select(std::span<const Candidate> candidates);

// Scores one (prompt, response) pair. Implementations must be thread-safe.
class RewardSource {
 public:
  virtual ~RewardSource() = default;
  virtual double score(const QaItem& item, const std::string& prompt,
                       const std::string& response) = 0;
};

/// Scorer keyed to judge outcomes.
///   kCorrectness: 1 for a correct, non-refusing answer, else 0.
///   kTruthful:    additionally 1 for a refusal on a gold-IDK question.
class SimulatedScorer final : public RewardSource {
 public:
  enum class Mode { kCorrectness, kTruthful };

  SimulatedScorer(Mode mode, JudgeConfig cfg = {}, GoldLabels gold = {});

  double score(const QaItem& item, const std::string& prompt,
               const std::string& response) override;

 private:
  Mode mode_;
  Judge judge_;
  GoldLabels gold_;
};

SimulatedScorer::Mode parse_scorer_mode(std::string_view s);

/// POST {"prompt", "response"} -> {"score": number}.
class RemoteScorer final : public RewardSource {
 public:
  RemoteScorer(std::string url, std::string api_key,
               std::chrono::seconds timeout = std::chrono::seconds(60));

  double score(const QaItem& item, const std::string& prompt,
               const std::string& response) override;

 private:
  std::string url_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

struct BonOptions {
  int n = 10;
  std::uint64_t seed = 0;
  int max_new_tokens = 512;
  PromptTemplate prompt = PromptTemplate::plain();
  RetryPolicy retry;
};

struct BonRecord {
  std::string question_id;
  std::string response;
  std::size_t selected_index = 0;
  double score = 0.0;
};

struct BonFailure {
  std::string question_id;
  std::string error;
};

struct BonRun {
  std::vector<BonRecord> records;  // canonical question_id order
  std::vector<BonFailure> failures;
};

/// Samples n candidates per item at temperature 1.0 / top_p 0.9, scores
/// them and keeps the argmax. Sampling or scoring failures drop the item
/// into `failures`.
BonRun bon_run(std::span<const QaItem> items, const BonOptions& options,
               ResponseBackend& backend, RewardSource& reward);

/// responses.jsonl rows (question_id, response) of the selected candidates.
std::vector<ModelResponse> to_responses(std::span<const BonRecord> records);

/// One response per question: the sample with index 0.
std::vector<ModelResponse> first_sample_responses(std::span<const SampledResponse> samples);

void write_bon_scores(const std::filesystem::path& path, std::span<const BonRecord> records);
void write_bon_failures(const std::filesystem::path& path, std::span<const BonFailure> failures);

}  // namespace idk
