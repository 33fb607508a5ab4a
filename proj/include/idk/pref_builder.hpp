// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "idk/corpus.hpp"
#include "idk/inference.hpp"
#include "idk/judge.hpp"
#include "idk/labeler.hpp"

namespace idk {

struct DatasetHalves {
  std::vector<IdkExample> warmup;      // trains the warm-up SFT model
  std::vector<IdkExample> preference;  // questions the SFT model is sampled on
};

/// Seeded 50/50 partition; the warm-up half takes ceil(n/2). Each half keeps
/// the input order. Throws on an empty dataset.
DatasetHalves split_halves(std::span<const IdkExample> dataset, std::uint64_t seed);

struct PreferencePair {
  std::string question_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  KnowledgeLabel source_label = KnowledgeLabel::kIk;

  bool operator==(const PreferencePair&) const = default;
};

json to_json(const PreferencePair& p);

struct PairSkip {
  std::string question_id;
  KnowledgeLabel source_label = KnowledgeLabel::kIk;
  std::string reason;  // no_samples | no_correct_sample | no_incorrect_sample
};

json to_json(const PairSkip& s);

struct PairBuildResult {
  std::vector<PreferencePair> pairs;
  std::vector<PairSkip> skips;
};

/// One pair per preference-half question, from the warm-up model's samples:
///   IK  -> chosen = first correct sample, rejected = refusal template
///   IDK -> chosen = refusal template, rejected = first incorrect non-refusal sample
/// Questions without the needed kind of sample are skipped and reported.
PairBuildResult build_pairs(std::span<const IdkExample> preference_half,
                            std::span<const SampledResponse> sft_samples,
                            std::span<const QaItem> corpus, const Judge& judge);

/// Checks one pair against the invariants; returns the violated rule or "".
std::string check_pair(const PreferencePair& pair, std::span<const std::string> answers,
                       const Judge& judge);

struct PairSplit {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> validation;
};

/// Holds out ceil(fraction * n) pairs, chosen by seeded shuffle.
PairSplit hold_out_validation(std::span<const PreferencePair> pairs, double fraction,
                              std::uint64_t seed);

void write_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs);
void write_skips(const std::filesystem::path& path, std::span<const PairSkip> skips);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);

}  // namespace idk
