// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idk/corpus.hpp"
#include "idk/inference.hpp"
#include "idk/judge.hpp"

namespace idk {

enum class KnowledgeLabel { kIk, kIdk };

std::string_view to_string(KnowledgeLabel label);
KnowledgeLabel parse_knowledge_label(std::string_view s);

// Judged sample statistics for one question. `confidence` is exactly
// num_correct / num_samples; refusals are part of num_samples but never
// correct, and are kept out of both response lists.
struct ConfidenceRecord {
  std::string question_id;
  int num_samples = 0;
  int num_correct = 0;
  double confidence = 0.0;
  std::vector<std::string> correct_responses;    // by sample_index
  std::vector<std::string> incorrect_responses;  // by sample_index
  int refusal_count = 0;

  bool operator==(const ConfidenceRecord&) const = default;
};

json to_json(const ConfidenceRecord& r);
ConfidenceRecord confidence_record_from_json(const json& row, const std::string& file = "<json>",
                                             std::size_t line = 0);

struct SampleSet {
  std::string question_id;
  std::vector<SampledResponse> samples;
};

/// Groups responses by question (canonical question order). Every pair must
/// be unique.
std::vector<SampleSet> group_samples(std::span<const SampledResponse> responses);

/// Judges every sample. Indices must be exactly 0..k-1 (k = expected_k when
/// given), otherwise ValidationError names the question.
ConfidenceRecord compute_confidence(const SampleSet& samples, std::span<const std::string> answers,
                                    const Judge& judge, std::optional<int> expected_k = {});

/// compute_confidence over a whole run, looking answers up in the corpus.
std::vector<ConfidenceRecord> compute_confidences(std::span<const SampledResponse> responses,
                                                  std::span<const QaItem> corpus,
                                                  const Judge& judge,
                                                  std::optional<int> expected_k = {});

/// Threshold must be in (0, 1.1].
void validate_threshold(double ik_threshold);

/// IK iff confidence >= threshold (within 1e-9); 1.1 forces IDK.
KnowledgeLabel label(double confidence, double ik_threshold);
KnowledgeLabel label(const ConfidenceRecord& record, double ik_threshold);

struct IdkExample {
  std::string question_id;
  std::string prompt;
  std::string response;
  KnowledgeLabel label = KnowledgeLabel::kIdk;
  double ik_threshold = 1.0;

  bool operator==(const IdkExample&) const = default;
};

json to_json(const IdkExample& e);
IdkExample idk_example_from_json(const json& row, const std::string& file = "<json>",
                                 std::size_t line = 0);

struct IdkBuildOptions {
  PromptTemplate prompt = PromptTemplate::plain();
  // Label every question IDK (corpora whose questions are unknowable by construction).
  bool force_idk = false;
};

/// IK rows take the lowest-index correct sample; IDK rows take the refusal
/// template. Output follows the record order.
std::vector<IdkExample> build_idk_dataset(std::span<const ConfidenceRecord> records,
                                          std::span<const QaItem> corpus, double ik_threshold,
                                          const JudgeConfig& cfg, const IdkBuildOptions& options = {});

std::vector<ConfidenceRecord> load_confidence(const std::filesystem::path& path);
void write_confidence(const std::filesystem::path& path, std::span<const ConfidenceRecord> records);

std::vector<IdkExample> load_idk_dataset(const std::filesystem::path& path);
void write_idk_dataset(const std::filesystem::path& path, std::span<const IdkExample> examples);

}  // namespace idk
