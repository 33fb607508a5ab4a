// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "idk/corpus.hpp"
#include "idk/judge.hpp"
#include "idk/labeler.hpp"

namespace idk {

enum class Quadrant { kIkIk, kIkIdk, kIdkIk, kIdkIdk };

std::string_view to_string(Quadrant q);
Quadrant parse_quadrant(std::string_view s);

/// refused & gold IDK -> IK_IDK, refused & gold IK -> IDK_IK,
/// answered & correct -> IK_IK, answered & wrong -> IDK_IDK.
Quadrant quadrant_of(bool refused, bool correct, KnowledgeLabel gold);

struct QuadrantOutcome {
  std::string question_id;
  Quadrant quadrant = Quadrant::kIdkIdk;
  bool refused = false;
  bool correct = false;
  KnowledgeLabel gold_label = KnowledgeLabel::kIdk;
};

json to_json(const QuadrantOutcome& o);
std::vector<QuadrantOutcome> load_quadrants(const std::filesystem::path& path);
void write_quadrants(const std::filesystem::path& path, std::span<const QuadrantOutcome> outcomes);

struct ModelResponse {
  std::string question_id;
  std::string response;
};

/// responses.jsonl: {"question_id", "response"}; extra fields are ignored.
std::vector<ModelResponse> load_responses(const std::filesystem::path& path);
void write_responses(const std::filesystem::path& path, std::span<const ModelResponse> responses);

using GoldLabels = std::unordered_map<std::string, KnowledgeLabel>;

GoldLabels gold_labels_from(std::span<const IdkExample> examples);
/// Reads the "question_id" and "label" columns of an idk_sft.jsonl file.
GoldLabels load_gold_labels(const std::filesystem::path& path);

/// One outcome per response, in response order. `correct` is only true for
/// answered responses (refusal is checked first).
std::vector<QuadrantOutcome> classify(std::span<const ModelResponse> responses,
                                      const GoldLabels& gold, std::span<const QaItem> corpus,
                                      const Judge& judge);

std::vector<QuadrantOutcome> classify(const std::filesystem::path& responses_file,
                                      const std::filesystem::path& gold_file,
                                      std::span<const QaItem> corpus, const Judge& judge);

struct MetricsReport {
  std::size_t n = 0;
  std::array<std::size_t, 4> counts{};  // indexed by Quadrant
  double ik_ik_rate = 0;                // percentages of n
  double ik_idk_rate = 0;
  double idk_ik_rate = 0;
  double idk_idk_rate = 0;
  double truthful_rate = 0;  // ik_ik_rate + ik_idk_rate
  double refusal_f1 = 0;     // positive class: gold IDK, predicted by refusing
  double answer_f1 = 0;      // positive class: gold IK, predicted by answering
};

json to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const json& j);

/// F1 = 2TP / (2TP + FP + FN); an empty positive class that is also never
/// predicted scores 1.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

MetricsReport metrics(std::span<const QuadrantOutcome> outcomes);

struct LabelShare {
  double ik_threshold = 0;
  std::size_t n = 0;
  std::size_t ik = 0;
  std::size_t idk = 0;
  double ik_pct = 0;
  double idk_pct = 0;
};

std::vector<LabelShare> label_distribution(std::span<const ConfidenceRecord> records,
                                           std::span<const double> thresholds);

struct ReportEntry {
  std::string name;
  std::optional<double> ik_threshold;
  MetricsReport metrics;
};

struct ReportSpec {
  std::filesystem::path out_dir;
  bool chart = false;
};

/// metrics.csv with one row per entry (thresholded entries ordered by
/// threshold), sweep.csv when any entry carries a threshold, and
/// quadrants.svg when chart is set. Returns the files written.
std::vector<std::filesystem::path> report(std::span<const ReportEntry> entries,
                                          const ReportSpec& spec);

void write_label_distribution(const std::filesystem::path& path,
                              std::span<const LabelShare> rows);

/// Reference responder: a gold alias for gold-IK questions and the refusal
/// template for gold-IDK ones.
std::vector<ModelResponse> perfect_responses(std::span<const IdkExample> gold,
                                             std::span<const QaItem> corpus,
                                             const JudgeConfig& cfg);

}  // namespace idk
