// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "idk/corpus.hpp"
#include "idk/judge.hpp"
#include "idk/labeler.hpp"

namespace idk {

/// Thresholds are restricted to the tenths grid 0.1, 0.2, ..., 1.1.
bool on_threshold_grid(double threshold);

/// 1.1 - threshold, rounded to one decimal (1.0 -> 0.1, 1.1 -> 0.0).
double threshold_to_confidence(double ik_threshold);

/// The full grid 0.1..1.1 (11 values), built from integer tenths.
std::vector<double> full_threshold_grid();

/// "start:stop:step" (inclusive) or a comma list such as "0.5,1.0".
/// Every value is snapped to the tenths grid and validated.
std::vector<double> parse_threshold_grid(std::string_view spec);

struct HirExample {
  IdkExample example;  // prompt carries the confidence-level instruction
  double confidence_level = 0.0;
};

json to_json(const HirExample& e);

/// For each threshold in order: label every record at it, render the prompt
/// with level 1.1 - threshold and take targets as build_idk_dataset does.
/// Output is |thresholds| * |records| rows.
std::vector<HirExample> build_hir_dataset(std::span<const ConfidenceRecord> records,
                                          std::span<const QaItem> corpus,
                                          std::span<const double> thresholds,
                                          const JudgeConfig& cfg);

void write_hir_dataset(const std::filesystem::path& path, std::span<const HirExample> rows);

}  // namespace idk
