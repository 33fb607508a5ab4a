// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/hir_builder.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "idk/errors.hpp"

namespace idk {
namespace {

constexpr double kGridSlack = 1e-9;

long tenths(double threshold) { return std::lround(threshold * 10.0); }

double parse_number(std::string_view token) {
  const std::string s(token);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ValidationError("bad number '" + s + "' in threshold list");
  }
  return v;
}

double checked(double threshold) {
  if (!on_threshold_grid(threshold)) {
    throw ValidationError("Ik threshold " + std::to_string(threshold) +
                          " is not on the grid {0.1, 0.2, ..., 1.1}");
  }
  return static_cast<double>(tenths(threshold)) / 10.0;
}

}  // namespace

bool on_threshold_grid(double threshold) {
  if (!std::isfinite(threshold)) return false;
  const long t = tenths(threshold);
  return t >= 1 && t <= 11 && std::abs(threshold * 10.0 - static_cast<double>(t)) < kGridSlack * 10;
}

double threshold_to_confidence(double ik_threshold) {
  return static_cast<double>(11 - tenths(checked(ik_threshold))) / 10.0;
}

std::vector<double> full_threshold_grid() {
  std::vector<double> grid;
  for (int t = 1; t <= 11; ++t) grid.push_back(t / 10.0);
  return grid;
}

std::vector<double> parse_threshold_grid(std::string_view spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string_view::npos) {
    const auto a = spec.find(':');
    const auto b = spec.find(':', a + 1);
    if (b == std::string_view::npos) throw ValidationError("range must be start:stop:step");
    const long start = tenths(checked(parse_number(spec.substr(0, a))));
    const long stop = tenths(checked(parse_number(spec.substr(a + 1, b - a - 1))));
    const double step_value = parse_number(spec.substr(b + 1));
    const long step = std::lround(step_value * 10.0);
    if (step < 1 || std::abs(step_value * 10.0 - static_cast<double>(step)) > 1e-8) {
      throw ValidationError("range step must be a positive multiple of 0.1");
    }
    if (stop < start) throw ValidationError("range stop is below start");
    for (long t = start; t <= stop; t += step) out.push_back(static_cast<double>(t) / 10.0);
    return out;
  }
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto token = spec.substr(pos, comma == std::string_view::npos ? spec.npos : comma - pos);
    out.push_back(checked(parse_number(token)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

json to_json(const HirExample& e) {
  json row = to_json(e.example);
  row["confidence_level"] = e.confidence_level;
  return row;
}

std::vector<HirExample> build_hir_dataset(std::span<const ConfidenceRecord> records,
                                          std::span<const QaItem> corpus,
                                          std::span<const double> thresholds,
                                          const JudgeConfig& cfg) {
  std::vector<HirExample> out;
  out.reserve(records.size() * thresholds.size());
  for (double threshold : thresholds) {
    const double t = checked(threshold);
    const double level = threshold_to_confidence(t);
    IdkBuildOptions options;
    options.prompt = PromptTemplate::hir(level);
    for (auto& example : build_idk_dataset(records, corpus, t, cfg, options)) {
      out.push_back({std::move(example), level});
    }
  }
  return out;
}

void write_hir_dataset(const std::filesystem::path& path, std::span<const HirExample> rows) {
  std::vector<json> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_json(r));
  write_jsonl(path, out);
}

}  // namespace idk
