// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idk/bon.hpp"
#include "idk/inference.hpp"
#include "idk/jsonl.hpp"

namespace idk {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Stage names in execution order.
inline constexpr std::string_view kStageOrder[] = {"split",       "sample",    "label",
                                                   "build_sft",   "build_prefs", "build_hir",
                                                   "eval",        "bon",       "report"};

/// {"type": "simulated", ...SimulatedModelSpec} or
/// {"type": "remote", "endpoint", "model", "timeout_s"}; the remote key comes
/// from IDK_API_KEY.
std::unique_ptr<ResponseBackend> make_backend(const json& spec, const JudgeConfig& judge);

/// {"type": "simulated", "mode": "correctness" | "truthful"} or
/// {"type": "remote", "endpoint", "timeout_s"}.
std::unique_ptr<RewardSource> make_reward(const json& spec, const JudgeConfig& judge,
                                          GoldLabels gold);

/// Reads "concurrency", "retries" and "backoff_ms" from a stage section.
RetryPolicy retry_policy_from(const json& section);

/// Applies "a.b.c=value" overrides. Values parse as JSON, falling back to a
/// plain string.
json apply_overrides(json config, std::span<const std::string> overrides);

/// Checks the whole config before any work: unknown keys (all listed in one
/// error), stage names, and that every stage's inputs will exist.
void validate_pipeline_config(const json& config, const std::filesystem::path& run_dir);

std::string sha256_hex(std::string_view data);

struct StageRecord {
  std::string name;
  std::string status;  // completed | failed | skipped
  std::vector<std::string> outputs;
  std::string error;
  std::string started_at;
  std::string finished_at;
};

struct PipelineOptions {
  bool force = false;  // re-run stages the manifest already marks completed
  // Relative paths inside the config resolve against this directory.
  std::filesystem::path base_dir = ".";
};

struct PipelineResult {
  std::filesystem::path run_dir;
  std::vector<StageRecord> stages;
  bool ok() const;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

/// Runs the configured stages in order, writing each stage's files and
/// manifest.json. A failing stage is recorded with its error and every later
/// stage is marked skipped. Throws ValidationError for config problems before
/// anything is written.
PipelineResult run_pipeline(const json& config, const std::filesystem::path& run_dir,
                            const PipelineOptions& options = {});

}  // namespace idk
