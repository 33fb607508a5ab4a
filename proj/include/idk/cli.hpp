// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "idk/jsonl.hpp"

namespace idk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitStageFailure = 2;

/// Evaluates one loss-check row {"fn", ...args, "expected"?}. Returns the row
/// extended with "value" and, when "expected" is present, "abs_error" and "ok".
json evaluate_loss_row(const json& row, double rtol = 1e-9, double atol = 1e-12);

/// Entry point for the `idk` binary. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace idk
