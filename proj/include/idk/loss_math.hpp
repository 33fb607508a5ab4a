// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

// Scalar, single-sample forms of the training objectives, for checking
// external trainer code. Batch expectations are a mean over these
// (see mean_reduce).
namespace idk::loss {

/// -log(sigmoid(x)), stable for large |x|.
double neg_log_sigmoid(double x);
double sigmoid(double x);

/// -(1/N) * sum of token log-probs. Entries must be <= 0 and N >= 1.
double sft_loss(std::span<const double> token_logprobs);

struct DpoInputs {
  double policy_chosen_logprob = 0.0;
  double policy_rejected_logprob = 0.0;
  double ref_chosen_logprob = 0.0;
  double ref_rejected_logprob = 0.0;
  double beta = 0.1;
};

/// beta * [(pc - rc) - (pr - rr)]
double dpo_margin(const DpoInputs& in);

/// -log sigmoid(margin)
double dpo_loss(const DpoInputs& in);

/// d dpo_loss / d policy_chosen_logprob = -beta * sigmoid(-margin)
double dpo_loss_grad_policy_chosen(const DpoInputs& in);

/// dpo_loss + alpha * sft_loss(chosen tokens). alpha >= 0.
inline constexpr double kDefaultSftAlpha = 0.01;
double dpo_sft_loss(const DpoInputs& in, std::span<const double> chosen_token_logprobs,
                    double alpha = kDefaultSftAlpha);

/// Pairwise reward-model loss -log sigmoid(r_chosen - r_rejected).
double rm_pairwise_loss(double reward_chosen, double reward_rejected);

enum class PpoConvention {
  // -max(r*A, clip(r)*A). Default.
  kAsPrinted,
  // -min(r*A, clip(r)*A), the usual clipped surrogate.
  kStandard,
};

struct PpoActorTerms {
  double unclipped;  // ratio * A
  double clipped;    // clip(ratio, 1 - eps, 1 + eps) * A
  double objective;  // negated combination per convention
};

/// ratio > 0, epsilon in (0, 1).
PpoActorTerms ppo_actor_terms(double ratio, double advantage, double epsilon,
                              PpoConvention convention = PpoConvention::kAsPrinted);
double ppo_actor_objective(double ratio, double advantage, double epsilon,
                           PpoConvention convention = PpoConvention::kAsPrinted);

/// 0.5 * max((V - R)^2, (clip(V, V_old - eps, V_old + eps) - R)^2), epsilon in (0, 1).
double ppo_critic_loss(double value, double old_value, double return_estimate, double epsilon);

/// Arithmetic mean; throws on an empty span.
double mean_reduce(std::span<const double> values);

}  // namespace idk::loss
