// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/loss_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "idk/errors.hpp"

namespace idk::loss {
namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon must be in (0, 1), got " + std::to_string(epsilon));
  }
}

}  // namespace

double neg_log_sigmoid(double x) {
  // log(1 + e^-x) = max(-x, 0) + log1p(e^-|x|)
  return std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sft_loss(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw ValidationError("sft_loss needs at least one token");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!(lp <= 0.0)) throw ValidationError("token log-probabilities must be <= 0");
    sum += lp;
  }
  return -sum / static_cast<double>(token_logprobs.size());
}

double dpo_margin(const DpoInputs& in) {
  if (!(in.beta > 0.0)) throw ValidationError("beta must be > 0");
  return in.beta * ((in.policy_chosen_logprob - in.ref_chosen_logprob) -
                    (in.policy_rejected_logprob - in.ref_rejected_logprob));
}

double dpo_loss(const DpoInputs& in) { return neg_log_sigmoid(dpo_margin(in)); }

double dpo_loss_grad_policy_chosen(const DpoInputs& in) {
  return -in.beta * sigmoid(-dpo_margin(in));
}

double dpo_sft_loss(const DpoInputs& in, std::span<const double> chosen_token_logprobs,
                    double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  const double dpo = dpo_loss(in);
  if (alpha == 0.0) return dpo;
  return dpo + alpha * sft_loss(chosen_token_logprobs);
}

double rm_pairwise_loss(double reward_chosen, double reward_rejected) {
  return neg_log_sigmoid(reward_chosen - reward_rejected);
}

PpoActorTerms ppo_actor_terms(double ratio, double advantage, double epsilon,
                              PpoConvention convention) {
  check_epsilon(epsilon);
  if (!(ratio > 0.0)) throw ValidationError("probability ratio must be > 0");
  PpoActorTerms t{};
  t.unclipped = ratio * advantage;
  t.clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  t.objective = convention == PpoConvention::kAsPrinted ? -std::max(t.unclipped, t.clipped)
                                                        : -std::min(t.unclipped, t.clipped);
  return t;
}

double ppo_actor_objective(double ratio, double advantage, double epsilon,
                           PpoConvention convention) {
  return ppo_actor_terms(ratio, advantage, epsilon, convention).objective;
}

double ppo_critic_loss(double value, double old_value, double return_estimate, double epsilon) {
  check_epsilon(epsilon);
  const double clipped_value = std::clamp(value, old_value - epsilon, old_value + epsilon);
  const double a = value - return_estimate;
  const double b = clipped_value - return_estimate;
  return 0.5 * std::max(a * a, b * b);
}

double mean_reduce(std::span<const double> values) {
  if (values.empty()) throw ValidationError("cannot average an empty batch");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace idk::loss
