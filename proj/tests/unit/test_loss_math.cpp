// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "idk/errors.hpp"
#include "idk/loss_math.hpp"
#include "support/oracles.hpp"

using namespace idk;
using namespace idk::loss;
namespace oracle = idk::oracle;

TEST_CASE("sft loss") {
  const std::vector<double> one{0.0};
  const std::vector<double> two{-1.0, -1.0};
  const std::vector<double> three{-0.5, -1.5, -1.0};
  CHECK(sft_loss(one) == 0.0);
  CHECK(sft_loss(two) == doctest::Approx(1.0));
  CHECK(sft_loss(three) == doctest::Approx(1.0));
  CHECK_THROWS_AS(sft_loss(std::span<const double>{}), ValidationError);
  const std::vector<double> positive{-0.1, 0.2};
  CHECK_THROWS_AS(sft_loss(positive), ValidationError);
  const std::vector<double> nan{std::nan("")};
  CHECK_THROWS_AS(sft_loss(nan), ValidationError);
}

TEST_CASE("sft loss is non-negative and zero only for perfect sequences") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> lp(-5.0, 0.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> seq(1 + i % 7);
    for (auto& v : seq) v = lp(gen);
    CHECK(sft_loss(seq) > 0.0);
  }
  const std::vector<double> perfect(5, 0.0);
  CHECK(sft_loss(perfect) == 0.0);
}

TEST_CASE("dpo loss examples") {
  CHECK(dpo_loss({-3, -3, -3, -3, 0.1}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // pc - rc = 1, pr - rr = -1, beta 0.1 -> margin 0.2
  const DpoInputs in{-1.0, -3.0, -2.0, -2.0, 0.1};
  CHECK(dpo_margin(in) == doctest::Approx(0.2));
  CHECK(dpo_loss(in) == doctest::Approx(oracle::dpo(-1, -3, -2, -2, 0.1)).epsilon(1e-14));
  CHECK(dpo_loss(in) == doctest::Approx(0.5981).epsilon(1e-4));
  CHECK_THROWS_AS(dpo_loss({0, 0, 0, 0, 0.0}), ValidationError);
  CHECK_THROWS_AS(dpo_loss({0, 0, 0, 0, -1.0}), ValidationError);
}

TEST_CASE("dpo loss tends to zero as beta grows with a positive margin") {
  double previous = 1e9;
  for (double beta : {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const double l = dpo_loss({-1.0, -3.0, -2.0, -2.0, beta});
    CHECK(l < previous);
    previous = l;
  }
  CHECK(previous < 1e-80);
  CHECK(std::isfinite(dpo_loss({0, 1e6, 0, 0, 1.0})));
  CHECK(dpo_loss({0, 1e6, 0, 0, 1.0}) == doctest::Approx(1e6));
}

TEST_CASE("dpo loss is strictly decreasing in the margin") {
  double previous = std::numeric_limits<double>::infinity();
  for (int i = -200; i <= 200; ++i) {
    const double m = i * 0.1;
    const double l = dpo_loss({m, 0, 0, 0, 1.0});
    CHECK(l < previous);
    previous = l;
  }
}

TEST_CASE("dpo+sft combination") {
  const DpoInputs zero_margin{-2, -2, -2, -2, 0.1};
  const std::vector<double> unit{-1.0, -1.0};
  CHECK(dpo_sft_loss(zero_margin, unit, 0.01) == doctest::Approx(std::log(2.0) + 0.01));
  CHECK(dpo_sft_loss(zero_margin, unit, 0.01) == doctest::Approx(0.7031).epsilon(1e-4));
  const DpoInputs in{-1.2, -4.5, -1.0, -3.0, 0.3};
  CHECK(dpo_sft_loss(in, unit, 0.0) == dpo_loss(in));
  CHECK(dpo_sft_loss(in, std::span<const double>{}, 0.0) == dpo_loss(in));
  const std::vector<double> perfect{0.0, 0.0};
  CHECK(dpo_sft_loss(in, perfect, 1.0) == dpo_loss(in));
  CHECK_THROWS_AS(dpo_sft_loss(in, unit, -0.5), ValidationError);
}

TEST_CASE("reward model pairwise loss") {
  CHECK(rm_pairwise_loss(0.3, 0.3) == doctest::Approx(std::log(2.0)));
  CHECK(rm_pairwise_loss(1.0, 0.0) == doctest::Approx(0.3133).epsilon(1e-4));
  double previous = std::numeric_limits<double>::infinity();
  for (int i = -50; i <= 50; ++i) {
    const double l = rm_pairwise_loss(i * 0.5, 0.0);
    CHECK(l < previous);
    previous = l;
  }
  CHECK(rm_pairwise_loss(800.0, 0.0) == 0.0);
}

TEST_CASE("reward loss symmetric sum is at least 2 ln 2") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> r(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = r(gen);
    const double b = r(gen);
    CHECK(rm_pairwise_loss(a, b) + rm_pairwise_loss(b, a) >= 2.0 * std::log(2.0) - 1e-15);
  }
  CHECK(rm_pairwise_loss(1.5, 1.5) * 2.0 == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("ppo actor terms") {
  auto on_policy = ppo_actor_terms(1.0, 1.0, 0.2);
  CHECK(on_policy.unclipped == on_policy.clipped);
  CHECK(std::abs(on_policy.objective) == 1.0);

  auto high = ppo_actor_terms(1.5, 1.0, 0.2);
  CHECK(high.clipped == doctest::Approx(1.2));
  CHECK(high.unclipped == doctest::Approx(1.5));
  CHECK(high.objective == doctest::Approx(-1.5));
  CHECK(ppo_actor_objective(1.5, 1.0, 0.2, PpoConvention::kStandard) == doctest::Approx(-1.2));

  auto low = ppo_actor_terms(0.5, -1.0, 0.2);
  CHECK(low.clipped == doctest::Approx(-0.8));
  CHECK(low.objective == doctest::Approx(0.5));
  CHECK(ppo_actor_objective(0.5, -1.0, 0.2, PpoConvention::kStandard) == doctest::Approx(0.8));

  CHECK_THROWS_AS(ppo_actor_terms(1.0, 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(ppo_actor_terms(1.0, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(ppo_actor_terms(0.0, 1.0, 0.2), ValidationError);
}

TEST_CASE("ppo actor is flat in the ratio wherever the clipped term is selected") {
  for (auto convention : {PpoConvention::kAsPrinted, PpoConvention::kStandard}) {
    for (double advantage : {-2.0, -0.5, 0.5, 2.0}) {
      for (double eps : {0.1, 0.2}) {
        std::vector<double> outside;
        for (int i = 1; i <= 40; ++i) {
          outside.push_back(1.0 + eps + i * 0.05);
          outside.push_back((1.0 - eps) * i / 41.0);
        }
        for (double r : outside) {
          const auto t = ppo_actor_terms(r, advantage, eps, convention);
          if (t.objective != -t.clipped || t.clipped == t.unclipped) continue;
          const double boundary = r > 1.0 ? 1.0 + eps : 1.0 - eps;
          const double further = r > 1.0 ? r * 1.7 : r * 0.3;
          CHECK(ppo_actor_objective(further, advantage, eps, convention) == t.objective);
          CHECK(t.objective == doctest::Approx(-boundary * advantage));
        }
      }
    }
  }
}

TEST_CASE("ppo critic") {
  CHECK(ppo_critic_loss(0.4, 0.4, 0.4, 0.2) == 0.0);
  CHECK(ppo_critic_loss(2.0, 0.0, 2.0, 0.2) > 0.0);
  CHECK(ppo_critic_loss(2.0, 0.0, 2.0, 0.2) == doctest::Approx(0.5 * 1.8 * 1.8));
  CHECK(ppo_critic_loss(0.3, 0.0, 0.0, 0.1) == doctest::Approx(0.045));
  CHECK_THROWS_AS(ppo_critic_loss(0, 0, 0, 1.5), ValidationError);
}

TEST_CASE("dpo analytic gradient matches central differences") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> lp(-30.0, 0.0);
  std::uniform_real_distribution<double> b(0.01, 2.0);
  for (int i = 0; i < 200; ++i) {
    DpoInputs in{lp(gen), lp(gen), lp(gen), lp(gen), b(gen)};
    const double h = 1e-5;
    DpoInputs up = in, down = in;
    up.policy_chosen_logprob += h;
    down.policy_chosen_logprob -= h;
    const double fd = (dpo_loss(up) - dpo_loss(down)) / (2 * h);
    CHECK(dpo_loss_grad_policy_chosen(in) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    CHECK(dpo_loss_grad_policy_chosen(in) ==
          doctest::Approx(-in.beta * (1.0 - 1.0 / (1.0 + std::exp(-dpo_margin(in))))));
  }
}

TEST_CASE("losses agree with high precision evaluation") {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> lp(-50.0, 0.0);
  std::uniform_real_distribution<double> beta(0.01, 1.0);
  std::uniform_real_distribution<double> reward(-20.0, 20.0);
  for (int i = 0; i < 300; ++i) {
    const double pc = lp(gen), pr = lp(gen), rc = lp(gen), rr = lp(gen), bt = beta(gen);
    CHECK(oracle::relative_error(dpo_loss({pc, pr, rc, rr, bt}), oracle::dpo(pc, pr, rc, rr, bt)) < 1e-9);
    const double a = reward(gen), c = reward(gen);
    CHECK(oracle::relative_error(rm_pairwise_loss(a, c), oracle::rm(a, c)) < 1e-9);
  }
}

TEST_CASE("mean reduction") {
  const std::vector<double> v{1.0, 2.0, 6.0};
  CHECK(mean_reduce(v) == 3.0);
  CHECK_THROWS_AS(mean_reduce(std::span<const double>{}), ValidationError);
  CHECK(neg_log_sigmoid(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}
