// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "idk/bon.hpp"
#include "idk/evaluator.hpp"
#include "idk/hir_builder.hpp"
#include "idk/inference.hpp"
#include "idk/labeler.hpp"
#include "idk/loss_math.hpp"
#include "idk/pipeline.hpp"
#include "idk/pref_builder.hpp"
#include "support/oracles.hpp"
#include "unit/test_util.hpp"

using namespace idk;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Quadrant outcomes with the given counts, written to and reloaded from disk.
MetricsReport metrics_from_counts(const fs::path& file, const std::array<std::size_t, 4>& counts) {
  std::vector<QuadrantOutcome> rows;
  std::size_t id = 0;
  for (int q = 0; q < 4; ++q) {
    const auto quadrant = static_cast<Quadrant>(q);
    for (std::size_t i = 0; i < counts[q]; ++i) {
      QuadrantOutcome o;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "t%06zu", id++);
      o.question_id = buf;
      o.quadrant = quadrant;
      o.refused = quadrant == Quadrant::kIkIdk || quadrant == Quadrant::kIdkIk;
      o.correct = quadrant == Quadrant::kIkIk;
      o.gold_label = (quadrant == Quadrant::kIkIdk || quadrant == Quadrant::kIdkIdk) ? KnowledgeLabel::kIdk
                                                                                     : KnowledgeLabel::kIk;
      rows.push_back(o);
    }
  }
  write_quadrants(file, rows);
  return metrics(load_quadrants(file));
}

void ac1(Outcome& out) {
  idk::testing::TempDir dir;
  // 11,313 questions per fixture.
  const auto sft = metrics_from_counts(dir / "sft.jsonl", {3232, 5225, 2177, 679});
  const auto bon = metrics_from_counts(dir / "bon.jsonl", {4341, 4592, 1500, 880});
  out.expect(sft.n == 11313 && bon.n == 11313, "n");
  out.expect(std::abs(sft.ik_ik_rate - 28.57) <= 0.01, "sft ik_ik");
  out.expect(std::abs(sft.ik_idk_rate - 46.19) <= 0.01, "sft ik_idk");
  out.expect(std::abs(sft.truthful_rate - 74.75) <= 0.01, "sft truthful");
  out.expect(std::abs(bon.truthful_rate - 78.96) <= 0.01, "bon truthful");
  out.detail << "sft ik_ik=" << sft.ik_ik_rate << " ik_idk=" << sft.ik_idk_rate
             << " truthful=" << sft.truthful_rate << "; bon truthful=" << bon.truthful_rate;
}

void ac2(Outcome& out) {
  const auto t0 = Clock::now();
  const Judge judge;
  const std::vector<std::string> answers{"Paris"};
  std::size_t patterns = 0;
  for (int k = 1; k <= 10; ++k) {
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
      SampleSet set{"q", {}};
      for (int i = 0; i < k; ++i) {
        set.samples.push_back({"q", i, (mask >> i) & 1u ? "It is Paris." : "It is Lyon.", "test"});
      }
      const auto record = compute_confidence(set, answers, judge, k);
      const bool all_correct = mask == (1u << k) - 1;
      out.expect((label(record, 1.0) == KnowledgeLabel::kIk) == all_correct, "pattern");
      ++patterns;
    }
  }
  const double elapsed = seconds_since(t0);
  out.expect(elapsed < 1.0, "runtime");
  out.detail << patterns << " patterns in " << elapsed << " s";
}

void ac3(Outcome& out) {
  const auto t0 = Clock::now();
  const auto corpus = idk::testing::synthetic_corpus(10000);
  SimulatedBackend backend(SimulatedModelSpec{0.9, 0.0, {}, {}, {}});
  SamplingParams params;
  params.num_samples = 10;
  params.seed = 2024;
  const auto run = sample(corpus, params, backend, PromptTemplate::plain(), RetryPolicy{1, 0, {}});
  out.expect(run.failures.empty(), "no failures");
  const auto records = compute_confidences(run.responses, corpus, Judge{}, 10);
  std::size_t ik = 0;
  for (const auto& r : records) ik += label(r, 1.0) == KnowledgeLabel::kIk;
  const double observed = static_cast<double>(ik) / records.size();
  const double expected = oracle::prob_all_succeed(0.9, 10);
  const double se = oracle::binomial_standard_error(expected, records.size());
  const double elapsed = seconds_since(t0);
  out.expect(std::abs(observed - expected) <= 3 * se, "within 3 SE");
  out.expect(elapsed < 30.0, "runtime");
  out.detail << "ik fraction " << observed << " vs " << expected << " (se " << se << "), " << elapsed << " s";
}

void ac4(Outcome& out) {
  const auto t0 = Clock::now();
  const auto grid = full_threshold_grid();
  std::mt19937_64 gen(99);
  std::size_t corpora = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(gen() % 10);
    const std::size_t n = 1 + gen() % 200;
    std::vector<ConfidenceRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
      ConfidenceRecord r;
      r.question_id = "q" + std::to_string(i);
      r.num_samples = k;
      r.num_correct = static_cast<int>(gen() % (k + 1));
      r.confidence = static_cast<double>(r.num_correct) / k;
      records.push_back(r);
    }
    const auto shares = label_distribution(records, grid);
    for (std::size_t i = 1; i < shares.size(); ++i) {
      out.expect(shares[i].idk_pct >= shares[i - 1].idk_pct, "non-decreasing");
    }
    out.expect(shares.back().ik_threshold == 1.1 && shares.back().idk_pct == 100.0, "100% at 1.1");
    ++corpora;
  }
  const double elapsed = seconds_since(t0);
  out.expect(elapsed < 5.0, "runtime");
  out.detail << corpora << " random corpora in " << elapsed << " s";
}

void ac5(Outcome& out) {
  out.expect(threshold_to_confidence(1.0) == 0.1, "1.0 -> 0.1");
  out.expect(threshold_to_confidence(0.1) == 1.0, "0.1 -> 1.0");
  out.expect(threshold_to_confidence(1.1) == 0.0, "1.1 -> 0.0");
  const auto corpus = idk::testing::synthetic_corpus(137);
  std::vector<ConfidenceRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ConfidenceRecord r;
    r.question_id = corpus[i].id;
    r.num_samples = 10;
    r.num_correct = static_cast<int>(i % 11);
    r.confidence = r.num_correct / 10.0;
    for (int j = 0; j < r.num_correct; ++j) r.correct_responses.push_back(corpus[i].answers[0]);
    records.push_back(r);
  }
  const auto rows = build_hir_dataset(records, corpus, full_threshold_grid(), JudgeConfig{});
  out.expect(rows.size() == 11 * corpus.size(), "row count");
  out.detail << rows.size() << " rows for " << corpus.size() << " questions";
}

void ac6(Outcome& out) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> lp(-40.0, -1e-3);
  std::uniform_real_distribution<double> beta(0.01, 1.0);
  std::uniform_real_distribution<double> reward(-20.0, 20.0);
  std::uniform_real_distribution<double> ratio(0.05, 3.0);
  std::uniform_real_distribution<double> eps(0.01, 0.99);
  double worst = 0, worst_grad = 0;
  auto track = [&](double got, double want, const char* what) {
    const double e = oracle::relative_error(got, want);
    worst = std::max(worst, e);
    out.expect(e <= 1e-9, what);
  };
  for (int i = 0; i < 1000; ++i) {
    loss::DpoInputs in{lp(gen), lp(gen), lp(gen), lp(gen), beta(gen)};
    track(loss::dpo_loss(in), oracle::dpo(in.policy_chosen_logprob, in.policy_rejected_logprob,
                                          in.ref_chosen_logprob, in.ref_rejected_logprob, in.beta),
          "dpo");
    const double rc = reward(gen), rr = reward(gen);
    track(loss::rm_pairwise_loss(rc, rr), oracle::rm(rc, rr), "rm");
    std::vector<double> tokens(1 + gen() % 20);
    for (auto& t : tokens) t = lp(gen);
    track(loss::sft_loss(tokens), oracle::sft(tokens), "sft");
    const double r = ratio(gen), a = reward(gen), e = eps(gen);
    track(loss::ppo_actor_objective(r, a, e), oracle::ppo_actor(r, a, e, false), "ppo actor");
    track(loss::ppo_actor_objective(r, a, e, loss::PpoConvention::kStandard), oracle::ppo_actor(r, a, e, true),
          "ppo actor standard");
    const double v = reward(gen), vo = reward(gen), ret = reward(gen);
    track(loss::ppo_critic_loss(v, vo, ret, e), oracle::ppo_critic(v, vo, ret, e), "ppo critic");

    // Central difference on the chosen log-prob.
    const double h = 1e-5;
    loss::DpoInputs up = in, down = in;
    up.policy_chosen_logprob += h;
    down.policy_chosen_logprob -= h;
    const double fd = (loss::dpo_loss(up) - loss::dpo_loss(down)) / (2 * h);
    const double g = loss::dpo_loss_grad_policy_chosen(in);
    worst_grad = std::max(worst_grad, std::abs(fd - g));
    out.expect(std::abs(fd - g) <= 1e-6, "gradient");

    const double combined = loss::dpo_sft_loss(in, tokens, 0.0);
    out.expect(std::abs(combined - loss::dpo_loss(in)) <= 1e-15 * std::max(1.0, std::abs(combined)), "alpha=0");
  }
  out.detail << "max relative error " << worst << ", max gradient error " << worst_grad;
}

void ac7(Outcome& out) {
  const auto corpus = idk::testing::synthetic_corpus(10000);
  const Judge judge;
  SamplingParams params;
  params.num_samples = 10;
  params.seed = 7;
  SimulatedBackend labeler_model(SimulatedModelSpec{0.5, 0.1, {0.05, 0.5, 0.95, 1.0}, {}, {}});
  const auto samples = sample(corpus, params, labeler_model, PromptTemplate::plain(), RetryPolicy{1, 0, {}});
  const auto records = compute_confidences(samples.responses, corpus, judge, 10);
  const auto dataset = build_idk_dataset(records, corpus, 1.0, judge.config());

  params.num_samples = 3;
  SimulatedBackend sft_model(SimulatedModelSpec{0.4, 0.4, {}, {}, {}});
  const auto sft = sample(corpus, params, sft_model, PromptTemplate::plain(), RetryPolicy{1, 0, {}});
  const auto result = build_pairs(dataset, sft.responses, corpus, judge);
  const auto index = index_corpus(corpus);
  std::size_t invalid = 0;
  for (const auto& pair : result.pairs) {
    if (!check_pair(pair, index.at(pair.question_id)->answers, judge).empty()) ++invalid;
  }
  out.expect(invalid == 0, "pair invariants");
  out.expect(result.pairs.size() + result.skips.size() == corpus.size(), "pairs + skips");
  out.expect(!result.pairs.empty(), "pairs emitted");
  out.detail << result.pairs.size() << " pairs, " << result.skips.size() << " skips, " << invalid << " invalid";
}

void ac8(Outcome& out) {
  const auto corpus = idk::testing::synthetic_corpus(10000);
  SimulatedBackend backend(SimulatedModelSpec{0.5, 0.0, {}, {}, {}});
  SimulatedScorer scorer(SimulatedScorer::Mode::kCorrectness);
  BonOptions options;
  options.n = 10;
  options.seed = 8;
  options.retry = RetryPolicy{1, 0, {}};
  const auto run = bon_run(corpus, options, backend, scorer);
  const Judge judge;
  const auto index = index_corpus(corpus);
  std::size_t correct = 0;
  for (const auto& r : run.records) correct += judge.is_correct(r.response, index.at(r.question_id)->answers);
  const double observed = static_cast<double>(correct) / corpus.size();
  const double expected = oracle::prob_any_succeed(0.5, 10);
  const double se = oracle::binomial_standard_error(expected, corpus.size());
  out.expect(run.records.size() == corpus.size(), "all records");
  out.expect(std::abs(observed - expected) <= 3 * se, "within 3 SE");

  std::mt19937_64 gen(80);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> scale(0.001, 1000.0);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<Candidate> a, b;
    const double m = scale(gen), c = u(gen);
    const std::size_t n = 1 + gen() % 10;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::round(u(gen));  // integer scores force ties
      a.push_back({std::to_string(i), s});
      b.push_back({std::to_string(i), m * s + c});
    }
    out.expect(select(a).index == select(b).index, "affine invariance");
  }
  out.detail << "correct selection " << observed << " vs " << expected << " (se " << se << ")";
}

std::map<std::string, std::string> data_files(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kManifestFile) {
      files[fs::relative(e.path(), dir).string()] = idk::testing::slurp(e.path());
    }
  }
  return files;
}

void ac9(Outcome& out) {
  idk::testing::TempDir dir;
  save_corpus(dir / "corpus.jsonl", idk::testing::synthetic_corpus(300));
  const json config = json::parse(R"({
    "seed": 9,
    "corpus": {"path": "corpus.jsonl"},
    "stages": ["split", "sample", "label", "build_sft", "build_prefs", "build_hir", "eval", "bon", "report"],
    "sample": {"backend": {"type": "simulated", "correct_prob_choices": [0.1, 0.6, 0.9, 1.0], "refusal_prob": 0.05},
               "concurrency": 4},
    "build_prefs": {"sft_backend": {"type": "simulated", "correct_prob": 0.5, "refusal_prob": 0.3}},
    "eval": {"gold": "@build_sft", "responder": {"type": "simulated", "correct_prob": 0.6, "refusal_prob": 0.3}},
    "bon": {"n": 10, "backend": {"type": "simulated", "correct_prob": 0.5, "refusal_prob": 0.2},
            "reward": {"type": "simulated", "mode": "truthful"}, "gold": "@build_sft"},
    "report": {"chart": true, "sweep": true}
  })");
  const auto a = run_pipeline(config, dir / "a", {false, dir.path()});
  const auto b = run_pipeline(config, dir / "b", {false, dir.path()});
  out.expect(a.ok() && b.ok(), "runs completed");
  const auto fa = data_files(dir / "a");
  const auto fb = data_files(dir / "b");
  out.expect(fa == fb, "byte-identical");
  out.expect(fa.size() > 20, "outputs present");
  out.detail << fa.size() << " data files compared";
}

void ac10(Outcome& out) {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 50; ++trial) {
    const auto corpus = idk::testing::synthetic_corpus(1 + gen() % 300, "c" + std::to_string(trial) + "_");
    std::vector<IdkExample> gold;
    const double p_ik = (gen() % 101) / 100.0;
    for (const auto& item : corpus) {
      IdkExample e;
      e.question_id = item.id;
      e.label = std::uniform_real_distribution<double>(0, 1)(gen) < p_ik ? KnowledgeLabel::kIk : KnowledgeLabel::kIdk;
      gold.push_back(e);
    }
    const auto responses = perfect_responses(gold, corpus, JudgeConfig{});
    const auto m = metrics(classify(responses, gold_labels_from(gold), corpus, Judge{}));
    out.expect(m.truthful_rate == 100.0, "truthful");
    out.expect(m.refusal_f1 == 1.0 && m.answer_f1 == 1.0, "f1");
  }
  out.detail << "50 random corpora";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"AC1 quadrant arithmetic fixture", ac1},  {"AC2 threshold 1.0 semantics", ac2},
      {"AC3 binomial oracle", ac3},              {"AC4 monotonicity sweep", ac4},
      {"AC5 HIR formula", ac5},                  {"AC6 loss oracles", ac6},
      {"AC7 preference pair validity", ac7},     {"AC8 best-of-n oracle", ac8},
      {"AC9 end-to-end determinism", ac9},       {"AC10 perfect responder ceiling", ac10},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome out;
    try {
      check(out);
    } catch (const std::exception& e) {
      out.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << name.substr(0, name.find(' ')) << (out.pass ? " PASS " : " FAIL ") << name.substr(name.find(' ') + 1)
              << ": " << out.detail.str() << std::endl;
    failed += !out.pass;
  }
  return failed == 0 ? 0 : 1;
}
