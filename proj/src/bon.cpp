// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/bon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>

#include "idk/errors.hpp"
#include "idk/parallel.hpp"

namespace idk {

Selection select(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ValidationError("best-of-n selection needs at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = candidates[i].score;
    const double b = candidates[best].score;
    if (std::isnan(s)) continue;
    if (std::isnan(b) || s > b) best = i;
  }
  return {best, candidates[best].score, candidates[best].response};
}

SimulatedScorer::SimulatedScorer(Mode mode, JudgeConfig cfg, GoldLabels gold)
    : mode_(mode), judge_(std::move(cfg)), gold_(std::move(gold)) {}

double SimulatedScorer::score(const QaItem& item, const std::string& /*prompt*/,
                              const std::string& response) {
  const Verdict v = judge_.verdict(response, item.answers);
  if (v == Verdict::kCorrect) return 1.0;
  if (mode_ == Mode::kTruthful && v == Verdict::kRefusal) {
    auto g = gold_.find(item.id);
    if (g == gold_.end()) throw ValidationError("truthful scorer has no gold label for " + item.id);
    return g->second == KnowledgeLabel::kIdk ? 1.0 : 0.0;
  }
  return 0.0;
}

SimulatedScorer::Mode parse_scorer_mode(std::string_view s) {
  if (s == "correctness") return SimulatedScorer::Mode::kCorrectness;
  if (s == "truthful") return SimulatedScorer::Mode::kTruthful;
  throw ValidationError("unknown scorer mode '" + std::string(s) +
                        "' (expected correctness or truthful)");
}

RemoteScorer::RemoteScorer(std::string url, std::string api_key, std::chrono::seconds timeout)
    : url_(std::move(url)), api_key_(std::move(api_key)), timeout_(timeout) {
  split_url(url_);
}

double RemoteScorer::score(const QaItem& /*item*/, const std::string& prompt,
                           const std::string& response) {
  const json reply = post_json(url_, json{{"prompt", prompt}, {"response", response}}, api_key_,
                               timeout_);
  auto it = reply.find("score");
  if (it == reply.end() || !it->is_number()) {
    throw TransientError("scoring endpoint " + url_ + " returned no numeric score");
  }
  return it->get<double>();
}

BonRun bon_run(std::span<const QaItem> items, const BonOptions& options,
               ResponseBackend& backend, RewardSource& reward) {
  if (options.n < 1) throw ValidationError("best-of-n needs n >= 1");
  SamplingParams params;
  params.num_samples = options.n;
  params.temperature = 1.0;
  params.top_p = 0.9;
  params.max_new_tokens = options.max_new_tokens;
  params.seed = options.seed;

  const SampleRun sampled = sample(items, params, backend, options.prompt, options.retry);

  std::map<std::string, std::string> failed;
  for (const auto& f : sampled.failures) failed.emplace(f.question_id, "sampling: " + f.error);

  std::map<std::string, std::vector<const SampledResponse*>> by_question;
  for (const auto& r : sampled.responses) by_question[r.question_id].push_back(&r);

  struct Job {
    const QaItem* item;
    std::string prompt;
    std::vector<const SampledResponse*> samples;
  };
  std::vector<Job> jobs;
  for (const auto& item : items) {
    if (failed.count(item.id)) continue;
    jobs.push_back({&item, render_prompt(item, options.prompt), by_question[item.id]});
  }
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (std::size_t c = 0; c < jobs[j].samples.size(); ++c) slots.emplace_back(j, c);
  }

  std::vector<std::vector<double>> scores(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) scores[j].assign(jobs[j].samples.size(), 0.0);
  std::vector<std::optional<std::string>> score_error(jobs.size());
  std::mutex error_mu;

  parallel_for(slots.size(), options.retry.concurrency, [&](std::size_t s) {
    const auto [j, c] = slots[s];
    const Job& job = jobs[j];
    double value = 0.0;
    auto error = with_retries(options.retry, [&] {
      value = reward.score(*job.item, job.prompt, job.samples[c]->response);
    });
    if (error) {
      std::lock_guard lock(error_mu);
      if (!score_error[j]) score_error[j] = "scoring: " + *error;
      return;
    }
    scores[j][c] = value;
  });

  BonRun run;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (score_error[j]) {
      failed.emplace(jobs[j].item->id, *score_error[j]);
      continue;
    }
    std::vector<Candidate> candidates;
    for (std::size_t c = 0; c < jobs[j].samples.size(); ++c) {
      candidates.push_back({jobs[j].samples[c]->response, scores[j][c]});
    }
    const Selection sel = select(candidates);
    run.records.push_back({jobs[j].item->id, sel.response, sel.index, sel.score});
  }
  std::sort(run.records.begin(), run.records.end(),
            [](const BonRecord& a, const BonRecord& b) { return a.question_id < b.question_id; });
  for (const auto& [id, error] : failed) run.failures.push_back({id, error});
  return run;
}

std::vector<ModelResponse> to_responses(std::span<const BonRecord> records) {
  std::vector<ModelResponse> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.question_id, r.response});
  return out;
}

std::vector<ModelResponse> first_sample_responses(std::span<const SampledResponse> samples) {
  std::vector<ModelResponse> out;
  for (const auto& s : samples) {
    if (s.sample_index == 0) out.push_back({s.question_id, s.response});
  }
  std::sort(out.begin(), out.end(), [](const ModelResponse& a, const ModelResponse& b) {
    return a.question_id < b.question_id;
  });
  return out;
}

void write_bon_scores(const std::filesystem::path& path, std::span<const BonRecord> records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    rows.push_back(json{{"question_id", r.question_id},
                        {"selected_index", r.selected_index},
                        {"score", r.score}});
  }
  write_jsonl(path, rows);
}

void write_bon_failures(const std::filesystem::path& path, std::span<const BonFailure> failures) {
  std::vector<json> rows;
  rows.reserve(failures.size());
  for (const auto& f : failures) rows.push_back(json{{"question_id", f.question_id}, {"error", f.error}});
  write_jsonl(path, rows);
}

}  // namespace idk
