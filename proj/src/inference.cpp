// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/inference.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <tuple>

#include "idk/errors.hpp"
#include "idk/parallel.hpp"
#include "idk/rng.hpp"

namespace fs = std::filesystem;

namespace idk {
namespace {

constexpr std::uint64_t kRefusalStream = 0;
constexpr std::uint64_t kCorrectStream = 1;
constexpr std::uint64_t kTextStream = 2;

constexpr std::array<std::string_view, 12> kDistractorWords = {
    "Zanzibar",        "Quetzalcoatl",  "the Ottoman Empire", "Maria Callas",
    "Mount Kilimanjaro", "Bismuth",     "Tasmania",           "Octavian",
    "the Hanseatic League", "Fjordland", "Gorgonzola",        "Vladivostok"};

void check_probability(double p, const std::string& name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(name + " must be in [0, 1], got " + std::to_string(p));
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  std::string bad;
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw ValidationError("unknown keys in " + where + ": " + bad);
}

bool sample_less(const SampledResponse& a, const SampledResponse& b) {
  return std::tie(a.question_id, a.sample_index) < std::tie(b.question_id, b.sample_index);
}

}  // namespace

void SamplingParams::validate() const {
  if (num_samples < 1) throw ValidationError("num_samples must be >= 1");
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("top_p must be in (0, 1]");
  if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be >= 1");
  if (!(repetition_penalty > 0.0)) throw ValidationError("repetition_penalty must be > 0");
}

SamplingParams sampling_params_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("sampling params must be an object");
  check_keys(j,
             {"num_samples", "temperature", "top_p", "max_new_tokens", "repetition_penalty",
              "seed"},
             "params");
  SamplingParams p;
  try {
    if (j.contains("num_samples")) p.num_samples = j.at("num_samples").get<int>();
    if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
    if (j.contains("top_p")) p.top_p = j.at("top_p").get<double>();
    if (j.contains("max_new_tokens")) p.max_new_tokens = j.at("max_new_tokens").get<int>();
    if (j.contains("repetition_penalty")) {
      p.repetition_penalty = j.at("repetition_penalty").get<double>();
    }
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad sampling params: ") + e.what());
  }
  p.validate();
  return p;
}

json to_json(const SamplingParams& p) {
  return json{{"num_samples", p.num_samples},      {"temperature", p.temperature},
              {"top_p", p.top_p},                  {"max_new_tokens", p.max_new_tokens},
              {"repetition_penalty", p.repetition_penalty}, {"seed", p.seed}};
}

json to_json(const SampledResponse& r) {
  return json{{"question_id", r.question_id},
              {"sample_index", r.sample_index},
              {"response", r.response},
              {"backend", r.backend}};
}

json to_json(const SampleFailure& f) {
  return json{{"question_id", f.question_id}, {"sample_index", f.sample_index}, {"error", f.error}};
}

// --- simulated model --------------------------------------------------------

void SimulatedModelSpec::validate() const {
  check_probability(correct_prob, "correct_prob");
  check_probability(refusal_prob, "refusal_prob");
  for (double p : correct_prob_choices) check_probability(p, "correct_prob_choices entry");
  for (const auto& [id, p] : correct_prob_overrides) check_probability(p, "correct_prob for " + id);
  for (const auto& [id, p] : refusal_prob_overrides) check_probability(p, "refusal_prob for " + id);
}

double SimulatedModelSpec::correct_prob_for(std::string_view question_id, std::uint64_t seed) const {
  if (auto it = correct_prob_overrides.find(std::string(question_id));
      it != correct_prob_overrides.end()) {
    return it->second;
  }
  if (!correct_prob_choices.empty()) {
    const std::uint64_t h = rng::key(seed, question_id, 0, 0x70726f62ULL);
    return correct_prob_choices[h % correct_prob_choices.size()];
  }
  return correct_prob;
}

double SimulatedModelSpec::refusal_prob_for(std::string_view question_id) const {
  if (auto it = refusal_prob_overrides.find(std::string(question_id));
      it != refusal_prob_overrides.end()) {
    return it->second;
  }
  return refusal_prob;
}

SimulatedModelSpec simulated_spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("simulated backend config must be an object");
  check_keys(j,
             {"type", "correct_prob", "refusal_prob", "correct_prob_choices",
              "correct_prob_overrides", "refusal_prob_overrides"},
             "simulated backend");
  SimulatedModelSpec spec;
  try {
    if (j.contains("correct_prob")) spec.correct_prob = j.at("correct_prob").get<double>();
    if (j.contains("refusal_prob")) spec.refusal_prob = j.at("refusal_prob").get<double>();
    if (j.contains("correct_prob_choices")) {
      spec.correct_prob_choices = j.at("correct_prob_choices").get<std::vector<double>>();
    }
    if (j.contains("correct_prob_overrides")) {
      spec.correct_prob_overrides =
          j.at("correct_prob_overrides").get<std::map<std::string, double>>();
    }
    if (j.contains("refusal_prob_overrides")) {
      spec.refusal_prob_overrides =
          j.at("refusal_prob_overrides").get<std::map<std::string, double>>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad simulated backend config: ") + e.what());
  }
  spec.validate();
  return spec;
}

json to_json(const SimulatedModelSpec& spec) {
  return json{{"type", "simulated"},
              {"correct_prob", spec.correct_prob},
              {"refusal_prob", spec.refusal_prob},
              {"correct_prob_choices", spec.correct_prob_choices},
              {"correct_prob_overrides", spec.correct_prob_overrides},
              {"refusal_prob_overrides", spec.refusal_prob_overrides}};
}

SimulatedBackend::SimulatedBackend(SimulatedModelSpec spec, JudgeConfig judge)
    : spec_(std::move(spec)), judge_(std::move(judge)) {
  spec_.validate();
}

std::string SimulatedBackend::correct_response(const QaItem& item, std::uint64_t key) const {
  const std::string& alias = item.answers[key % item.answers.size()];
  switch ((key >> 32) % 3) {
    case 0:
      return "The answer is " + alias + ".";
    case 1:
      return alias;
    default:
      return "I believe it is " + alias + ".";
  }
}

std::string SimulatedBackend::distractor_response(const QaItem& item, std::uint64_t key) const {
  auto acceptable = [&](const std::string& text) {
    return !judge_.is_correct(text, item.answers) && !judge_.is_refusal(text);
  };
  const std::size_t start = key % kDistractorWords.size();
  for (std::size_t i = 0; i < kDistractorWords.size(); ++i) {
    const std::string word(kDistractorWords[(start + i) % kDistractorWords.size()]);
    for (const std::string& text : {"I think the answer is " + word + ".", word}) {
      if (acceptable(text)) return text;
    }
  }
  // Exotic alias sets (single letters, stop words): a run of one symbol only
  // contains an alias made of that symbol alone.
  for (char symbol : {'~', '#', '%', '^', '|', '@', 'q', 'z'}) {
    const std::string text(6, symbol);
    if (acceptable(text)) return text;
  }
  throw Error("cannot build a distractor for question " + item.id);
}

std::string SimulatedBackend::generate(const GenerationRequest& request) {
  count_request();
  const std::string& id = request.item.id;
  const std::uint64_t seed = request.params.seed;
  const auto idx = static_cast<std::uint64_t>(request.sample_index);

  if (rng::to_unit(rng::key(seed, id, idx, kRefusalStream)) < spec_.refusal_prob_for(id)) {
    return judge_.config().refusal_template;
  }
  const std::uint64_t text_key = rng::key(seed, id, idx, kTextStream);
  if (rng::to_unit(rng::key(seed, id, idx, kCorrectStream)) < spec_.correct_prob_for(id, seed)) {
    std::string text = correct_response(request.item, text_key);
    if (!judge_.is_correct(text, request.item.answers)) {
      throw Error("simulated correct response failed the judge for question " + id);
    }
    return text;
  }
  std::string text = distractor_response(request.item, text_key);
  if (judge_.is_correct(text, request.item.answers)) {
    throw Error("simulated distractor passed the judge for question " + id);
  }
  return text;
}

std::string api_key_from_env() {
  const char* key = std::getenv("IDK_API_KEY");
  return key ? std::string(key) : std::string();
}

// --- sampling ---------------------------------------------------------------

void canonicalize(std::vector<SampledResponse>& responses) {
  std::sort(responses.begin(), responses.end(), sample_less);
}

SampleRun sample_missing(std::span<const QaItem> items, const SamplingParams& params,
                         ResponseBackend& backend, const PromptTemplate& tmpl,
                         const RetryPolicy& policy, std::vector<SampledResponse> done,
                         JsonlAppender* sink) {
  params.validate();
  std::set<std::pair<std::string, int>> have;
  for (const auto& r : done) have.emplace(r.question_id, r.sample_index);

  struct Task {
    const QaItem* item;
    int sample_index;
  };
  std::vector<Task> tasks;
  std::vector<std::string> prompts;
  prompts.reserve(items.size());
  for (const auto& item : items) prompts.push_back(render_prompt(item, tmpl));
  std::vector<std::size_t> prompt_of;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (int s = 0; s < params.num_samples; ++s) {
      if (have.count({items[i].id, s})) continue;
      tasks.push_back({&items[i], s});
      prompt_of.push_back(i);
    }
  }

  const std::size_t before = backend.requests_issued();
  std::vector<std::optional<SampledResponse>> results(tasks.size());
  std::vector<SampleFailure> failures;
  std::mutex failures_mu;

  parallel_for(tasks.size(), policy.concurrency, [&](std::size_t t) {
    const Task& task = tasks[t];
    std::string text;
    const GenerationRequest req{*task.item, prompts[prompt_of[t]], task.sample_index, params};
    auto error = with_retries(policy, [&] { text = backend.generate(req); });
    if (error) {
      std::lock_guard lock(failures_mu);
      failures.push_back({task.item->id, task.sample_index, *error});
      return;
    }
    SampledResponse r{task.item->id, task.sample_index, std::move(text), std::string(backend.tag())};
    if (sink) sink->append(to_json(r));
    results[t] = std::move(r);
  });

  SampleRun run;
  run.responses = std::move(done);
  for (auto& r : results) {
    if (r) run.responses.push_back(std::move(*r));
  }
  canonicalize(run.responses);
  std::sort(failures.begin(), failures.end(), [](const SampleFailure& a, const SampleFailure& b) {
    return std::tie(a.question_id, a.sample_index) < std::tie(b.question_id, b.sample_index);
  });
  run.failures = std::move(failures);
  run.requests_issued = backend.requests_issued() - before;
  return run;
}

SampleRun sample(std::span<const QaItem> items, const SamplingParams& params,
                 ResponseBackend& backend, const PromptTemplate& tmpl, const RetryPolicy& policy,
                 JsonlAppender* sink) {
  return sample_missing(items, params, backend, tmpl, policy, {}, sink);
}

std::vector<SampledResponse> load_samples(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<SampledResponse> out;
  std::vector<std::string> bad;
  std::set<std::pair<std::string, int>> seen;
  std::string line;
  std::size_t line_no = 0;
  const std::string file = path.string();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json row;
      try {
        row = json::parse(line);
      } catch (const json::parse_error&) {
        throw ParseError(file, line_no, "invalid JSON");
      }
      if (!row.is_object()) throw ParseError(file, line_no, "expected a JSON object");
      SampledResponse r;
      r.question_id = field::string(row, "question_id", file, line_no);
      r.sample_index = static_cast<int>(field::integer(row, "sample_index", file, line_no));
      r.response = field::string(row, "response", file, line_no);
      r.backend = field::string(row, "backend", file, line_no);
      if (r.sample_index < 0) throw ParseError(file, line_no, "negative sample_index");
      if (!seen.emplace(r.question_id, r.sample_index).second) {
        throw ParseError(file, line_no, "duplicate (" + r.question_id + ", " +
                                            std::to_string(r.sample_index) + ")");
      }
      out.push_back(std::move(r));
    } catch (const ParseError& e) {
      bad.push_back(e.what());
    }
  }
  if (!bad.empty()) {
    std::string msg = "corrupt samples file, " + std::to_string(bad.size()) + " bad line(s):";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ValidationError(msg);
  }
  return out;
}

void write_samples(const fs::path& path, std::span<const SampledResponse> responses) {
  std::vector<json> rows;
  rows.reserve(responses.size());
  for (const auto& r : responses) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

void write_failures(const fs::path& path, std::span<const SampleFailure> failures) {
  std::vector<json> rows;
  rows.reserve(failures.size());
  for (const auto& f : failures) rows.push_back(to_json(f));
  write_jsonl(path, rows);
}

SampleRun sample_to_dir(const fs::path& run_dir, std::span<const QaItem> items,
                        const SamplingParams& params, ResponseBackend& backend,
                        const PromptTemplate& tmpl, const RetryPolicy& policy) {
  fs::create_directories(run_dir);
  const fs::path samples_path = run_dir / kSamplesFile;
  fs::remove(samples_path);
  SampleRun run;
  {
    JsonlAppender sink(samples_path);
    run = sample(items, params, backend, tmpl, policy, &sink);
  }
  write_samples(samples_path, run.responses);
  write_failures(run_dir / kSampleFailuresFile, run.failures);
  return run;
}

SampleRun resume(const fs::path& run_dir, std::span<const QaItem> items,
                 const SamplingParams& params, ResponseBackend& backend,
                 const PromptTemplate& tmpl, const RetryPolicy& policy) {
  const fs::path samples_path = run_dir / kSamplesFile;
  if (!fs::exists(samples_path)) {
    throw ValidationError("nothing to resume: '" + samples_path.string() + "' does not exist");
  }
  std::vector<SampledResponse> done = load_samples(samples_path);
  for (const auto& r : done) {
    if (r.sample_index >= params.num_samples) {
      throw ValidationError("samples file has sample_index " + std::to_string(r.sample_index) +
                            " for " + r.question_id + " but num_samples is " +
                            std::to_string(params.num_samples));
    }
  }
  {
    // A partial file written by something else may lack the final newline.
    std::ifstream check(samples_path, std::ios::binary | std::ios::ate);
    if (check.tellg() > 0) {
      check.seekg(-1, std::ios::end);
      if (check.get() != '\n') std::ofstream(samples_path, std::ios::binary | std::ios::app) << '\n';
    }
  }
  SampleRun run;
  {
    JsonlAppender sink(samples_path);
    run = sample_missing(items, params, backend, tmpl, policy, std::move(done), &sink);
  }
  write_samples(samples_path, run.responses);
  write_failures(run_dir / kSampleFailuresFile, run.failures);
  return run;
}

}  // namespace idk
