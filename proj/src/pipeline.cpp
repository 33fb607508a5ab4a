// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <set>

#include "idk/corpus.hpp"
#include "idk/errors.hpp"
#include "idk/evaluator.hpp"
#include "idk/hir_builder.hpp"
#include "idk/labeler.hpp"
#include "idk/pref_builder.hpp"

namespace fs = std::filesystem;

namespace idk {
namespace {

using KeySet = std::set<std::string>;

const std::map<std::string, KeySet>& section_keys() {
  static const std::map<std::string, KeySet> keys = {
      {"corpus", {"path", "format", "force_idk"}},
      {"split", {"dev_fraction", "seed"}},
      {"sample", {"backend", "params", "template", "split", "concurrency", "retries", "backoff_ms"}},
      {"label", {"threshold"}},
      {"build_sft", {"threshold", "template"}},
      {"build_prefs",
       {"seed", "sft_samples", "sft_backend", "params", "validation_fraction", "concurrency",
        "retries", "backoff_ms"}},
      {"build_hir", {"thresholds"}},
      {"eval", {"gold", "responses", "responder", "seed", "concurrency", "retries", "backoff_ms"}},
      {"bon",
       {"n", "backend", "reward", "gold", "seed", "max_new_tokens", "template", "concurrency",
        "retries", "backoff_ms"}},
      {"report", {"chart", "thresholds", "sweep"}},
  };
  return keys;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const json& section(const json& config, const std::string& name) {
  static const json empty = json::object();
  auto it = config.find(name);
  return it == config.end() ? empty : *it;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

bool has_stage(const json& config, std::string_view name) {
  const json& stages = section(config, "stages");
  return std::any_of(stages.begin(), stages.end(),
                     [&](const json& s) { return s.is_string() && s.get<std::string>() == name; });
}

struct RunContext {
  const json& config;
  fs::path run_dir;
  fs::path base_dir;
  JudgeConfig judge_cfg;
  std::uint64_t seed = 0;
  bool force = false;

  fs::path input(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  fs::path out(std::string_view name) const { return run_dir / std::string(name); }

  std::vector<QaItem> corpus() const {
    const json& c = section(config, "corpus");
    return load_corpus(input(c.at("path").get<std::string>()),
                       parse_corpus_format(get_or<std::string>(c, "format", "generic-jsonl")));
  }

  std::uint64_t seed_of(const std::string& name) const {
    return get_or<std::uint64_t>(section(config, name), "seed", seed);
  }

  fs::path gold_path(const std::string& name) const {
    const std::string gold = section(config, name).at("gold").get<std::string>();
    return gold == "@build_sft" ? out("idk_sft.jsonl") : input(gold);
  }
};

std::vector<QaItem> subset(std::span<const QaItem> corpus, const std::set<std::string>& ids) {
  std::vector<QaItem> out;
  for (const auto& item : corpus) {
    if (ids.count(item.id)) out.push_back(item);
  }
  std::sort(out.begin(), out.end(), [](const QaItem& a, const QaItem& b) { return a.id < b.id; });
  return out;
}

double label_threshold(const json& config) {
  return get_or<double>(section(config, "label"), "threshold", 1.0);
}

// --- stages -----------------------------------------------------------------

using StageOutputs = std::vector<std::string>;

StageOutputs stage_split(const RunContext& ctx) {
  const json& s = section(ctx.config, "split");
  const auto items = ctx.corpus();
  SplitSpec spec{get_or<double>(s, "dev_fraction", 0.1), ctx.seed_of("split")};
  const auto split = split_corpus(items, spec);
  save_corpus(ctx.out("train.jsonl"), split.train);
  save_corpus(ctx.out("dev.jsonl"), split.dev);
  return {"train.jsonl", "dev.jsonl"};
}

SamplingParams params_from(const json& stage_section, std::uint64_t seed) {
  json p = stage_section.contains("params") ? stage_section.at("params") : json::object();
  if (!p.contains("seed")) p["seed"] = seed;
  return sampling_params_from_json(p);
}

StageOutputs stage_sample(const RunContext& ctx) {
  const json& s = section(ctx.config, "sample");
  const std::string which = get_or<std::string>(s, "split", "all");
  std::vector<QaItem> items;
  if (which == "all") {
    items = ctx.corpus();
  } else {
    items = load_corpus(ctx.out(which + ".jsonl"), CorpusFormat::kGeneric);
  }
  const SamplingParams params = params_from(s, ctx.seed_of("sample"));
  const auto tmpl = PromptTemplate::parse(get_or<std::string>(s, "template", "plain"));
  auto backend = make_backend(s.at("backend"), ctx.judge_cfg);
  const RetryPolicy policy = retry_policy_from(s);
  if (!ctx.force && fs::exists(ctx.out(kSamplesFile))) {
    resume(ctx.run_dir, items, params, *backend, tmpl, policy);
  } else {
    sample_to_dir(ctx.run_dir, items, params, *backend, tmpl, policy);
  }
  return {std::string(kSamplesFile), std::string(kSampleFailuresFile)};
}

StageOutputs stage_label(const RunContext& ctx) {
  const auto corpus = ctx.corpus();
  const auto samples = load_samples(ctx.out(kSamplesFile));
  std::optional<int> k;
  if (ctx.config.contains("sample")) k = params_from(section(ctx.config, "sample"), 0).num_samples;
  const Judge judge(ctx.judge_cfg);
  const auto records = compute_confidences(samples, corpus, judge, k);
  write_confidence(ctx.out("confidence.jsonl"), records);

  const double threshold = label_threshold(ctx.config);
  std::vector<json> rows;
  for (const auto& r : records) {
    rows.push_back(json{{"question_id", r.question_id},
                        {"label", to_string(label(r, threshold))},
                        {"confidence", r.confidence},
                        {"ik_threshold", threshold}});
  }
  write_jsonl(ctx.out("labels.jsonl"), rows);
  const auto grid = full_threshold_grid();
  write_label_distribution(ctx.out("label_distribution.csv"), label_distribution(records, grid));
  return {"confidence.jsonl", "labels.jsonl", "label_distribution.csv"};
}

StageOutputs stage_build_sft(const RunContext& ctx) {
  const json& s = section(ctx.config, "build_sft");
  const auto corpus = ctx.corpus();
  const auto records = load_confidence(ctx.out("confidence.jsonl"));
  IdkBuildOptions options;
  options.prompt = PromptTemplate::parse(get_or<std::string>(s, "template", "plain"));
  options.force_idk = get_or<bool>(section(ctx.config, "corpus"), "force_idk", false);
  const double threshold = get_or<double>(s, "threshold", label_threshold(ctx.config));
  write_idk_dataset(ctx.out("idk_sft.jsonl"),
                    build_idk_dataset(records, corpus, threshold, ctx.judge_cfg, options));
  return {"idk_sft.jsonl"};
}

StageOutputs stage_build_prefs(const RunContext& ctx) {
  const json& s = section(ctx.config, "build_prefs");
  const auto corpus = ctx.corpus();
  const auto dataset = load_idk_dataset(ctx.out("idk_sft.jsonl"));
  const std::uint64_t seed = ctx.seed_of("build_prefs");
  const auto halves = split_halves(dataset, seed);
  write_idk_dataset(ctx.out("warmup.jsonl"), halves.warmup);
  write_idk_dataset(ctx.out("pref_half.jsonl"), halves.preference);

  std::set<std::string> ids;
  for (const auto& e : halves.preference) ids.insert(e.question_id);
  const auto questions = subset(corpus, ids);
  save_corpus(ctx.out("pref_questions.jsonl"), questions);
  StageOutputs outputs = {"warmup.jsonl", "pref_half.jsonl", "pref_questions.jsonl"};

  std::vector<SampledResponse> sft_samples;
  if (s.contains("sft_samples")) {
    sft_samples = load_samples(ctx.input(s.at("sft_samples").get<std::string>()));
  } else {
    auto backend = make_backend(s.at("sft_backend"), ctx.judge_cfg);
    const SampleRun run = sample(questions, params_from(s, seed), *backend,
                                 PromptTemplate::plain(), retry_policy_from(s));
    sft_samples = run.responses;
    write_samples(ctx.out("sft_samples.jsonl"), sft_samples);
    write_failures(ctx.out("sft_sample_failures.jsonl"), run.failures);
    outputs.push_back("sft_samples.jsonl");
    outputs.push_back("sft_sample_failures.jsonl");
  }
  const auto built = build_pairs(halves.preference, sft_samples, corpus, Judge(ctx.judge_cfg));
  const auto split = hold_out_validation(built.pairs, get_or<double>(s, "validation_fraction", 0.1), seed);
  write_pairs(ctx.out("prefs.jsonl"), split.train);
  write_pairs(ctx.out("prefs_val.jsonl"), split.validation);
  write_skips(ctx.out("prefs_skips.jsonl"), built.skips);
  outputs.insert(outputs.end(), {"prefs.jsonl", "prefs_val.jsonl", "prefs_skips.jsonl"});
  return outputs;
}

StageOutputs stage_build_hir(const RunContext& ctx) {
  const json& s = section(ctx.config, "build_hir");
  const auto thresholds = parse_threshold_grid(get_or<std::string>(s, "thresholds", "0.1:1.1:0.1"));
  const auto rows = build_hir_dataset(load_confidence(ctx.out("confidence.jsonl")), ctx.corpus(),
                                      thresholds, ctx.judge_cfg);
  write_hir_dataset(ctx.out("hir.jsonl"), rows);
  return {"hir.jsonl"};
}

std::vector<ModelResponse> sample_single_responses(const RunContext& ctx, const json& backend_spec,
                                                   const json& stage, std::span<const QaItem> items,
                                                   std::uint64_t seed) {
  auto backend = make_backend(backend_spec, ctx.judge_cfg);
  SamplingParams params;
  params.num_samples = 1;
  params.seed = seed;
  const SampleRun run = sample(items, params, *backend, PromptTemplate::plain(), retry_policy_from(stage));
  if (!run.failures.empty()) {
    throw Error("responder failed for " + std::to_string(run.failures.size()) +
                " question(s), first: " + run.failures.front().question_id + ": " +
                run.failures.front().error);
  }
  return first_sample_responses(run.responses);
}

StageOutputs stage_eval(const RunContext& ctx) {
  const json& s = section(ctx.config, "eval");
  const auto corpus = ctx.corpus();
  const fs::path gold_path = ctx.gold_path("eval");
  const auto gold_examples = load_idk_dataset(gold_path);
  const GoldLabels gold = gold_labels_from(gold_examples);
  StageOutputs outputs;

  std::vector<ModelResponse> responses;
  if (s.contains("responses")) {
    responses = load_responses(ctx.input(s.at("responses").get<std::string>()));
  } else {
    const json& responder = s.at("responder");
    if (responder.is_string()) {
      responses = perfect_responses(gold_examples, corpus, ctx.judge_cfg);
      std::sort(responses.begin(), responses.end(),
                [](const ModelResponse& a, const ModelResponse& b) { return a.question_id < b.question_id; });
    } else {
      std::set<std::string> ids;
      for (const auto& [id, label] : gold) ids.insert(id);
      responses = sample_single_responses(ctx, responder, s, subset(corpus, ids), ctx.seed_of("eval"));
    }
    write_responses(ctx.out("responses.jsonl"), responses);
    outputs.push_back("responses.jsonl");
  }
  const auto outcomes = classify(responses, gold, corpus, Judge(ctx.judge_cfg));
  write_quadrants(ctx.out("quadrants.jsonl"), outcomes);
  const MetricsReport m = metrics(outcomes);
  write_text_file(ctx.out("metrics.json"), to_json(m).dump(2) + "\n");
  const ReportEntry entry{"eval", std::nullopt, m};
  report(std::span(&entry, 1), ReportSpec{ctx.run_dir, false});
  outputs.insert(outputs.end(), {"quadrants.jsonl", "metrics.json", "metrics.csv"});
  return outputs;
}

StageOutputs stage_bon(const RunContext& ctx) {
  const json& s = section(ctx.config, "bon");
  const auto corpus = ctx.corpus();
  GoldLabels gold;
  std::vector<QaItem> items;
  const bool has_gold = s.contains("gold");
  if (has_gold) {
    gold = load_gold_labels(ctx.gold_path("bon"));
    std::set<std::string> ids;
    for (const auto& [id, label] : gold) ids.insert(id);
    items = subset(corpus, ids);
  } else {
    items = corpus;
  }
  BonOptions options;
  options.n = get_or<int>(s, "n", 10);
  options.seed = ctx.seed_of("bon");
  options.max_new_tokens = get_or<int>(s, "max_new_tokens", 512);
  options.prompt = PromptTemplate::parse(get_or<std::string>(s, "template", "plain"));
  options.retry = retry_policy_from(s);
  auto backend = make_backend(s.at("backend"), ctx.judge_cfg);
  auto reward = make_reward(s.at("reward"), ctx.judge_cfg, gold);
  const BonRun run = bon_run(items, options, *backend, *reward);

  const auto responses = to_responses(run.records);
  write_responses(ctx.out("bon_responses.jsonl"), responses);
  write_bon_scores(ctx.out("bon_scores.jsonl"), run.records);
  write_bon_failures(ctx.out("bon_failures.jsonl"), run.failures);
  StageOutputs outputs = {"bon_responses.jsonl", "bon_scores.jsonl", "bon_failures.jsonl"};
  if (has_gold && !responses.empty()) {
    const auto outcomes = classify(responses, gold, corpus, Judge(ctx.judge_cfg));
    write_quadrants(ctx.out("bon_quadrants.jsonl"), outcomes);
    write_text_file(ctx.out("bon_metrics.json"), to_json(metrics(outcomes)).dump(2) + "\n");
    outputs.insert(outputs.end(), {"bon_quadrants.jsonl", "bon_metrics.json"});
  }
  return outputs;
}

StageOutputs stage_report(const RunContext& ctx) {
  const json& s = section(ctx.config, "report");
  const auto thresholds = parse_threshold_grid(get_or<std::string>(s, "thresholds", "0.1:1.1:0.1"));
  const fs::path dir = ctx.out("report");
  std::vector<ReportEntry> entries;
  if (fs::exists(ctx.out("metrics.json"))) {
    entries.push_back({"eval", std::nullopt, metrics_from_json(json::parse(read_text_file(ctx.out("metrics.json"))))});
  }
  if (fs::exists(ctx.out("bon_metrics.json"))) {
    entries.push_back({"bon", std::nullopt,
                       metrics_from_json(json::parse(read_text_file(ctx.out("bon_metrics.json"))))});
  }
  StageOutputs outputs;
  const bool have_confidence = fs::exists(ctx.out("confidence.jsonl"));
  if (have_confidence) {
    const auto records = load_confidence(ctx.out("confidence.jsonl"));
    write_label_distribution(dir / "label_distribution.csv", label_distribution(records, thresholds));
    outputs.push_back("report/label_distribution.csv");

    // Re-score the eval responses against gold labels rebuilt at each threshold.
    if (get_or<bool>(s, "sweep", false) && fs::exists(ctx.out("responses.jsonl"))) {
      const auto corpus = ctx.corpus();
      const Judge judge(ctx.judge_cfg);
      std::set<std::string> known;
      for (const auto& r : records) known.insert(r.question_id);
      std::vector<ModelResponse> responses;
      for (auto& r : load_responses(ctx.out("responses.jsonl"))) {
        if (known.count(r.question_id)) responses.push_back(std::move(r));
      }
      if (!responses.empty()) {
        for (double t : thresholds) {
          GoldLabels gold;
          for (const auto& r : records) gold.emplace(r.question_id, label(r, t));
          entries.push_back({"eval", t, metrics(classify(responses, gold, corpus, judge))});
        }
      }
    }
  }
  for (const auto& p : report(entries, ReportSpec{dir, get_or<bool>(s, "chart", false)})) {
    outputs.push_back(fs::relative(p, ctx.run_dir).string());
  }
  return outputs;
}

const std::map<std::string, std::function<StageOutputs(const RunContext&)>>& stage_table() {
  static const std::map<std::string, std::function<StageOutputs(const RunContext&)>> table = {
      {"split", stage_split},         {"sample", stage_sample},       {"label", stage_label},
      {"build_sft", stage_build_sft}, {"build_prefs", stage_build_prefs},
      {"build_hir", stage_build_hir}, {"eval", stage_eval},           {"bon", stage_bon},
      {"report", stage_report},
  };
  return table;
}

// --- validation -------------------------------------------------------------

void check_backend(const json& spec, const std::string& where, std::vector<std::string>& problems) {
  if (!spec.is_object() || !spec.contains("type")) {
    problems.push_back(where + " must be an object with a \"type\"");
    return;
  }
  const std::string type = spec.at("type").is_string() ? spec.at("type").get<std::string>() : "";
  if (type == "simulated") {
    try {
      simulated_spec_from_json(spec);
    } catch (const ValidationError& e) {
      problems.push_back(where + ": " + e.what());
    }
  } else if (type == "remote") {
    for (const auto& [k, v] : spec.items()) {
      if (k != "type" && k != "endpoint" && k != "model" && k != "timeout_s") {
        problems.push_back("unknown key " + where + "." + k);
      }
    }
    if (!spec.contains("endpoint")) problems.push_back(where + " (remote) needs \"endpoint\"");
    if (!spec.contains("model")) problems.push_back(where + " (remote) needs \"model\"");
  } else {
    problems.push_back(where + ".type must be \"simulated\" or \"remote\"");
  }
}

void check_reward(const json& spec, const std::string& where, bool has_gold,
                  std::vector<std::string>& problems) {
  if (!spec.is_object() || !spec.contains("type")) {
    problems.push_back(where + " must be an object with a \"type\"");
    return;
  }
  const std::string type = spec.at("type").is_string() ? spec.at("type").get<std::string>() : "";
  const KeySet allowed = type == "simulated" ? KeySet{"type", "mode"}
                                             : KeySet{"type", "endpoint", "timeout_s"};
  for (const auto& [k, v] : spec.items()) {
    if (!allowed.count(k)) problems.push_back("unknown key " + where + "." + k);
  }
  if (type == "simulated") {
    try {
      const auto mode = parse_scorer_mode(get_or<std::string>(spec, "mode", "correctness"));
      if (mode == SimulatedScorer::Mode::kTruthful && !has_gold) {
        problems.push_back(where + ": truthful scorer needs bon.gold");
      }
    } catch (const ValidationError& e) {
      problems.push_back(where + ": " + e.what());
    }
  } else if (type == "remote") {
    if (!spec.contains("endpoint")) problems.push_back(where + " (remote) needs \"endpoint\"");
  } else {
    problems.push_back(where + ".type must be \"simulated\" or \"remote\"");
  }
}

}  // namespace

bool PipelineResult::ok() const {
  return std::all_of(stages.begin(), stages.end(),
                     [](const StageRecord& s) { return s.status == "completed"; });
}

std::unique_ptr<ResponseBackend> make_backend(const json& spec, const JudgeConfig& judge) {
  const std::string type = get_or<std::string>(spec, "type", "");
  if (type == "simulated") {
    return std::make_unique<SimulatedBackend>(simulated_spec_from_json(spec), judge);
  }
  if (type == "remote") {
    RemoteEndpoint ep;
    ep.url = get_or<std::string>(spec, "endpoint", "");
    ep.model = get_or<std::string>(spec, "model", "");
    ep.api_key = api_key_from_env();
    ep.timeout = std::chrono::seconds(get_or<int>(spec, "timeout_s", 120));
    return std::make_unique<ChatCompletionsBackend>(ep);
  }
  throw ValidationError("backend type must be \"simulated\" or \"remote\"");
}

std::unique_ptr<RewardSource> make_reward(const json& spec, const JudgeConfig& judge,
                                          GoldLabels gold) {
  const std::string type = get_or<std::string>(spec, "type", "");
  if (type == "simulated") {
    return std::make_unique<SimulatedScorer>(
        parse_scorer_mode(get_or<std::string>(spec, "mode", "correctness")), judge, std::move(gold));
  }
  if (type == "remote") {
    return std::make_unique<RemoteScorer>(get_or<std::string>(spec, "endpoint", ""),
                                          api_key_from_env(),
                                          std::chrono::seconds(get_or<int>(spec, "timeout_s", 60)));
  }
  throw ValidationError("reward type must be \"simulated\" or \"remote\"");
}

RetryPolicy retry_policy_from(const json& s) {
  RetryPolicy p;
  p.concurrency = get_or<std::size_t>(s, "concurrency", p.concurrency);
  p.max_retries = get_or<int>(s, "retries", p.max_retries);
  p.base_backoff = std::chrono::milliseconds(get_or<long>(s, "backoff_ms", p.base_backoff.count()));
  if (p.concurrency < 1) throw ValidationError("concurrency must be >= 1");
  if (p.max_retries < 0) throw ValidationError("retries must be >= 0");
  return p;
}

json apply_overrides(json config, std::span<const std::string> overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("override '" + o + "' must look like key.path=value");
    }
    std::string pointer;
    std::string key = o.substr(0, eq);
    std::size_t pos = 0;
    while (true) {
      const auto dot = key.find('.', pos);
      pointer += "/" + key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    config[json::json_pointer(pointer)] = value;
  }
  return config;
}

void validate_pipeline_config(const json& config, const fs::path& run_dir) {
  if (!config.is_object()) throw ValidationError("config must be a JSON object");
  std::vector<std::string> problems;

  KeySet top = {"stages", "seed", "judge"};
  for (const auto& [name, keys] : section_keys()) top.insert(name);
  for (const auto& [k, v] : config.items()) {
    if (!top.count(k)) {
      problems.push_back("unknown key " + k);
      continue;
    }
    auto sk = section_keys().find(k);
    if (sk == section_keys().end()) continue;
    if (!v.is_object()) {
      problems.push_back(k + " must be an object");
      continue;
    }
    for (const auto& [sub, subv] : v.items()) {
      if (!sk->second.count(sub)) problems.push_back("unknown key " + k + "." + sub);
    }
  }
  if (config.contains("judge")) {
    try {
      judge_config_from_json(config.at("judge"));
    } catch (const ValidationError& e) {
      problems.push_back(e.what());
    }
  }

  const json& stages = section(config, "stages");
  if (!stages.is_array() || stages.empty()) {
    problems.push_back("\"stages\" must be a non-empty list");
  } else {
    for (const auto& s : stages) {
      if (!s.is_string() || !stage_table().count(s.get<std::string>())) {
        problems.push_back("unknown stage " + s.dump());
      }
    }
  }
  if (!section(config, "corpus").contains("path")) problems.push_back("corpus.path is required");

  auto produced = [&](std::string_view stage, std::string_view file) {
    return has_stage(config, stage) || fs::exists(run_dir / std::string(file));
  };
  if (has_stage(config, "sample")) {
    const json& s = section(config, "sample");
    if (!s.contains("backend")) problems.push_back("sample stage needs sample.backend");
    else check_backend(s.at("backend"), "sample.backend", problems);
    const std::string which = get_or<std::string>(s, "split", "all");
    if (which != "all" && which != "train" && which != "dev") {
      problems.push_back("sample.split must be all, train or dev");
    } else if (which != "all" && !produced("split", which + ".jsonl")) {
      problems.push_back("sample.split=" + which + " needs the split stage");
    }
  }
  if (has_stage(config, "label") && !produced("sample", kSamplesFile)) {
    problems.push_back("label stage needs samples (add the sample stage)");
  }
  for (const char* stage : {"build_sft", "build_hir"}) {
    if (has_stage(config, stage) && !produced("label", "confidence.jsonl")) {
      problems.push_back(std::string(stage) + " stage needs confidence records (add the label stage)");
    }
  }
  if (has_stage(config, "build_prefs")) {
    const json& s = section(config, "build_prefs");
    if (!produced("build_sft", "idk_sft.jsonl")) problems.push_back("build_prefs needs the build_sft stage");
    if (!s.contains("sft_samples") && !s.contains("sft_backend")) {
      problems.push_back("build_prefs needs build_prefs.sft_samples or build_prefs.sft_backend");
    }
    if (s.contains("sft_backend")) check_backend(s.at("sft_backend"), "build_prefs.sft_backend", problems);
  }
  auto check_gold = [&](const std::string& stage, bool required) {
    const json& s = section(config, stage);
    if (!s.contains("gold")) {
      if (required) problems.push_back(stage + " requires gold labels (" + stage + ".gold)");
      return;
    }
    if (!s.at("gold").is_string()) {
      problems.push_back(stage + ".gold must be a path or \"@build_sft\"");
    } else if (s.at("gold").get<std::string>() == "@build_sft" && !produced("build_sft", "idk_sft.jsonl")) {
      problems.push_back(stage + ".gold=@build_sft needs the build_sft stage");
    }
  };
  if (has_stage(config, "eval")) {
    check_gold("eval", true);
    const json& s = section(config, "eval");
    if (!s.contains("responses") && !s.contains("responder")) {
      problems.push_back("eval needs eval.responses or eval.responder");
    }
    if (s.contains("responder")) {
      const json& r = s.at("responder");
      if (r.is_string()) {
        if (r.get<std::string>() != "perfect") problems.push_back("eval.responder string must be \"perfect\"");
      } else {
        check_backend(r, "eval.responder", problems);
      }
    }
  }
  if (has_stage(config, "bon")) {
    const json& s = section(config, "bon");
    check_gold("bon", false);
    if (!s.contains("backend")) problems.push_back("bon stage needs bon.backend");
    else check_backend(s.at("backend"), "bon.backend", problems);
    if (!s.contains("reward")) problems.push_back("bon stage needs bon.reward");
    else check_reward(s.at("reward"), "bon.reward", s.contains("gold"), problems);
  }

  if (!problems.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

PipelineResult run_pipeline(const json& config, const fs::path& run_dir,
                            const PipelineOptions& options) {
  validate_pipeline_config(config, run_dir);
  JudgeConfig judge_cfg =
      config.contains("judge") ? judge_config_from_json(config.at("judge")) : JudgeConfig{};

  fs::create_directories(run_dir);
  const std::string config_hash = sha256_hex(config.dump());
  const fs::path manifest_path = run_dir / std::string(kManifestFile);

  // Stages completed by an earlier run of the same config are kept unless forced.
  std::map<std::string, json> previous;
  if (!options.force && fs::exists(manifest_path)) {
    try {
      const json old = json::parse(read_text_file(manifest_path));
      if (old.value("config_sha256", "") == config_hash) {
        for (const auto& st : old.at("stages")) previous[st.at("name").get<std::string>()] = st;
      }
    } catch (const json::exception&) {
      previous.clear();
    }
  }

  RunContext ctx{config, run_dir, options.base_dir, judge_cfg,
                 get_or<std::uint64_t>(config, "seed", 0), options.force};

  json manifest{{"tool", "idk"},
                {"version", std::string(kToolVersion)},
                {"config_sha256", config_hash},
                {"config", config},
                {"judge", to_json(judge_cfg)},
                {"started_at", now_iso8601()}};
  json seeds = json::object();
  for (const char* name : {"split", "sample", "build_prefs", "eval", "bon"}) {
    if (config.contains(name)) seeds[name] = ctx.seed_of(name);
  }
  manifest["seeds"] = seeds;

  PipelineResult result;
  result.run_dir = run_dir;
  bool failed = false;
  for (std::string_view name_view : kStageOrder) {
    const std::string name(name_view);
    if (!has_stage(config, name)) continue;
    StageRecord rec;
    rec.name = name;
    if (failed) {
      rec.status = "skipped";
      result.stages.push_back(rec);
      continue;
    }
    if (auto prev = previous.find(name);
        prev != previous.end() && prev->second.value("status", "") == "completed") {
      rec.status = "completed";
      rec.outputs = prev->second.value("outputs", std::vector<std::string>{});
      rec.started_at = prev->second.value("started_at", "");
      rec.finished_at = prev->second.value("finished_at", "");
      const bool intact = std::all_of(rec.outputs.begin(), rec.outputs.end(),
                                      [&](const std::string& f) { return fs::exists(run_dir / f); });
      if (intact) {
        result.stages.push_back(rec);
        continue;
      }
      rec.outputs.clear();
    }
    rec.started_at = now_iso8601();
    try {
      rec.outputs = stage_table().at(name)(ctx);
      rec.status = "completed";
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
      failed = true;
    }
    rec.finished_at = now_iso8601();
    result.stages.push_back(rec);
  }

  json stages = json::array();
  for (const auto& s : result.stages) {
    json j{{"name", s.name}, {"status", s.status}, {"outputs", s.outputs}};
    if (!s.error.empty()) j["error"] = s.error;
    if (!s.started_at.empty()) j["started_at"] = s.started_at;
    if (!s.finished_at.empty()) j["finished_at"] = s.finished_at;
    stages.push_back(j);
  }
  manifest["stages"] = stages;
  manifest["status"] = failed ? "failed" : "completed";
  manifest["finished_at"] = now_iso8601();
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  return result;
}

}  // namespace idk
