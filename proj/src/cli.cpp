// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include "idk/bon.hpp"
#include "idk/corpus.hpp"
#include "idk/errors.hpp"
#include "idk/evaluator.hpp"
#include "idk/hir_builder.hpp"
#include "idk/inference.hpp"
#include "idk/labeler.hpp"
#include "idk/loss_math.hpp"
#include "idk/pipeline.hpp"
#include "idk/pref_builder.hpp"

namespace fs = std::filesystem;

namespace idk {
namespace {

struct CorpusOpts {
  std::string path;
  std::string format = "generic-jsonl";

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--corpus", path, "QA corpus file");
    if (required) opt->required();
    app->add_option("--format", format, "triviaqa-jsonl | nq-jsonl | generic-jsonl")
        ->capture_default_str();
  }
  std::vector<QaItem> load() const { return load_corpus(path, parse_corpus_format(format)); }
};

struct JudgeOpts {
  std::string file;
  void add(CLI::App* app) {
    app->add_option("--judge-config", file, "JSON file with judge settings");
  }
  JudgeConfig load() const {
    if (file.empty()) return {};
    return judge_config_from_json(json::parse(read_text_file(file)));
  }
};

struct BackendOpts {
  std::string endpoint;
  std::string model;
  int timeout_s = 120;
  bool simulated = false;
  double sim_correct = 0.5;
  double sim_refusal = 0.0;
  std::vector<double> sim_choices;
  std::string config_file;

  void add(CLI::App* app) {
    app->add_option("--endpoint", endpoint, "chat-completions URL");
    app->add_option("--model", model, "model name sent to the endpoint");
    app->add_option("--timeout", timeout_s, "request timeout in seconds")->capture_default_str();
    app->add_flag("--simulated", simulated, "use the simulated backend");
    app->add_option("--sim-correct-prob", sim_correct, "simulated p(q)")->capture_default_str();
    app->add_option("--sim-refusal-prob", sim_refusal, "simulated r(q)")->capture_default_str();
    app->add_option("--sim-correct-prob-choices", sim_choices, "per-question p(q) drawn from these")
        ->delimiter(',');
    app->add_option("--backend-config", config_file, "JSON backend config file");
  }

  json spec() const {
    const int chosen = int(!endpoint.empty()) + int(simulated) + int(!config_file.empty());
    if (chosen != 1) {
      throw ValidationError("choose exactly one of --endpoint, --simulated, --backend-config");
    }
    if (!config_file.empty()) return json::parse(read_text_file(config_file));
    if (simulated) {
      json j{{"type", "simulated"}, {"correct_prob", sim_correct}, {"refusal_prob", sim_refusal}};
      if (!sim_choices.empty()) j["correct_prob_choices"] = sim_choices;
      return j;
    }
    if (model.empty()) throw ValidationError("--endpoint needs --model");
    return json{{"type", "remote"}, {"endpoint", endpoint}, {"model", model}, {"timeout_s", timeout_s}};
  }
};

struct RetryOpts {
  std::size_t concurrency = 8;
  int retries = 3;
  long backoff_ms = 250;
  void add(CLI::App* app) {
    app->add_option("--concurrency", concurrency, "max in-flight requests")->capture_default_str();
    app->add_option("--retries", retries, "retries per request")->capture_default_str();
    app->add_option("--backoff-ms", backoff_ms, "base retry backoff")->capture_default_str();
  }
  RetryPolicy policy() const {
    return retry_policy_from(json{{"concurrency", concurrency}, {"retries", retries}, {"backoff_ms", backoff_ms}});
  }
};

std::vector<QaItem> subset_sorted(std::span<const QaItem> corpus, const GoldLabels& gold) {
  std::vector<QaItem> out;
  for (const auto& item : corpus) {
    if (gold.count(item.id)) out.push_back(item);
  }
  std::sort(out.begin(), out.end(), [](const QaItem& a, const QaItem& b) { return a.id < b.id; });
  return out;
}

void print_metrics(std::ostream& out, const MetricsReport& m) { out << to_json(m).dump(2) << "\n"; }

double arg(const json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || !it->is_number()) {
    throw ValidationError(std::string("loss-check: missing numeric argument \"") + key + "\"");
  }
  return it->get<double>();
}

double arg_or(const json& args, const char* key, double fallback) {
  return args.contains(key) ? arg(args, key) : fallback;
}

std::vector<double> arg_list(const json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || !it->is_array()) {
    throw ValidationError(std::string("loss-check: missing list argument \"") + key + "\"");
  }
  return it->get<std::vector<double>>();
}

loss::DpoInputs dpo_args(const json& a) {
  return {arg(a, "policy_chosen"), arg(a, "policy_rejected"), arg(a, "ref_chosen"),
          arg(a, "ref_rejected"), arg_or(a, "beta", 0.1)};
}

loss::PpoConvention ppo_convention(const json& a) {
  const std::string c = a.value("convention", "as-printed");
  if (c == "as-printed") return loss::PpoConvention::kAsPrinted;
  if (c == "standard") return loss::PpoConvention::kStandard;
  throw ValidationError("loss-check: convention must be as-printed or standard");
}

}  // namespace

json evaluate_loss_row(const json& row, double rtol, double atol) {
  if (!row.is_object() || !row.contains("fn") || !row.at("fn").is_string()) {
    throw ValidationError("loss-check: row needs a string \"fn\"");
  }
  const json& a = row.contains("args") ? row.at("args") : row;
  const std::string fn = row.at("fn").get<std::string>();
  double value = 0.0;
  if (fn == "sft") {
    value = loss::sft_loss(arg_list(a, "logprobs"));
  } else if (fn == "dpo") {
    value = loss::dpo_loss(dpo_args(a));
  } else if (fn == "dpo_grad") {
    value = loss::dpo_loss_grad_policy_chosen(dpo_args(a));
  } else if (fn == "dpo_sft") {
    value = loss::dpo_sft_loss(dpo_args(a), arg_list(a, "chosen_logprobs"),
                               arg_or(a, "alpha", loss::kDefaultSftAlpha));
  } else if (fn == "rm") {
    value = loss::rm_pairwise_loss(arg(a, "reward_chosen"), arg(a, "reward_rejected"));
  } else if (fn == "ppo_actor") {
    value = loss::ppo_actor_objective(arg(a, "ratio"), arg(a, "advantage"), arg_or(a, "epsilon", 0.2),
                                      ppo_convention(a));
  } else if (fn == "ppo_critic") {
    value = loss::ppo_critic_loss(arg(a, "value"), arg(a, "old_value"), arg(a, "return"),
                                  arg_or(a, "epsilon", 0.2));
  } else {
    throw ValidationError("loss-check: unknown fn \"" + fn + "\"");
  }
  json out = row;
  out["value"] = value;
  if (row.contains("expected")) {
    const double expected = arg(row, "expected");
    const double err = std::fabs(value - expected);
    out["abs_error"] = err;
    out["ok"] = err <= atol + rtol * std::fabs(expected);
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Refusal-aware QA dataset and evaluation toolkit", "idk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CorpusOpts corpus;
  JudgeOpts judge;
  BackendOpts backend;
  RetryOpts retry;

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw k responses per question");
  SamplingParams sp;
  std::string sample_out, sample_template = "plain";
  bool sample_resume = false;
  corpus.add(sample_cmd);
  judge.add(sample_cmd);
  backend.add(sample_cmd);
  retry.add(sample_cmd);
  sample_cmd->add_option("--num-samples", sp.num_samples)->capture_default_str();
  sample_cmd->add_option("--temperature", sp.temperature)->capture_default_str();
  sample_cmd->add_option("--top-p", sp.top_p)->capture_default_str();
  sample_cmd->add_option("--max-new-tokens", sp.max_new_tokens)->capture_default_str();
  sample_cmd->add_option("--repetition-penalty", sp.repetition_penalty)->capture_default_str();
  sample_cmd->add_option("--seed", sp.seed)->capture_default_str();
  sample_cmd->add_option("--template", sample_template, "plain | idk-prompt | hir:<level>")
      ->capture_default_str();
  sample_cmd->add_option("--out", sample_out, "run directory")->required();
  sample_cmd->add_flag("--resume", sample_resume, "continue a partial samples.jsonl");

  // label
  auto* label_cmd = app.add_subcommand("label", "compute confidences and IK/IDK labels");
  std::string label_samples, label_out;
  double label_threshold = 1.0;
  int label_k = 0;
  corpus.add(label_cmd);
  judge.add(label_cmd);
  label_cmd->add_option("--samples", label_samples, "samples.jsonl")->required();
  label_cmd->add_option("--threshold", label_threshold)->capture_default_str();
  label_cmd->add_option("--num-samples", label_k, "expected samples per question");
  label_cmd->add_option("--out", label_out, "output directory")->required();

  // build-sft
  auto* sft_cmd = app.add_subcommand("build-sft", "build the Idk SFT dataset");
  std::string sft_confidence, sft_out = "idk_sft.jsonl", sft_template = "plain";
  double sft_threshold = 1.0;
  bool sft_force_idk = false;
  corpus.add(sft_cmd);
  judge.add(sft_cmd);
  sft_cmd->add_option("--confidence", sft_confidence, "confidence.jsonl")->required();
  sft_cmd->add_option("--threshold", sft_threshold)->capture_default_str();
  sft_cmd->add_option("--template", sft_template)->capture_default_str();
  sft_cmd->add_flag("--force-idk", sft_force_idk, "label every question IDK");
  sft_cmd->add_option("--out", sft_out)->capture_default_str();

  // build-prefs
  auto* prefs_cmd = app.add_subcommand("build-prefs", "build preference pairs");
  std::string prefs_dataset, prefs_sft_samples, prefs_out;
  std::uint64_t prefs_seed = 0;
  double prefs_val = 0.1;
  corpus.add(prefs_cmd);
  judge.add(prefs_cmd);
  prefs_cmd->add_option("--idk-sft", prefs_dataset, "idk_sft.jsonl")->required();
  prefs_cmd->add_option("--sft-samples", prefs_sft_samples, "samples of the warmed-up model")->required();
  prefs_cmd->add_option("--seed", prefs_seed)->capture_default_str();
  prefs_cmd->add_option("--validation-fraction", prefs_val)->capture_default_str();
  prefs_cmd->add_option("--out", prefs_out, "output directory")->required();

  // build-hir
  auto* hir_cmd = app.add_subcommand("build-hir", "build the relabeled multi-threshold dataset");
  std::string hir_confidence, hir_out = "hir.jsonl", hir_grid = "0.1:1.1:0.1";
  corpus.add(hir_cmd);
  judge.add(hir_cmd);
  hir_cmd->add_option("--confidence", hir_confidence, "confidence.jsonl")->required();
  hir_cmd->add_option("--thresholds", hir_grid, "a:b:step or comma list")->capture_default_str();
  hir_cmd->add_option("--out", hir_out)->capture_default_str();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "classify responses into knowledge quadrants");
  std::string eval_gold, eval_responses, eval_out = ".";
  bool eval_chart = false;
  corpus.add(eval_cmd);
  judge.add(eval_cmd);
  eval_cmd->add_option("--gold", eval_gold, "idk_sft.jsonl with gold labels")->required();
  eval_cmd->add_option("--responses", eval_responses, "responses.jsonl")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->capture_default_str();
  eval_cmd->add_flag("--chart", eval_chart, "also write quadrants.svg");

  // bon
  auto* bon_cmd = app.add_subcommand("bon", "best-of-n selection with a reward model");
  BonOptions bon_opts;
  std::string bon_reward_endpoint, bon_sim_reward, bon_gold, bon_out, bon_template = "plain";
  int bon_reward_timeout = 60;
  corpus.add(bon_cmd);
  judge.add(bon_cmd);
  backend.add(bon_cmd);
  retry.add(bon_cmd);
  bon_cmd->add_option("--n", bon_opts.n)->capture_default_str();
  bon_cmd->add_option("--seed", bon_opts.seed)->capture_default_str();
  bon_cmd->add_option("--max-new-tokens", bon_opts.max_new_tokens)->capture_default_str();
  bon_cmd->add_option("--template", bon_template)->capture_default_str();
  bon_cmd->add_option("--reward-endpoint", bon_reward_endpoint, "reward model scoring URL");
  bon_cmd->add_option("--reward-timeout", bon_reward_timeout)->capture_default_str();
  bon_cmd->add_option("--simulated-reward", bon_sim_reward, "correctness | truthful");
  bon_cmd->add_option("--gold", bon_gold, "gold labels; restricts questions and enables eval");
  bon_cmd->add_option("--out", bon_out, "output directory")->required();

  // loss-check
  auto* loss_cmd = app.add_subcommand("loss-check", "evaluate loss functions on JSONL inputs");
  std::string loss_in, loss_out;
  double loss_rtol = 1e-9, loss_atol = 1e-12;
  loss_cmd->add_option("--input", loss_in, "JSONL rows {fn, args, expected?}")->required();
  loss_cmd->add_option("--out", loss_out, "output JSONL (default stdout)");
  loss_cmd->add_option("--rtol", loss_rtol)->capture_default_str();
  loss_cmd->add_option("--atol", loss_atol)->capture_default_str();

  // report
  auto* report_cmd = app.add_subcommand("report", "metrics tables, sweeps and charts");
  std::vector<std::string> report_entries;
  std::string report_confidence, report_grid = "0.1:1.1:0.1", report_out;
  bool report_chart = false;
  report_cmd->add_option("--entry", report_entries, "NAME[@THRESHOLD]=metrics.json")->take_all();
  report_cmd->add_option("--confidence", report_confidence, "confidence.jsonl for label shares");
  report_cmd->add_option("--thresholds", report_grid)->capture_default_str();
  report_cmd->add_option("--out", report_out, "output directory")->required();
  report_cmd->add_flag("--chart", report_chart, "also write quadrants.svg");

  // run
  auto* run_cmd = app.add_subcommand("run", "run the configured pipeline stages");
  std::string run_config, run_out;
  std::vector<std::string> run_sets;
  bool run_force = false;
  std::uint64_t run_seed = 0;
  run_cmd->add_option("--config", run_config, "pipeline config JSON")->required();
  run_cmd->add_option("--out", run_out, "run directory")->required();
  run_cmd->add_option("--set", run_sets, "override key.path=value")->take_all();
  auto* run_seed_opt = run_cmd->add_option("--seed", run_seed, "override the top-level seed");
  run_cmd->add_flag("--force", run_force, "re-run completed stages");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (sample_cmd->parsed()) {
      sp.validate();
      const auto items = corpus.load();
      auto model = make_backend(backend.spec(), judge.load());
      const auto tmpl = PromptTemplate::parse(sample_template);
      const SampleRun run = sample_resume
                                ? resume(sample_out, items, sp, *model, tmpl, retry.policy())
                                : sample_to_dir(sample_out, items, sp, *model, tmpl, retry.policy());
      out << "samples: " << run.responses.size() << ", failures: " << run.failures.size()
          << ", requests: " << run.requests_issued << "\n";
      return kExitOk;
    }
    if (label_cmd->parsed()) {
      validate_threshold(label_threshold);
      const auto items = corpus.load();
      const auto records = compute_confidences(load_samples(label_samples), items, Judge(judge.load()),
                                               label_k > 0 ? std::optional<int>(label_k) : std::nullopt);
      const fs::path dir(label_out);
      write_confidence(dir / "confidence.jsonl", records);
      std::vector<json> rows;
      std::size_t ik = 0;
      for (const auto& r : records) {
        const KnowledgeLabel l = label(r, label_threshold);
        ik += l == KnowledgeLabel::kIk;
        rows.push_back(json{{"question_id", r.question_id}, {"label", to_string(l)},
                            {"confidence", r.confidence}, {"ik_threshold", label_threshold}});
      }
      write_jsonl(dir / "labels.jsonl", rows);
      const auto grid = full_threshold_grid();
      write_label_distribution(dir / "label_distribution.csv", label_distribution(records, grid));
      out << "questions: " << records.size() << ", IK: " << ik << ", IDK: " << records.size() - ik << "\n";
      return kExitOk;
    }
    if (sft_cmd->parsed()) {
      IdkBuildOptions options{PromptTemplate::parse(sft_template), sft_force_idk};
      const auto rows = build_idk_dataset(load_confidence(sft_confidence), corpus.load(), sft_threshold,
                                          judge.load(), options);
      write_idk_dataset(sft_out, rows);
      out << "examples: " << rows.size() << "\n";
      return kExitOk;
    }
    if (prefs_cmd->parsed()) {
      const auto items = corpus.load();
      const auto halves = split_halves(load_idk_dataset(prefs_dataset), prefs_seed);
      const fs::path dir(prefs_out);
      write_idk_dataset(dir / "warmup.jsonl", halves.warmup);
      write_idk_dataset(dir / "pref_half.jsonl", halves.preference);
      const auto built = build_pairs(halves.preference, load_samples(prefs_sft_samples), items,
                                     Judge(judge.load()));
      const auto split = hold_out_validation(built.pairs, prefs_val, prefs_seed);
      write_pairs(dir / "prefs.jsonl", split.train);
      write_pairs(dir / "prefs_val.jsonl", split.validation);
      write_skips(dir / "prefs_skips.jsonl", built.skips);
      out << "pairs: " << built.pairs.size() << " (validation " << split.validation.size()
          << "), skips: " << built.skips.size() << "\n";
      return kExitOk;
    }
    if (hir_cmd->parsed()) {
      const auto rows = build_hir_dataset(load_confidence(hir_confidence), corpus.load(),
                                          parse_threshold_grid(hir_grid), judge.load());
      write_hir_dataset(hir_out, rows);
      out << "examples: " << rows.size() << "\n";
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      const auto outcomes = classify(eval_responses, eval_gold, corpus.load(), Judge(judge.load()));
      const fs::path dir(eval_out);
      write_quadrants(dir / "quadrants.jsonl", outcomes);
      const MetricsReport m = metrics(outcomes);
      write_text_file(dir / "metrics.json", to_json(m).dump(2) + "\n");
      const ReportEntry entry{"eval", std::nullopt, m};
      report(std::span(&entry, 1), ReportSpec{dir, eval_chart});
      print_metrics(out, m);
      return kExitOk;
    }
    if (bon_cmd->parsed()) {
      const JudgeConfig cfg = judge.load();
      const auto items_all = corpus.load();
      GoldLabels gold;
      if (!bon_gold.empty()) gold = load_gold_labels(bon_gold);
      const auto items = bon_gold.empty() ? items_all : subset_sorted(items_all, gold);
      json reward_spec;
      if (!bon_reward_endpoint.empty() == !bon_sim_reward.empty()) {
        throw ValidationError("choose exactly one of --reward-endpoint, --simulated-reward");
      }
      if (!bon_reward_endpoint.empty()) {
        reward_spec = {{"type", "remote"}, {"endpoint", bon_reward_endpoint}, {"timeout_s", bon_reward_timeout}};
      } else {
        reward_spec = {{"type", "simulated"}, {"mode", bon_sim_reward}};
        if (parse_scorer_mode(bon_sim_reward) == SimulatedScorer::Mode::kTruthful && bon_gold.empty()) {
          throw ValidationError("--simulated-reward truthful needs --gold");
        }
      }
      bon_opts.prompt = PromptTemplate::parse(bon_template);
      bon_opts.retry = retry.policy();
      auto model = make_backend(backend.spec(), cfg);
      auto reward = make_reward(reward_spec, cfg, gold);
      const BonRun run = bon_run(items, bon_opts, *model, *reward);
      const fs::path dir(bon_out);
      const auto responses = to_responses(run.records);
      write_responses(dir / "bon_responses.jsonl", responses);
      write_bon_scores(dir / "bon_scores.jsonl", run.records);
      write_bon_failures(dir / "bon_failures.jsonl", run.failures);
      out << "selected: " << run.records.size() << ", failures: " << run.failures.size() << "\n";
      if (!bon_gold.empty() && !responses.empty()) {
        const auto outcomes = classify(responses, gold, items_all, Judge(cfg));
        write_quadrants(dir / "bon_quadrants.jsonl", outcomes);
        const MetricsReport m = metrics(outcomes);
        write_text_file(dir / "bon_metrics.json", to_json(m).dump(2) + "\n");
        print_metrics(out, m);
      }
      return kExitOk;
    }
    if (loss_cmd->parsed()) {
      std::vector<json> rows;
      bool all_ok = true;
      for_each_jsonl(loss_in, [&](const json& row, std::size_t line) {
        try {
          json r = evaluate_loss_row(row, loss_rtol, loss_atol);
          if (r.contains("ok") && !r.at("ok").get<bool>()) all_ok = false;
          rows.push_back(std::move(r));
        } catch (const ValidationError& e) {
          throw ParseError(loss_in, line, e.what());
        }
      });
      if (loss_out.empty()) {
        for (const auto& r : rows) out << dump_line(r) << "\n";
      } else {
        write_jsonl(loss_out, rows);
      }
      if (!all_ok) {
        err << "loss-check: at least one row differs from its expected value\n";
        return kExitStageFailure;
      }
      return kExitOk;
    }
    if (report_cmd->parsed()) {
      std::vector<ReportEntry> entries;
      for (const auto& spec : report_entries) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ValidationError("--entry must be NAME[@THRESHOLD]=FILE");
        std::string name = spec.substr(0, eq);
        std::optional<double> threshold;
        if (const auto at = name.find('@'); at != std::string::npos) {
          try {
            threshold = std::stod(name.substr(at + 1));
          } catch (const std::exception&) {
            throw ValidationError("bad threshold in --entry " + spec);
          }
          name = name.substr(0, at);
        }
        entries.push_back({name, threshold,
                           metrics_from_json(json::parse(read_text_file(spec.substr(eq + 1))))});
      }
      const fs::path dir(report_out);
      if (!report_confidence.empty()) {
        const auto grid = parse_threshold_grid(report_grid);
        write_label_distribution(dir / "label_distribution.csv",
                                 label_distribution(load_confidence(report_confidence), grid));
      } else if (entries.empty()) {
        throw ValidationError("report needs at least one --entry or --confidence");
      }
      if (!entries.empty()) report(entries, ReportSpec{dir, report_chart});
      return kExitOk;
    }
    if (run_cmd->parsed()) {
      json config = json::parse(read_text_file(run_config));
      config = apply_overrides(std::move(config), run_sets);
      if (run_seed_opt->count() > 0) config["seed"] = run_seed;
      PipelineOptions options;
      options.force = run_force;
      options.base_dir = fs::absolute(run_config).parent_path();
      const PipelineResult result = run_pipeline(config, run_out, options);
      for (const auto& s : result.stages) {
        out << s.name << ": " << s.status;
        if (!s.error.empty()) out << " (" << s.error << ")";
        out << "\n";
      }
      return result.ok() ? kExitOk : kExitStageFailure;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    err << "error: invalid JSON: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitValidation;
}

}  // namespace idk
