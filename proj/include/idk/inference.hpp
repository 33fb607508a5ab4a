// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "idk/corpus.hpp"
#include "idk/errors.hpp"
#include "idk/judge.hpp"
#include "idk/jsonl.hpp"

namespace idk {

struct SamplingParams {
  int num_samples = 10;
  double temperature = 1.0;
  double top_p = 0.9;
  int max_new_tokens = 512;
  double repetition_penalty = 1.0;
  std::uint64_t seed = 0;  // simulated backend only

  void validate() const;
};

SamplingParams sampling_params_from_json(const json& j);
json to_json(const SamplingParams& p);

struct SampledResponse {
  std::string question_id;
  int sample_index = 0;
  std::string response;
  std::string backend;

  bool operator==(const SampledResponse&) const = default;
};

json to_json(const SampledResponse& r);

struct SampleFailure {
  std::string question_id;
  int sample_index = 0;
  std::string error;
};

json to_json(const SampleFailure& f);

struct GenerationRequest {
  const QaItem& item;
  const std::string& prompt;
  int sample_index;
  const SamplingParams& params;
};

// A model that can be asked for one response at a time. Implementations must
// be safe to call from several threads at once.
//
// generate() signals retryable trouble with TransientError, bad credentials
// with AuthError, and anything else (a request the server will never accept)
// with plain Error.
class ResponseBackend {
 public:
  virtual ~ResponseBackend() = default;

  virtual std::string generate(const GenerationRequest& request) = 0;

  // "remote" or "simulated"; written to samples.jsonl.
  virtual std::string_view tag() const = 0;

  std::size_t requests_issued() const noexcept { return requests_.load(); }

 protected:
  void count_request() noexcept { requests_.fetch_add(1); }

 private:
  std::atomic<std::size_t> requests_{0};
};

/// Latent per-question behaviour of the desk-scale stand-in model.
struct SimulatedModelSpec {
  double correct_prob = 0.5;
  double refusal_prob = 0.0;
  // When non-empty, each question draws p(q) from this list (uniformly, keyed
  // by seed and question id) instead of using correct_prob.
  std::vector<double> correct_prob_choices;
  std::map<std::string, double> correct_prob_overrides;
  std::map<std::string, double> refusal_prob_overrides;

  void validate() const;
  double correct_prob_for(std::string_view question_id, std::uint64_t seed) const;
  double refusal_prob_for(std::string_view question_id) const;
};

SimulatedModelSpec simulated_spec_from_json(const json& j);
json to_json(const SimulatedModelSpec& spec);

/// Emits, per (seed, question, sample): the refusal template with probability
/// r(q); otherwise a sentence containing a gold alias with probability p(q);
/// otherwise a distractor containing no alias. Every emission is checked
/// against the judge before it is returned.
class SimulatedBackend final : public ResponseBackend {
 public:
  SimulatedBackend(SimulatedModelSpec spec, JudgeConfig judge = {});

  std::string generate(const GenerationRequest& request) override;
  std::string_view tag() const override { return "simulated"; }

  const SimulatedModelSpec& spec() const noexcept { return spec_; }

  std::string correct_response(const QaItem& item, std::uint64_t key) const;
  std::string distractor_response(const QaItem& item, std::uint64_t key) const;

 private:
  SimulatedModelSpec spec_;
  Judge judge_;
};

/// Chat-completions client: POST {model, messages, temperature, top_p,
/// max_tokens} with a bearer token, content read from choices[0].message.content.
struct RemoteEndpoint {
  std::string url;  // full URL, e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string api_key;  // empty: no Authorization header
  std::chrono::seconds timeout{120};
};

/// Reads IDK_API_KEY (empty when unset).
std::string api_key_from_env();

class ChatCompletionsBackend final : public ResponseBackend {
 public:
  explicit ChatCompletionsBackend(RemoteEndpoint endpoint);

  std::string generate(const GenerationRequest& request) override;
  std::string_view tag() const override { return "remote"; }

  static json request_body(const std::string& model, const std::string& prompt,
                           const SamplingParams& params);

 private:
  RemoteEndpoint endpoint_;
};

/// Splits "scheme://host[:port]/path" into ("scheme://host[:port]", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

/// Performs one POST of a JSON body and returns the parsed JSON reply,
/// mapping HTTP status codes onto AuthError / TransientError / Error.
json post_json(const std::string& url, const json& body, const std::string& bearer_token,
               std::chrono::seconds timeout);

struct RetryPolicy {
  std::size_t concurrency = 8;
  int max_retries = 3;
  std::chrono::milliseconds base_backoff{250};
};

/// Runs fn with the retry policy: TransientError is retried with exponential
/// backoff, AuthError propagates, other errors fail immediately. Returns the
/// error message on final failure.
template <typename Fn>
std::optional<std::string> with_retries(const RetryPolicy& policy, Fn&& fn);

struct SampleRun {
  std::vector<SampledResponse> responses;  // canonical order
  std::vector<SampleFailure> failures;
  std::size_t requests_issued = 0;
};

/// Canonical order: (question_id, sample_index).
void canonicalize(std::vector<SampledResponse>& responses);

/// Draws params.num_samples responses for every item. If `sink` is given,
/// each completed response is appended to it as it finishes (crash-safe
/// progress for resume); the caller rewrites the canonical file at the end.
/// An AuthError aborts the run and propagates.
SampleRun sample(std::span<const QaItem> items, const SamplingParams& params,
                 ResponseBackend& backend, const PromptTemplate& tmpl, const RetryPolicy& policy,
                 JsonlAppender* sink = nullptr);

/// Same as sample() but skips every (question_id, sample_index) already in
/// `done`; the result contains done + new responses.
SampleRun sample_missing(std::span<const QaItem> items, const SamplingParams& params,
                         ResponseBackend& backend, const PromptTemplate& tmpl,
                         const RetryPolicy& policy, std::vector<SampledResponse> done,
                         JsonlAppender* sink = nullptr);

inline constexpr std::string_view kSamplesFile = "samples.jsonl";
inline constexpr std::string_view kSampleFailuresFile = "sample_failures.jsonl";

/// Reads samples.jsonl. All bad lines are collected and reported in a single
/// ValidationError; duplicates of a (question_id, sample_index) pair are bad.
std::vector<SampledResponse> load_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, std::span<const SampledResponse> responses);
void write_failures(const std::filesystem::path& path, std::span<const SampleFailure> failures);

/// Fresh run into run_dir: writes samples.jsonl and sample_failures.jsonl.
SampleRun sample_to_dir(const std::filesystem::path& run_dir, std::span<const QaItem> items,
                        const SamplingParams& params, ResponseBackend& backend,
                        const PromptTemplate& tmpl, const RetryPolicy& policy);

/// Continues a partial run in run_dir, requesting only missing pairs, and
/// rewrites samples.jsonl canonically.
SampleRun resume(const std::filesystem::path& run_dir, std::span<const QaItem> items,
                 const SamplingParams& params, ResponseBackend& backend,
                 const PromptTemplate& tmpl, const RetryPolicy& policy);

// ---------------------------------------------------------------------------

template <typename Fn>
std::optional<std::string> with_retries(const RetryPolicy& policy, Fn&& fn) {
  std::string last_error;
  for (int attempt = 0;; ++attempt) {
    try {
      fn();
      return std::nullopt;
    } catch (const AuthError&) {
      throw;
    } catch (const TransientError& e) {
      last_error = e.what();
      if (attempt >= policy.max_retries) return last_error;
      std::this_thread::sleep_for(policy.base_backoff * (1LL << attempt));
    } catch (const Error& e) {
      return std::string(e.what());
    }
  }
}

}  // namespace idk
