// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "httplib.h"
#include "idk/errors.hpp"
#include "idk/inference.hpp"

namespace idk {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint URL needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("unsupported URL scheme '" + scheme + "' in " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  if (path_start == scheme_end + 3) throw ValidationError("endpoint URL has no host: " + url);
  return {url.substr(0, path_start), url.substr(path_start)};
}

json post_json(const std::string& url, const json& body, const std::string& bearer_token,
               std::chrono::seconds timeout) {
  const auto [base, path] = split_url(url);
  httplib::Client client(base);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  auto res = client.Post(path, headers, dump_line(body), "application/json");
  if (!res) throw TransientError("request to " + url + " failed: " + httplib::to_string(res.error()));
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw AuthError("endpoint " + url + " rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw TransientError("endpoint " + url + " returned HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw Error("endpoint " + url + " returned HTTP " + std::to_string(status) + ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error&) {
    throw TransientError("endpoint " + url + " returned a non-JSON body");
  }
}

ChatCompletionsBackend::ChatCompletionsBackend(RemoteEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.url);
  if (endpoint_.model.empty()) throw ValidationError("remote backend needs a model name");
}

json ChatCompletionsBackend::request_body(const std::string& model, const std::string& prompt,
                                          const SamplingParams& params) {
  json body{{"model", model},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", params.temperature},
            {"top_p", params.top_p},
            {"max_tokens", params.max_new_tokens}};
  // Not part of the core protocol; only sent when it changes anything.
  if (params.repetition_penalty != 1.0) body["repetition_penalty"] = params.repetition_penalty;
  return body;
}

std::string ChatCompletionsBackend::generate(const GenerationRequest& request) {
  count_request();
  const json reply = post_json(endpoint_.url,
                               request_body(endpoint_.model, request.prompt, request.params),
                               endpoint_.api_key, endpoint_.timeout);
  try {
    const json& content = reply.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return std::string();
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw TransientError("malformed chat-completions reply from " + endpoint_.url);
  }
}

}  // namespace idk
