// Copyright 2026 The Cascade Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "cascade/agents.hpp"
#include "cascade/common.hpp"

namespace cascade::gateway {

enum class Provider { Live, Replay, Scripted };

std::string_view to_string(Provider provider);
std::optional<Provider> parse_provider(std::string_view text);

struct TokenUsage {
  long long prompt_tokens = 0;
  long long output_tokens = 0;
  bool operator==(const TokenUsage&) const = default;
};

struct ModelResponse {
  std::string text;
  std::string model_id;
  double latency_ms = 0.0;
  std::optional<TokenUsage> token_usage;
  Provider provider = Provider::Scripted;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

class CassetteMiss : public GatewayError {
 public:
  explicit CassetteMiss(std::string fingerprint);
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class CorruptCassette : public Error {
 public:
  using Error::Error;
};

/// Hash of the canonical JSON of (envelope fields, params, model id). Key
/// order never matters; the envelope's routing origin is excluded.
std::string request_fingerprint(const agents::PromptEnvelope& envelope,
                                const agents::GenerationParams& params,
                                const std::string& model_id);

class ModelGateway {
 public:
  virtual ~ModelGateway() = default;
  virtual ModelResponse complete(const agents::PromptEnvelope& envelope,
                                 const agents::GenerationParams& params,
                                 const std::string& model_id) = 0;
};

struct CassetteEntry {
  std::string fingerprint;
  std::string request;  // serialized envelope, kept for inspection
  std::string model_id;
  std::string text;
  std::optional<TokenUsage> token_usage;
  double latency_ms = 0.0;
  std::size_t hits = 1;
};

/// Recorded prompt->response exchanges keyed by request fingerprint.
/// On disk: one JSON object per line (metadata first, then entries in first-
/// seen order) followed by a final `{"digest": "<sha256 of preceding bytes>"}` line.
class Cassette {
 public:
  explicit Cassette(std::string model_id = {}, std::string created_at = {});
  Cassette(Cassette&& other) noexcept;

  void record(const std::string& fingerprint, const agents::PromptEnvelope& envelope,
              const ModelResponse& response);
  const CassetteEntry* lookup(const std::string& fingerprint) const;

  std::size_t size() const;
  std::vector<CassetteEntry> entries() const;
  const std::string& model_id() const { return model_id_; }
  const std::string& created_at() const { return created_at_; }

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static Cassette parse(std::string_view text);
  static Cassette load(const std::filesystem::path& path);

 private:
  mutable std::mutex mutex_;
  std::string model_id_;
  std::string created_at_;
  std::map<std::string, CassetteEntry> entries_;
  std::vector<std::string> order_;
};

/// Serves responses from a cassette; unseen requests raise CassetteMiss.
class ReplayGateway : public ModelGateway {
 public:
  explicit ReplayGateway(std::shared_ptr<const Cassette> cassette);
  ModelResponse complete(const agents::PromptEnvelope& envelope,
                         const agents::GenerationParams& params,
                         const std::string& model_id) override;

 private:
  std::shared_ptr<const Cassette> cassette_;
};

/// A deterministic fixture provider. The script maps a request to response
/// text; throwing GatewayError from the script simulates a provider outage.
class ScriptedGateway : public ModelGateway {
 public:
  using Script = std::function<std::string(const agents::PromptEnvelope&,
                                           const agents::GenerationParams&, const std::string&)>;
  explicit ScriptedGateway(Script script);
  ModelResponse complete(const agents::PromptEnvelope& envelope,
                         const agents::GenerationParams& params,
                         const std::string& model_id) override;

 private:
  Script script_;
};

/// Decorator appending every successful exchange of the wrapped gateway to a cassette.
class RecordingGateway : public ModelGateway {
 public:
  RecordingGateway(std::shared_ptr<ModelGateway> inner, std::shared_ptr<Cassette> sink);
  ModelResponse complete(const agents::PromptEnvelope& envelope,
                         const agents::GenerationParams& params,
                         const std::string& model_id) override;

 private:
  std::shared_ptr<ModelGateway> inner_;
  std::shared_ptr<Cassette> sink_;
};

/// Global token bucket shared by every live caller.
class RateLimiter {
 public:
  RateLimiter(double tokens_per_second, double burst);
  void acquire();

 private:
  std::mutex mutex_;
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

struct Endpoint {
  std::string base_url;  // e.g. https://api.openai.com
  std::string path = "/v1/chat/completions";
  std::string api_key;
  std::string remote_model;  // model name sent on the wire; defaults to the model id
};

/// Endpoint for a model id from CASCADE_<ID>_BASE_URL / CASCADE_<ID>_API_KEY,
/// falling back to CASCADE_BASE_URL / CASCADE_API_KEY. The id is uppercased
/// and non-alphanumerics become '_'.
Endpoint endpoint_from_env(const std::string& model_id);

/// Builds the chat-completions request body: system message = role text, user
/// message = the serialized five-field envelope.
std::string chat_request_body(const agents::PromptEnvelope& envelope,
                              const agents::GenerationParams& params,
                              const std::string& remote_model);

/// Extracts choices[0].message.content and usage from a chat-completions reply.
ModelResponse parse_chat_response(std::string_view body, const std::string& model_id);

struct RetryPolicy {
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

/// Outcome of a single transport attempt, as seen by the retry loop.
struct AttemptResult {
  int status = 0;  // HTTP status, 0 on transport failure
  std::string body;
  std::string error;
};

/// Runs `attempt` up to 1 + retry_limit times with exponential backoff while
/// it fails with a transport error, 429 or 5xx. Other statuses fail immediately.
std::string with_retries(const std::function<AttemptResult()>& attempt, int retry_limit,
                         const RetryPolicy& policy,
                         const std::function<void(std::chrono::milliseconds)>& sleep);

/// OpenAI-style chat-completions provider over HTTP(S).
class LiveGateway : public ModelGateway {
 public:
  using EndpointResolver = std::function<Endpoint(const std::string&)>;
  explicit LiveGateway(EndpointResolver resolver = endpoint_from_env,
                       std::shared_ptr<RateLimiter> limiter = nullptr, RetryPolicy retry = {});
  ModelResponse complete(const agents::PromptEnvelope& envelope,
                         const agents::GenerationParams& params,
                         const std::string& model_id) override;

 private:
  EndpointResolver resolver_;
  std::shared_ptr<RateLimiter> limiter_;
  RetryPolicy retry_;
};

}  // namespace cascade::gateway
