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

#include "cascade/gateway.hpp"

#include <cctype>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

using nlohmann::json;

namespace cascade::gateway {
namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

json usage_to_json(const std::optional<TokenUsage>& usage) {
  if (!usage) return nullptr;
  return {{"prompt_tokens", usage->prompt_tokens}, {"output_tokens", usage->output_tokens}};
}

std::optional<TokenUsage> usage_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return TokenUsage{j.at("prompt_tokens").get<long long>(), j.at("output_tokens").get<long long>()};
}

std::string env_or_empty(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  return value ? std::string(value) : std::string();
}

}  // namespace

std::string_view to_string(Provider provider) {
  switch (provider) {
    case Provider::Live: return "live";
    case Provider::Replay: return "replay";
    case Provider::Scripted: return "scripted";
  }
  return "?";
}

std::optional<Provider> parse_provider(std::string_view text) {
  for (auto p : {Provider::Live, Provider::Replay, Provider::Scripted}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

CassetteMiss::CassetteMiss(std::string fingerprint)
    : GatewayError(fmt::format("CassetteMiss({})", fingerprint)),
      fingerprint_(std::move(fingerprint)) {}

std::string request_fingerprint(const agents::PromptEnvelope& envelope,
                                const agents::GenerationParams& params,
                                const std::string& model_id) {
  json canonical = {
      {"envelope",
       {{"Role", envelope.role_text},
        {"Instruction", envelope.instruction_text},
        {"Example", envelope.example_text},
        {"Context", envelope.context_text},
        {"Question", envelope.question_text}}},
      {"params",
       {{"temperature", params.temperature},
        {"max_output_tokens", params.max_output_tokens},
        {"seed", params.seed ? json(*params.seed) : json(nullptr)}}},
      {"model_id", model_id},
  };
  // nlohmann::json stores objects in sorted key order, so dump() is canonical.
  return sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------
// Cassette

Cassette::Cassette(std::string model_id, std::string created_at)
    : model_id_(std::move(model_id)), created_at_(std::move(created_at)) {}

void Cassette::record(const std::string& fingerprint, const agents::PromptEnvelope& envelope,
                      const ModelResponse& response) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(fingerprint);
  if (it != entries_.end()) {
    ++it->second.hits;
    return;
  }
  CassetteEntry entry;
  entry.fingerprint = fingerprint;
  entry.request = envelope.serialize();
  entry.model_id = response.model_id;
  entry.text = response.text;
  entry.token_usage = response.token_usage;
  entry.latency_ms = response.latency_ms;
  entries_.emplace(fingerprint, std::move(entry));
  order_.push_back(fingerprint);
}

Cassette::Cassette(Cassette&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  model_id_ = std::move(other.model_id_);
  created_at_ = std::move(other.created_at_);
  entries_ = std::move(other.entries_);
  order_ = std::move(other.order_);
}

const CassetteEntry* Cassette::lookup(const std::string& fingerprint) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(fingerprint);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<CassetteEntry> Cassette::entries() const {
  std::lock_guard lock(mutex_);
  std::vector<CassetteEntry> out;
  out.reserve(order_.size());
  for (const auto& fp : order_) out.push_back(entries_.at(fp));
  return out;
}

std::string Cassette::serialize() const {
  std::string body;
  body += json{{"cassette", 1}, {"model_id", model_id_}, {"created_at", created_at_}}.dump();
  body += '\n';
  for (const auto& e : entries()) {
    json line = {{"fingerprint", e.fingerprint}, {"request", e.request},
                 {"model_id", e.model_id},       {"text", e.text},
                 {"token_usage", usage_to_json(e.token_usage)},
                 {"latency_ms", e.latency_ms},   {"hits", e.hits}};
    body += line.dump();
    body += '\n';
  }
  body += json{{"digest", sha256_hex(body)}}.dump();
  body += '\n';
  return body;
}

void Cassette::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Cassette Cassette::parse(std::string_view text) {
  auto lines = split_lines(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.size() < 2) throw CorruptCassette("cassette truncated: missing header or digest");

  std::string_view last = lines.back();
  auto body_len = static_cast<std::size_t>(last.data() - text.data());
  json digest_line;
  try {
    digest_line = json::parse(last);
  } catch (const json::parse_error&) {
    throw CorruptCassette("cassette truncated: final line is not a digest record");
  }
  if (!digest_line.is_object() || !digest_line.contains("digest") ||
      digest_line["digest"] != sha256_hex(text.substr(0, body_len))) {
    throw CorruptCassette("cassette integrity digest mismatch");
  }

  try {
    auto header = json::parse(lines.front());
    Cassette cassette(header.value("model_id", ""), header.value("created_at", ""));
    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
      auto j = json::parse(lines[i]);
      CassetteEntry entry;
      entry.fingerprint = j.at("fingerprint").get<std::string>();
      entry.request = j.at("request").get<std::string>();
      entry.model_id = j.at("model_id").get<std::string>();
      entry.text = j.at("text").get<std::string>();
      entry.token_usage = usage_from_json(j.at("token_usage"));
      entry.latency_ms = j.at("latency_ms").get<double>();
      entry.hits = j.at("hits").get<std::size_t>();
      if (cassette.entries_.count(entry.fingerprint)) {
        throw CorruptCassette(fmt::format("duplicate fingerprint {}", entry.fingerprint));
      }
      cassette.order_.push_back(entry.fingerprint);
      cassette.entries_.emplace(entry.fingerprint, std::move(entry));
    }
    return cassette;
  } catch (const json::exception& e) {
    throw CorruptCassette(fmt::format("malformed cassette record: {}", e.what()));
  }
}

Cassette Cassette::load(const std::filesystem::path& path) { return parse(read_file(path)); }

// ---------------------------------------------------------------------------
// Providers

ReplayGateway::ReplayGateway(std::shared_ptr<const Cassette> cassette)
    : cassette_(std::move(cassette)) {}

ModelResponse ReplayGateway::complete(const agents::PromptEnvelope& envelope,
                                      const agents::GenerationParams& params,
                                      const std::string& model_id) {
  auto fp = request_fingerprint(envelope, params, model_id);
  const auto* entry = cassette_->lookup(fp);
  if (!entry) throw CassetteMiss(fp);
  return {entry->text, model_id, entry->latency_ms, entry->token_usage, Provider::Replay};
}

ScriptedGateway::ScriptedGateway(Script script) : script_(std::move(script)) {}

ModelResponse ScriptedGateway::complete(const agents::PromptEnvelope& envelope,
                                        const agents::GenerationParams& params,
                                        const std::string& model_id) {
  auto start = std::chrono::steady_clock::now();
  auto text = script_(envelope, params, model_id);
  if (text.empty()) throw GatewayError("scripted provider returned an empty completion");
  return {std::move(text), model_id, elapsed_ms(start), std::nullopt, Provider::Scripted};
}

RecordingGateway::RecordingGateway(std::shared_ptr<ModelGateway> inner,
                                   std::shared_ptr<Cassette> sink)
    : inner_(std::move(inner)), sink_(std::move(sink)) {}

ModelResponse RecordingGateway::complete(const agents::PromptEnvelope& envelope,
                                         const agents::GenerationParams& params,
                                         const std::string& model_id) {
  auto response = inner_->complete(envelope, params, model_id);
  sink_->record(request_fingerprint(envelope, params, model_id), envelope, response);
  return response;
}

RateLimiter::RateLimiter(double tokens_per_second, double burst)
    : rate_(tokens_per_second),
      capacity_(burst),
      tokens_(burst),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(capacity_,
                       tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------
// Live wire format

Endpoint endpoint_from_env(const std::string& model_id) {
  std::string key;
  for (char c : model_id) {
    key += std::isalnum(static_cast<unsigned char>(c))
               ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
               : '_';
  }
  Endpoint ep;
  ep.base_url = env_or_empty("CASCADE_" + key + "_BASE_URL");
  if (ep.base_url.empty()) ep.base_url = env_or_empty("CASCADE_BASE_URL");
  ep.api_key = env_or_empty("CASCADE_" + key + "_API_KEY");
  if (ep.api_key.empty()) ep.api_key = env_or_empty("CASCADE_API_KEY");
  ep.remote_model = env_or_empty("CASCADE_" + key + "_REMOTE_MODEL");
  if (ep.remote_model.empty()) ep.remote_model = model_id;
  if (ep.base_url.empty()) {
    throw GatewayError(fmt::format("no endpoint configured for model {} (set CASCADE_{}_BASE_URL)",
                                   model_id, key));
  }
  return ep;
}

std::string chat_request_body(const agents::PromptEnvelope& envelope,
                              const agents::GenerationParams& params,
                              const std::string& remote_model) {
  json body = {
      {"model", remote_model},
      {"temperature", params.temperature},
      {"max_tokens", params.max_output_tokens},
      {"messages",
       json::array({{{"role", "system"}, {"content", envelope.role_text}},
                    {{"role", "user"}, {"content", envelope.serialize()}}})},
  };
  if (params.seed) body["seed"] = *params.seed;
  return body.dump();
}

ModelResponse parse_chat_response(std::string_view body, const std::string& model_id) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw GatewayError(fmt::format("malformed completion body: {}", e.what()));
  }
  ModelResponse response;
  response.model_id = model_id;
  response.provider = Provider::Live;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) response.text = content.get<std::string>();
  } catch (const json::exception&) {
    throw GatewayError("completion body has no choices[0].message.content");
  }
  if (trim(response.text).empty()) throw GatewayError("empty completion");
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    response.token_usage =
        TokenUsage{u.value("prompt_tokens", 0LL), u.value("completion_tokens", 0LL)};
  }
  return response;
}

std::string with_retries(const std::function<AttemptResult()>& attempt, int retry_limit,
                         const RetryPolicy& policy,
                         const std::function<void(std::chrono::milliseconds)>& sleep) {
  auto backoff = policy.initial_backoff;
  std::string last_error;
  for (int i = 0; i <= retry_limit; ++i) {
    if (i > 0) {
      sleep(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
    auto result = attempt();
    if (result.status >= 200 && result.status < 300) return result.body;
    last_error = result.status == 0 ? fmt::format("transport error: {}", result.error)
                                    : fmt::format("HTTP {}: {}", result.status, result.body);
    bool retryable = result.status == 0 || result.status == 429 || result.status >= 500;
    if (!retryable) break;
  }
  throw GatewayError(fmt::format("request failed after retries: {}", last_error));
}

}  // namespace cascade::gateway
