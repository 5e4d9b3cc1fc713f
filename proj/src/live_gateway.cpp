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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <thread>

#include "cascade/gateway.hpp"

namespace cascade::gateway {

LiveGateway::LiveGateway(EndpointResolver resolver, std::shared_ptr<RateLimiter> limiter,
                         RetryPolicy retry)
    : resolver_(std::move(resolver)), limiter_(std::move(limiter)), retry_(retry) {}

ModelResponse LiveGateway::complete(const agents::PromptEnvelope& envelope,
                                    const agents::GenerationParams& params,
                                    const std::string& model_id) {
  const auto endpoint = resolver_(model_id);
  const auto body = chat_request_body(envelope, params, endpoint.remote_model);

  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(std::chrono::seconds(300));
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  }

  auto start = std::chrono::steady_clock::now();
  auto reply = with_retries(
      [&]() -> AttemptResult {
        if (limiter_) limiter_->acquire();
        auto res = client.Post(endpoint.path, headers, body, "application/json");
        if (!res) return {0, {}, httplib::to_string(res.error())};
        return {res->status, res->body, {}};
      },
      params.retry_limit, retry_,
      [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });

  auto response = parse_chat_response(reply, model_id);
  response.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return response;
}

}  // namespace cascade::gateway
