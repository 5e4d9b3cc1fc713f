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

#include <doctest.h>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "cascade/gateway.hpp"
#include "support.hpp"

using namespace cascade;
using namespace cascade::gateway;
using agents::PromptEnvelope;

namespace {

PromptEnvelope envelope(std::string context) {
  PromptEnvelope env{"You are a Developer delegated for x", "According to the Context, do it", "",
                     std::move(context), "Follow the instructions.", {}};
  return env;
}

std::shared_ptr<ScriptedGateway> echo_gateway() {
  return std::make_shared<ScriptedGateway>(
      [](const PromptEnvelope& env, const agents::GenerationParams&, const std::string& model) {
        return model + ":" + env.context_text;
      });
}

}  // namespace

TEST_CASE("provider names round-trip") {
  for (auto p : {Provider::Live, Provider::Replay, Provider::Scripted}) {
    CHECK(parse_provider(to_string(p)) == p);
  }
  CHECK_FALSE(parse_provider("openai"));
}

TEST_CASE("fingerprint ignores routing origin and depends on every input") {
  agents::GenerationParams params;
  auto a = envelope("ctx");
  auto b = a;
  b.origin.task_id = "other";
  b.origin.role = agents::Role::Tester;
  CHECK(request_fingerprint(a, params, "m") == request_fingerprint(b, params, "m"));
  CHECK(request_fingerprint(a, params, "m") != request_fingerprint(a, params, "n"));
  CHECK(request_fingerprint(a, params, "m") != request_fingerprint(envelope("ctx2"), params, "m"));
  auto hot = params;
  hot.temperature = 0.2;
  CHECK(request_fingerprint(a, params, "m") != request_fingerprint(a, hot, "m"));
}

TEST_CASE("scripted provider answers through its script") {
  auto gw = echo_gateway();
  auto r = gw->complete(envelope("hello"), {}, "m1");
  CHECK(r.text == "m1:hello");
  CHECK(r.provider == Provider::Scripted);
  CHECK(r.model_id == "m1");
}

TEST_CASE("record seven exchanges, save, load, replay") {
  testing::TempDir dir;
  auto cassette = std::make_shared<Cassette>("m1", "2026-01-01T00:00:00Z");
  RecordingGateway rec(echo_gateway(), cassette);
  for (int i = 0; i < 7; ++i) rec.complete(envelope("c" + std::to_string(i)), {}, "m1");
  CHECK(cassette->size() == 7);
  cassette->save(dir / "c.jsonl");

  auto loaded = std::make_shared<Cassette>(Cassette::load(dir / "c.jsonl"));
  REQUIRE(loaded->size() == 7);
  auto before = cassette->entries();
  auto after = loaded->entries();
  for (std::size_t i = 0; i < 7; ++i) CHECK(before[i].fingerprint == after[i].fingerprint);
  CHECK(loaded->serialize() == cassette->serialize());

  ReplayGateway replay(loaded);
  auto r = replay.complete(envelope("c3"), {}, "m1");
  CHECK(r.text == "m1:c3");
  CHECK(r.provider == Provider::Replay);
  CHECK_THROWS_AS(replay.complete(envelope("never"), {}, "m1"), CassetteMiss);
}

TEST_CASE("identical requests share one entry with a hit count") {
  auto cassette = std::make_shared<Cassette>();
  RecordingGateway rec(echo_gateway(), cassette);
  rec.complete(envelope("same"), {}, "m");
  rec.complete(envelope("same"), {}, "m");
  REQUIRE(cassette->size() == 1);
  CHECK(cassette->entries()[0].hits == 2);
}

TEST_CASE("damaged cassettes are rejected") {
  auto cassette = std::make_shared<Cassette>("m");
  RecordingGateway rec(echo_gateway(), cassette);
  rec.complete(envelope("a"), {}, "m");
  rec.complete(envelope("b"), {}, "m");
  auto text = cassette->serialize();

  CHECK_THROWS_AS(Cassette::parse(text.substr(0, text.size() / 2)), CorruptCassette);
  auto tampered = text;
  tampered.replace(tampered.find("m:a"), 3, "m:z");
  CHECK_THROWS_AS(Cassette::parse(tampered), CorruptCassette);
  CHECK_THROWS_AS(Cassette::parse(""), CorruptCassette);
}

TEST_CASE("failed calls are not recorded") {
  auto cassette = std::make_shared<Cassette>();
  auto failing = std::make_shared<ScriptedGateway>(
      [](const PromptEnvelope&, const agents::GenerationParams&, const std::string&) -> std::string {
        throw GatewayError("provider down");
      });
  RecordingGateway rec(failing, cassette);
  CHECK_THROWS_AS(rec.complete(envelope("x"), {}, "m"), GatewayError);
  CHECK(cassette->size() == 0);
}

TEST_CASE("retries back off exponentially on transient failures") {
  std::vector<long long> sleeps;
  int calls = 0;
  auto body = with_retries(
      [&]() -> AttemptResult {
        ++calls;
        if (calls < 3) return {503, "busy", ""};
        return {200, "ok", ""};
      },
      3, RetryPolicy{std::chrono::milliseconds(100), 2.0},
      [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
  CHECK(body == "ok");
  CHECK(calls == 3);
  CHECK(sleeps == std::vector<long long>{100, 200});
}

TEST_CASE("retries stop on client errors and after the limit") {
  int calls = 0;
  auto no_sleep = [](std::chrono::milliseconds) {};
  CHECK_THROWS_AS(with_retries([&]() -> AttemptResult { ++calls; return {400, "bad", ""}; }, 3, {},
                               no_sleep),
                  GatewayError);
  CHECK(calls == 1);
  calls = 0;
  CHECK_THROWS_AS(with_retries([&]() -> AttemptResult { ++calls; return {0, "", "refused"}; }, 3, {},
                               no_sleep),
                  GatewayError);
  CHECK(calls == 4);
}

TEST_CASE("chat request and response bodies") {
  agents::GenerationParams params;
  params.seed = 7;
  auto env = envelope("ctx");
  auto body = nlohmann::json::parse(chat_request_body(env, params, "gpt-x"));
  CHECK(body["model"] == "gpt-x");
  CHECK(body["temperature"] == 0.8);
  CHECK(body["seed"] == 7);
  CHECK(body["messages"][0]["content"] == env.role_text);
  CHECK(body["messages"][1]["content"] == env.serialize());

  auto r = parse_chat_response(
      R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})",
      "m");
  CHECK(r.text == "hi");
  REQUIRE(r.token_usage);
  CHECK(r.token_usage->output_tokens == 1);
  CHECK_THROWS_AS(parse_chat_response(R"({"choices":[]})", "m"), GatewayError);
  CHECK_THROWS_AS(parse_chat_response("not json", "m"), GatewayError);
}

TEST_CASE("endpoints come from the environment") {
  setenv("CASCADE_GPT_4O_MINI_BASE_URL", "http://127.0.0.1:9", 1);
  setenv("CASCADE_GPT_4O_MINI_API_KEY", "k", 1);
  auto ep = endpoint_from_env("gpt-4o-mini");
  CHECK(ep.base_url == "http://127.0.0.1:9");
  CHECK(ep.api_key == "k");
  CHECK(ep.remote_model == "gpt-4o-mini");
  unsetenv("CASCADE_GPT_4O_MINI_BASE_URL");
  unsetenv("CASCADE_GPT_4O_MINI_API_KEY");
  unsetenv("CASCADE_BASE_URL");
  CHECK_THROWS_AS(endpoint_from_env("gpt-4o-mini"), GatewayError);
}
