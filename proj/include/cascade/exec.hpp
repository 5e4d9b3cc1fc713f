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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cascade/common.hpp"

namespace cascade::exec {

/// Synthetic error type attached to runs killed at the wall-clock limit.
inline constexpr const char* kTimeLimitExceeded = "Time Limit Exceeded";
inline constexpr double kDefaultTimeoutSeconds = 480.0;
inline constexpr double kKillGraceSeconds = 5.0;

enum class TestStatus { Pass, Fail, Error };

std::string_view to_string(TestStatus status);
std::optional<TestStatus> parse_test_status(std::string_view text);

struct TestOutcome {
  std::string group;
  std::string case_name;
  TestStatus status = TestStatus::Pass;
  std::optional<std::string> exception_type;
  std::string traceback;
  double duration_s = 0.0;

  bool operator==(const TestOutcome&) const = default;
};

struct CollectionError {
  std::string exception_type;
  std::string traceback;

  bool operator==(const CollectionError&) const = default;
};

struct ExecutionResult {
  std::vector<TestOutcome> per_test;
  std::optional<CollectionError> collection_error;
  bool timed_out = false;
  double wall_time_s = 0.0;
  int runner_exit_code = 0;
  std::string raw_stderr;  // tail, at most kMaxStderrBytes
  std::size_t skipped = 0;

  static constexpr std::size_t kMaxStderrBytes = 64 * 1024;

  /// "Time Limit Exceeded" when timed out.
  std::optional<std::string> synthetic_error() const;
  /// At least one outcome, all of them Pass, no collection error, no timeout.
  bool all_passed() const;

  bool operator==(const ExecutionResult&) const = default;
};

nlohmann::json to_json(const ExecutionResult& result);
ExecutionResult execution_result_from_json(const nlohmann::json& j);

class RunnerProtocolError : public Error {
 public:
  using Error::Error;
};

class SandboxSetupError : public Error {
 public:
  using Error::Error;
};

struct ExecutionRequest {
  std::string code;
  std::string tests;
  double timeout_s = kDefaultTimeoutSeconds;
  bool keep_sandbox = false;
};

/// A runner executable speaking the runner protocol:
///   <runner> --code <file> --tests <file> --json <out>
struct RunnerHandle {
  std::filesystem::path executable;
  std::vector<std::string> extra_args;  // inserted before --code
};

/// Qualified exception class name from the last line of a traceback, e.g.
/// "sqlite3.OperationalError: no such table" -> "sqlite3.OperationalError".
std::optional<std::string> exception_from_traceback(std::string_view traceback);

/// Parses a runner's JSON report. When `suite` is non-empty, outcomes naming a
/// group or case absent from it are rejected.
ExecutionResult parse_runner_report(std::string_view json_text, std::string_view suite = {});

/// Writes code and tests into a fresh temporary directory, runs the runner in
/// its own process group with a scrubbed environment, and kills the whole
/// group at the deadline.
ExecutionResult execute_tests(const ExecutionRequest& request, const RunnerHandle& runner);

}  // namespace cascade::exec
