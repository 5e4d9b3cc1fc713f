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

#include "cascade/exec.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cascade/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cascade::exec {
namespace {

constexpr const char* kCodeFile = "candidate.py";
constexpr const char* kTestsFile = "tests.py";
constexpr const char* kReportFile = "report.json";
constexpr const char* kStdoutFile = "stdout.txt";
constexpr const char* kStderrFile = "stderr.txt";

// Owns a sandbox directory; removes it on destruction unless released.
class Sandbox {
 public:
  Sandbox() {
    auto pattern = (fs::temp_directory_path() / "cascade-sbx-XXXXXX").string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) {
      throw SandboxSetupError(fmt::format("mkdtemp failed: {}", std::strerror(errno)));
    }
    path_ = buf.data();
  }
  Sandbox(const Sandbox&) = delete;
  Sandbox& operator=(const Sandbox&) = delete;
  ~Sandbox() {
    if (keep_) return;
    std::error_code ec;
    fs::remove_all(path_, ec);
  }

  const fs::path& path() const { return path_; }
  void keep() { keep_ = true; }

 private:
  fs::path path_;
  bool keep_ = false;
};

std::string tail(std::string text, std::size_t limit) {
  if (text.size() <= limit) return text;
  return text.substr(text.size() - limit);
}

std::string read_if_exists(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return {};
  return read_file(path);
}

struct ChildExit {
  int exit_code = 0;
  bool timed_out = false;
};

ChildExit run_child(const fs::path& sandbox, const std::vector<std::string>& argv_strings,
                    double timeout_s) {
  std::vector<char*> argv;
  for (const auto& a : argv_strings) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  const std::vector<std::string> env_strings = {
      "PATH=/usr/local/bin:/usr/bin:/bin",
      "HOME=" + sandbox.string(),
      "TMPDIR=" + sandbox.string(),
      "LANG=C.UTF-8",
      "PYTHONDONTWRITEBYTECODE=1",
      "PYTHONHASHSEED=0",
  };
  std::vector<char*> envp;
  for (const auto& e : env_strings) envp.push_back(const_cast<char*>(e.c_str()));
  envp.push_back(nullptr);

  const auto dir = sandbox.string();
  const auto out_path = (sandbox / kStdoutFile).string();
  const auto err_path = (sandbox / kStderrFile).string();

  pid_t pid = fork();
  if (pid < 0) throw SandboxSetupError(fmt::format("fork failed: {}", std::strerror(errno)));
  if (pid == 0) {
    // Child: only async-signal-safe calls from here on.
    setpgid(0, 0);
    if (chdir(dir.c_str()) != 0) _exit(126);
    int in = open("/dev/null", O_RDONLY);
    int out = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int err = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (in < 0 || out < 0 || err < 0) _exit(126);
    dup2(in, STDIN_FILENO);
    dup2(out, STDOUT_FILENO);
    dup2(err, STDERR_FILENO);
    execve(argv[0], argv.data(), envp.data());
    _exit(127);
  }
  setpgid(pid, pid);  // also done in the child; whichever runs first wins

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
  ChildExit result;
  int status = 0;
  for (;;) {
    pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR) {
      throw SandboxSetupError(fmt::format("waitpid failed: {}", std::strerror(errno)));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  // Reap anything the runner left behind in its group.
  kill(-pid, SIGKILL);

  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace

std::string_view to_string(TestStatus status) {
  switch (status) {
    case TestStatus::Pass: return "Pass";
    case TestStatus::Fail: return "Fail";
    case TestStatus::Error: return "Error";
  }
  return "?";
}

std::optional<TestStatus> parse_test_status(std::string_view text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "pass") return TestStatus::Pass;
  if (lower == "fail") return TestStatus::Fail;
  if (lower == "error") return TestStatus::Error;
  return std::nullopt;
}

std::optional<std::string> ExecutionResult::synthetic_error() const {
  if (timed_out) return std::string(kTimeLimitExceeded);
  return std::nullopt;
}

bool ExecutionResult::all_passed() const {
  if (timed_out || collection_error || per_test.empty()) return false;
  for (const auto& o : per_test) {
    if (o.status != TestStatus::Pass) return false;
  }
  return true;
}

json to_json(const ExecutionResult& result) {
  json outcomes = json::array();
  for (const auto& o : result.per_test) {
    outcomes.push_back({{"group", o.group},
                        {"case", o.case_name},
                        {"status", to_string(o.status)},
                        {"exception_type", o.exception_type ? json(*o.exception_type) : json()},
                        {"traceback", o.traceback},
                        {"duration_s", o.duration_s}});
  }
  json j = {{"outcomes", outcomes},
            {"timed_out", result.timed_out},
            {"wall_time_s", result.wall_time_s},
            {"runner_exit_code", result.runner_exit_code},
            {"raw_stderr", result.raw_stderr},
            {"skipped", result.skipped}};
  j["collection_error"] = result.collection_error
                              ? json{{"exception_type", result.collection_error->exception_type},
                                     {"traceback", result.collection_error->traceback}}
                              : json();
  if (auto synthetic = result.synthetic_error()) j["synthetic_error"] = *synthetic;
  return j;
}

ExecutionResult execution_result_from_json(const json& j) {
  ExecutionResult result;
  for (const auto& o : j.at("outcomes")) {
    TestOutcome outcome;
    outcome.group = o.at("group").get<std::string>();
    outcome.case_name = o.at("case").get<std::string>();
    outcome.status = parse_test_status(o.at("status").get<std::string>()).value();
    if (!o.at("exception_type").is_null()) {
      outcome.exception_type = o["exception_type"].get<std::string>();
    }
    outcome.traceback = o.at("traceback").get<std::string>();
    outcome.duration_s = o.at("duration_s").get<double>();
    result.per_test.push_back(std::move(outcome));
  }
  if (!j.at("collection_error").is_null()) {
    result.collection_error = CollectionError{j["collection_error"].at("exception_type"),
                                              j["collection_error"].at("traceback")};
  }
  result.timed_out = j.at("timed_out").get<bool>();
  result.wall_time_s = j.at("wall_time_s").get<double>();
  result.runner_exit_code = j.at("runner_exit_code").get<int>();
  result.raw_stderr = j.at("raw_stderr").get<std::string>();
  result.skipped = j.value("skipped", std::size_t{0});
  return result;
}

std::optional<std::string> exception_from_traceback(std::string_view traceback) {
  static const std::regex name_re(R"(^([A-Za-z_][\w]*(?:\.[A-Za-z_][\w]*)*)(?::.*)?$)");
  auto lines = split_lines(traceback);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    auto line = trim(*it);
    if (line.empty()) continue;
    // Continuation lines of the exception message are indented; frames start with "File".
    if (starts_with(*it, " ") || starts_with(*it, "\t")) continue;
    std::string text(line);
    std::smatch m;
    if (std::regex_match(text, m, name_re) && m[1].str() != "Traceback") {
      return m[1].str();
    }
  }
  return std::nullopt;
}

ExecutionResult parse_runner_report(std::string_view json_text, std::string_view suite) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw RunnerProtocolError(fmt::format("runner report is not valid JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("outcomes") || !j["outcomes"].is_array()) {
    throw RunnerProtocolError("runner report lacks an outcomes array");
  }

  std::set<std::pair<std::string, std::string>> known;
  std::set<std::string> known_groups;
  if (!suite.empty()) {
    for (const auto& g : corpus::parse_test_groups(suite)) {
      known_groups.insert(g.name);
      for (const auto& c : g.cases) known.insert({g.name, c});
    }
  }

  ExecutionResult result;
  try {
    for (const auto& o : j["outcomes"]) {
      TestOutcome outcome;
      outcome.group = o.at("group").get<std::string>();
      outcome.case_name = o.at("case").get<std::string>();
      auto status = parse_test_status(o.at("status").get<std::string>());
      if (!status) {
        throw RunnerProtocolError(fmt::format("unknown status {}", o["status"].dump()));
      }
      outcome.status = *status;
      if (o.contains("exception_type") && !o["exception_type"].is_null()) {
        outcome.exception_type = o["exception_type"].get<std::string>();
      }
      if (o.contains("traceback") && !o["traceback"].is_null()) {
        outcome.traceback = o["traceback"].get<std::string>();
      }
      outcome.duration_s = o.value("duration_s", 0.0);

      if (outcome.status == TestStatus::Pass && outcome.exception_type) {
        throw RunnerProtocolError(
            fmt::format("{}.{} passed but carries an exception", outcome.group, outcome.case_name));
      }
      if (outcome.status != TestStatus::Pass) {
        if (outcome.traceback.empty()) {
          throw RunnerProtocolError(fmt::format("{}.{} failed without a traceback", outcome.group,
                                                outcome.case_name));
        }
        if (!outcome.exception_type) {
          outcome.exception_type = exception_from_traceback(outcome.traceback);
        }
      }
      if (!known.empty() && !known.count({outcome.group, outcome.case_name})) {
        throw RunnerProtocolError(fmt::format("outcome {}.{} is not in the test suite",
                                              outcome.group, outcome.case_name));
      }
      result.per_test.push_back(std::move(outcome));
    }
    if (j.contains("collection_error") && !j["collection_error"].is_null()) {
      const auto& ce = j["collection_error"];
      CollectionError error;
      if (ce.is_object()) {
        error.traceback = ce.value("traceback", "");
        if (ce.contains("exception_type") && ce["exception_type"].is_string()) {
          error.exception_type = ce["exception_type"].get<std::string>();
        } else if (auto derived = exception_from_traceback(error.traceback)) {
          error.exception_type = *derived;
        }
      } else if (ce.is_string()) {
        error.traceback = ce.get<std::string>();
        error.exception_type = exception_from_traceback(error.traceback).value_or("");
      }
      if (error.exception_type.empty()) {
        throw RunnerProtocolError("collection_error carries no exception type");
      }
      result.collection_error = std::move(error);
    }
    result.skipped = j.value("skipped", std::size_t{0});
  } catch (const json::exception& e) {
    throw RunnerProtocolError(fmt::format("malformed runner report: {}", e.what()));
  }
  return result;
}

ExecutionResult execute_tests(const ExecutionRequest& request, const RunnerHandle& runner) {
  if (!(request.timeout_s > 0.0)) throw SandboxSetupError("timeout_s must be positive");
  if (trim(request.code).empty() || trim(request.tests).empty()) {
    throw SandboxSetupError("code and tests must be non-empty");
  }
  std::error_code ec;
  auto executable = fs::absolute(runner.executable, ec);
  if (ec || !fs::is_regular_file(executable) || access(executable.c_str(), X_OK) != 0) {
    throw SandboxSetupError(fmt::format("runner {} is not executable", runner.executable.string()));
  }

  Sandbox sandbox;
  if (request.keep_sandbox) sandbox.keep();
  write_file(sandbox.path() / kCodeFile, request.code);
  write_file(sandbox.path() / kTestsFile, request.tests);

  std::vector<std::string> argv = {executable.string()};
  argv.insert(argv.end(), runner.extra_args.begin(), runner.extra_args.end());
  for (auto [flag, file] : {std::pair{"--code", kCodeFile}, std::pair{"--tests", kTestsFile},
                            std::pair{"--json", kReportFile}}) {
    argv.emplace_back(flag);
    argv.push_back((sandbox.path() / file).string());
  }

  auto start = std::chrono::steady_clock::now();
  auto child = run_child(sandbox.path(), argv, request.timeout_s);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto stderr_text = tail(read_if_exists(sandbox.path() / kStderrFile), ExecutionResult::kMaxStderrBytes);
  auto report = read_if_exists(sandbox.path() / kReportFile);
  if (request.keep_sandbox) spdlog::info("sandbox kept at {}", sandbox.path().string());

  ExecutionResult result;
  if (child.timed_out) {
    // Partial reports are kept when they parse; otherwise the timeout stands alone.
    if (!report.empty()) {
      try {
        result = parse_runner_report(report, request.tests);
      } catch (const RunnerProtocolError&) {
        result = ExecutionResult{};
      }
    }
  } else {
    if (child.exit_code != 0) {
      throw RunnerProtocolError(fmt::format("runner exited with code {}: {}", child.exit_code,
                                            tail(stderr_text, 2000)));
    }
    if (report.empty()) throw RunnerProtocolError("runner wrote no JSON report");
    result = parse_runner_report(report, request.tests);
  }
  result.timed_out = child.timed_out;
  result.wall_time_s = wall;
  result.runner_exit_code = child.exit_code;
  result.raw_stderr = std::move(stderr_text);
  return result;
}

}  // namespace cascade::exec
