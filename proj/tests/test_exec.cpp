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

#include <chrono>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "cascade/exec.hpp"
#include "support.hpp"

using namespace cascade;
using namespace cascade::exec;
namespace fs = std::filesystem;

namespace {

const corpus::TaskSpec& calculator() {
  static const auto corpus = testing::fixture_corpus();
  return *corpus.find("ClassEval_0");
}

ExecutionResult run_stub(const std::string& directives, double timeout_s = 10.0) {
  ExecutionRequest req;
  req.code = calculator().ground_truth + directives;
  req.tests = calculator().test_suite;
  req.timeout_s = timeout_s;
  return execute_tests(req, {testing::stub_runner(), {}});
}

// Points temp_directory_path() at a scratch directory for the test's duration.
class ScopedTmpdir {
 public:
  explicit ScopedTmpdir(const fs::path& dir) {
    if (const char* old = std::getenv("TMPDIR")) old_ = old;
    setenv("TMPDIR", dir.c_str(), 1);
  }
  ~ScopedTmpdir() {
    if (old_) {
      setenv("TMPDIR", old_->c_str(), 1);
    } else {
      unsetenv("TMPDIR");
    }
  }

 private:
  std::optional<std::string> old_;
};

}  // namespace

TEST_CASE("stub outcomes round-trip through the runner protocol") {
  auto r = run_stub("");
  CHECK_FALSE(r.timed_out);
  CHECK(r.runner_exit_code == 0);
  CHECK_FALSE(r.collection_error);
  REQUIRE(r.per_test.size() == calculator().test_count());
  for (const auto& o : r.per_test) CHECK(o.status == TestStatus::Pass);
  CHECK(r.all_passed());
  CHECK(r.per_test[0].group == "CalculatorTestAdd");
  CHECK(r.per_test[0].case_name == "test_add_1");
}

TEST_CASE("a single failing case comes back as exactly that Fail outcome") {
  auto r = run_stub("# stub-runner: case-fail test_divide_1 AssertionError\n");
  std::size_t failures = 0;
  for (const auto& o : r.per_test) {
    if (o.status == TestStatus::Pass) continue;
    ++failures;
    CHECK(o.case_name == "test_divide_1");
    CHECK(o.status == TestStatus::Fail);
    CHECK(o.exception_type == "AssertionError");
    CHECK(o.traceback.find("AssertionError") != std::string::npos);
  }
  CHECK(failures == 1);
  CHECK_FALSE(r.all_passed());
}

TEST_CASE("errors keep their exception type") {
  auto r = run_stub("# stub-runner: case-fail test_divide_2 ZeroDivisionError\n");
  bool seen = false;
  for (const auto& o : r.per_test) {
    if (o.case_name != "test_divide_2") continue;
    seen = true;
    CHECK(o.status == TestStatus::Error);
    CHECK(o.exception_type == "ZeroDivisionError");
  }
  CHECK(seen);
}

TEST_CASE("collection errors produce no outcomes") {
  auto r = run_stub("# stub-runner: collection SyntaxError tests.py\n");
  CHECK(r.per_test.empty());
  REQUIRE(r.collection_error);
  CHECK(r.collection_error->exception_type == "SyntaxError");
  CHECK_FALSE(r.all_passed());
}

TEST_CASE("a runner sleeping past the limit is killed and tagged") {
  auto start = std::chrono::steady_clock::now();
  auto r = run_stub("# stub-runner: sleep 30\n", 1.0);
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(r.timed_out);
  CHECK(r.synthetic_error() == std::string(kTimeLimitExceeded));
  CHECK(std::string(kTimeLimitExceeded) == "Time Limit Exceeded");
  CHECK(elapsed < 1.0 + kKillGraceSeconds);
  CHECK_FALSE(r.all_passed());
}

TEST_CASE("the whole process group dies on timeout") {
  auto start = std::chrono::steady_clock::now();
  auto r = run_stub("# stub-runner: fork-sleep 30\n", 1.0);
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(r.timed_out);
  CHECK(elapsed < 1.0 + kKillGraceSeconds);
}

TEST_CASE("protocol violations raise RunnerProtocolError") {
  CHECK_THROWS_AS(run_stub("# stub-runner: garbage\n"), RunnerProtocolError);
  try {
    run_stub("# stub-runner: crash\n");
    FAIL("expected RunnerProtocolError");
  } catch (const RunnerProtocolError& e) {
    CHECK(std::string(e.what()).find("code 3") != std::string::npos);
  }
}

TEST_CASE("bad requests fail before anything runs") {
  ExecutionRequest req{"class A:\n    pass\n", "x", 0.0, false};
  CHECK_THROWS_AS(execute_tests(req, {testing::stub_runner(), {}}), SandboxSetupError);
  req.timeout_s = 1.0;
  CHECK_THROWS_AS(execute_tests(req, {testing::fixtures() / "nope.sh", {}}), SandboxSetupError);
  req.code = "  ";
  CHECK_THROWS_AS(execute_tests(req, {testing::stub_runner(), {}}), SandboxSetupError);
}

TEST_CASE("sandboxes are removed unless kept") {
  testing::TempDir scratch;
  ScopedTmpdir guard(scratch.path());
  ExecutionRequest req{calculator().ground_truth, calculator().test_suite, 10.0, false};
  execute_tests(req, {testing::stub_runner(), {}});
  CHECK(fs::is_empty(scratch.path()));
  req.keep_sandbox = true;
  execute_tests(req, {testing::stub_runner(), {}});
  std::size_t kept = 0;
  for (const auto& e : fs::directory_iterator(scratch.path())) {
    ++kept;
    CHECK(fs::exists(e.path() / "candidate.py"));
  }
  CHECK(kept == 1);
}

TEST_CASE("sequential runs are outcome-identical") {
  auto a = run_stub("# stub-runner: case-fail test_add_2 KeyError\n");
  auto b = run_stub("# stub-runner: case-fail test_add_2 KeyError\n");
  REQUIRE(a.per_test.size() == b.per_test.size());
  for (std::size_t i = 0; i < a.per_test.size(); ++i) {
    CHECK(a.per_test[i].status == b.per_test[i].status);
    CHECK(a.per_test[i].exception_type == b.per_test[i].exception_type);
  }
}

TEST_CASE("report validation") {
  const std::string suite = calculator().test_suite;
  CHECK_THROWS_AS(parse_runner_report("[]"), RunnerProtocolError);
  CHECK_THROWS_AS(parse_runner_report(R"({"outcomes":[{"group":"G","case":"c","status":"odd"}]})"),
                  RunnerProtocolError);
  CHECK_THROWS_AS(
      parse_runner_report(
          R"({"outcomes":[{"group":"G","case":"c","status":"pass","exception_type":"ValueError"}]})"),
      RunnerProtocolError);
  CHECK_THROWS_AS(parse_runner_report(R"({"outcomes":[{"group":"G","case":"c","status":"fail"}]})"),
                  RunnerProtocolError);
  CHECK_THROWS_AS(parse_runner_report(R"({"outcomes":[{"group":"G","case":"c","status":"pass"}]})",
                                      suite),
                  RunnerProtocolError);

  auto r = parse_runner_report(
      R"({"outcomes":[{"group":"G","case":"c","status":"ERROR",
          "traceback":"Traceback (most recent call last):\n  File \"x.py\"\nmod.CustomError: boom\n  detail"}],
          "collection_error":"Traceback (most recent call last):\nImportError: no module"})");
  REQUIRE(r.per_test.size() == 1);
  CHECK(r.per_test[0].status == TestStatus::Error);
  CHECK(r.per_test[0].exception_type == "mod.CustomError");
  REQUIRE(r.collection_error);
  CHECK(r.collection_error->exception_type == "ImportError");
}

TEST_CASE("exception names come from the last unindented line") {
  CHECK(exception_from_traceback("Traceback (most recent call last):\n  File \"a\"\nKeyError: 'x'") ==
        "KeyError");
  CHECK(exception_from_traceback("Traceback (most recent call last):\nStopIteration") ==
        "StopIteration");
  CHECK_FALSE(exception_from_traceback("Traceback (most recent call last):"));
  CHECK_FALSE(exception_from_traceback(""));
}

TEST_CASE("results serialize and parse back") {
  ExecutionResult r;
  r.per_test.push_back(testing::outcome("G", "c1", TestStatus::Pass));
  r.per_test.push_back(testing::outcome("G", "c2", TestStatus::Fail, "AssertionError"));
  r.collection_error = CollectionError{"SyntaxError", "tb"};
  r.timed_out = true;
  r.wall_time_s = 2.5;
  r.runner_exit_code = 137;
  r.raw_stderr = "oops";
  auto j = to_json(r);
  CHECK(j["synthetic_error"] == "Time Limit Exceeded");
  auto back = execution_result_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.per_test[1].exception_type == "AssertionError");
}

TEST_CASE("class correctness needs every outcome, no timeout, no collection error") {
  ExecutionResult r;
  for (int i = 0; i < 32; ++i) r.per_test.push_back(testing::outcome("G", "c" + std::to_string(i), TestStatus::Pass));
  CHECK(r.all_passed());
  r.timed_out = true;
  CHECK_FALSE(r.all_passed());
  r.timed_out = false;
  r.per_test.push_back(testing::outcome("G", "bad", TestStatus::Fail, "AssertionError"));
  CHECK_FALSE(r.all_passed());
  ExecutionResult empty;
  CHECK_FALSE(empty.all_passed());
}
