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

#include <nlohmann/json.hpp>

#include "cascade/process.hpp"
#include "support.hpp"

using namespace cascade;
using namespace cascade::process;
using agents::DocumentKind;
using agents::Role;
using agents::TaskKind;
using exec::TestStatus;

namespace {

const corpus::Corpus& fixture() {
  static const auto c = testing::fixture_corpus();
  return c;
}

const corpus::TaskSpec& calculator() { return *fixture().find("ClassEval_0"); }

// Oracle provider whose code carries extra runner directives.
gateway::ScriptedGateway::Script oracle_with(std::string directive) {
  auto base = oracle_script(fixture());
  return [base, directive](const agents::PromptEnvelope& env, const agents::GenerationParams& p,
                           const std::string& m) {
    auto kind = env.origin.task_kind;
    if (kind == TaskKind::ImplementCode || kind == TaskKind::FixCode) {
      return "```python\n" + calculator().ground_truth + directive + "```\n";
    }
    return base(env, p, m);
  };
}

ScriptExecutor stub_executor() { return runner_executor({testing::stub_runner(), {}}, 10.0); }

std::vector<DocumentKind> kinds_of(const RunRecord& r) {
  std::vector<DocumentKind> out;
  for (const auto& d : r.documents) {
    if (std::find(out.begin(), out.end(), d.kind) == out.end()) out.push_back(d.kind);
  }
  return out;
}

}  // namespace

TEST_CASE("variant names and activities") {
  CHECK(all_variants().size() == 5);
  for (auto v : all_variants()) CHECK(parse_variant(to_string(v)) == v);
  CHECK(activities(ProcessVariant::RawPrompt) == std::vector<Activity>{Activity::Implementation});
  CHECK(activities(ProcessVariant::WaterfallFull).size() == 4);
  for (auto v : all_variants()) {
    auto acts = activities(v);
    CHECK(std::find(acts.begin(), acts.end(), Activity::Implementation) != acts.end());
  }
}

TEST_CASE("full waterfall graph") {
  auto g = build_pipeline(ProcessVariant::WaterfallFull);
  REQUIRE(g.nodes.size() == 4);
  CHECK(g.nodes[0].producer == Role::RequirementEngineer);
  CHECK(g.nodes[1].producer == Role::Architect);
  CHECK(g.nodes[2].producer == Role::Developer);
  CHECK(g.nodes[3].producer == Role::Tester);
  CHECK(g.bugfix_cap == 3);
  REQUIRE(g.feedback_for(DocumentKind::Requirement));
  CHECK(g.feedback_for(DocumentKind::Requirement)->reviewers ==
        std::vector<Role>{Role::Architect, Role::Tester});
  CHECK(g.feedback_for(DocumentKind::Design)->reviewers == std::vector<Role>{Role::Developer, Role::Tester});
  CHECK(g.feedback_for(DocumentKind::Code)->reviewers == std::vector<Role>{Role::Architect, Role::Tester});
  CHECK(g.feedback_for(DocumentKind::TestCases)->reviewers ==
        std::vector<Role>{Role::Architect, Role::Developer});
  CHECK(g.nodes[1].context_source == DocumentKind::Requirement);
  CHECK(g.nodes[2].context_source == DocumentKind::Design);
}

TEST_CASE("ablated graphs fall back to the nearest upstream document") {
  auto no_req = build_pipeline(ProcessVariant::WaterfallNoRequirement);
  CHECK(no_req.nodes.front().producer == Role::Architect);
  CHECK(no_req.nodes.front().context_source == DocumentKind::TaskDescription);
  CHECK_FALSE(no_req.feedback_for(DocumentKind::Requirement));

  auto no_design = build_pipeline(ProcessVariant::WaterfallNoDesign);
  CHECK(no_design.nodes[1].context_source == DocumentKind::Requirement);
  CHECK_FALSE(no_design.has_role(Role::Architect));
  CHECK(no_design.feedback_for(DocumentKind::Code)->reviewers == std::vector<Role>{Role::Tester});

  auto no_test = build_pipeline(ProcessVariant::WaterfallNoTesting);
  CHECK_FALSE(no_test.has_role(Role::Tester));
  CHECK(no_test.bugfix_cap == 0);
  CHECK(no_test.feedback_for(DocumentKind::Requirement)->reviewers == std::vector<Role>{Role::Architect});

  auto raw = build_pipeline(ProcessVariant::RawPrompt);
  CHECK(raw.nodes.size() == 1);
  CHECK(raw.feedback_edges.empty());
}

TEST_CASE("ground truth with an all-pass script completes without fixes") {
  gateway::ScriptedGateway gw(oracle_script(fixture()));
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {}, "m",
                        stub_executor());
  CHECK(r.status == RunStatus::Completed);
  CHECK(r.bugfix_cycles_used == 0);
  CHECK(r.final_code == calculator().ground_truth);
  CHECK(r.interventions.empty());
}

TEST_CASE("code that always fails its tests stops after three fixes") {
  gateway::ScriptedGateway gw(oracle_with("# stub-runner: fail\n"));
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {}, "m",
                        stub_executor());
  CHECK(r.status == RunStatus::Completed);
  CHECK(r.bugfix_cycles_used == 3);
  std::size_t fixes = 0;
  std::size_t reports = 0;
  for (const auto& e : r.transcript) {
    fixes += e.stage == "Developer/FixCode";
    reports += e.stage == "Tester/WriteTestReport";
  }
  CHECK(fixes == 3);
  CHECK(reports == 4);
}

TEST_CASE("a smaller cap is honoured") {
  gateway::ScriptedGateway gw(oracle_with("# stub-runner: fail\n"));
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull, 1, 1), gw, {},
                        "m", stub_executor());
  CHECK(r.bugfix_cycles_used == 1);
}

TEST_CASE("each variant produces exactly its document kinds") {
  const std::map<ProcessVariant, std::vector<DocumentKind>> expected = {
      {ProcessVariant::RawPrompt, {DocumentKind::Code}},
      {ProcessVariant::WaterfallFull,
       {DocumentKind::Requirement, DocumentKind::Design, DocumentKind::Code, DocumentKind::TestCases,
        DocumentKind::TestScript, DocumentKind::TestReport}},
      {ProcessVariant::WaterfallNoRequirement,
       {DocumentKind::Design, DocumentKind::Code, DocumentKind::TestCases, DocumentKind::TestScript,
        DocumentKind::TestReport}},
      {ProcessVariant::WaterfallNoDesign,
       {DocumentKind::Requirement, DocumentKind::Code, DocumentKind::TestCases,
        DocumentKind::TestScript, DocumentKind::TestReport}},
      {ProcessVariant::WaterfallNoTesting,
       {DocumentKind::Requirement, DocumentKind::Design, DocumentKind::Code}},
  };
  gateway::ScriptedGateway gw(oracle_script(fixture()));
  for (const auto& [variant, kinds] : expected) {
    CAPTURE(to_string(variant));
    auto graph = build_pipeline(variant);
    CHECK(graph.document_kinds() == kinds);
    auto r = run_pipeline(calculator(), graph, gw, {}, "m", stub_executor());
    CHECK(r.status == RunStatus::Completed);
    CHECK(kinds_of(r) == kinds);
  }
}

TEST_CASE("every exchange pairs a request with a response") {
  gateway::ScriptedGateway gw(oracle_script(fixture()));
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {}, "m",
                        stub_executor());
  REQUIRE_FALSE(r.transcript.empty());
  for (const auto& e : r.transcript) {
    CHECK_FALSE(e.request.empty());
    CHECK_FALSE(e.response.empty());
    CHECK_FALSE(e.stage.empty());
  }
  // Four refined documents at four calls each, then the script and one report.
  CHECK(r.transcript.size() == 4 * 4 + 1 + 1);
}

TEST_CASE("a provider outage at design leaves only the requirement") {
  auto base = oracle_script(fixture());
  gateway::ScriptedGateway gw([base](const agents::PromptEnvelope& env,
                                     const agents::GenerationParams& p, const std::string& m) {
    if (env.origin.task_kind == TaskKind::WriteDesign) throw gateway::GatewayError("down");
    return base(env, p, m);
  });
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {}, "m",
                        stub_executor());
  CHECK(r.status == RunStatus::GatewayFailed);
  CHECK(r.failed_stage == "Architect/WriteDesign");
  CHECK(kinds_of(r) == std::vector<DocumentKind>{DocumentKind::Requirement});
  CHECK(r.final_code.empty());
}

TEST_CASE("prose instead of code is Unparseable") {
  gateway::ScriptedGateway gw([](const agents::PromptEnvelope&, const agents::GenerationParams&,
                                 const std::string&) { return std::string("I refuse."); });
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::RawPrompt), gw, {}, "m", {});
  CHECK(r.status == RunStatus::Unparseable);
  CHECK(r.failed_stage == "Developer/ImplementCode");
}

TEST_CASE("a broken test script is regenerated and logged") {
  int calls = 0;
  ScriptExecutor executor = [&](const std::string&, const std::string&) {
    exec::ExecutionResult r;
    if (calls++ == 0) {
      r.collection_error = exec::CollectionError{
          "SyntaxError", "Traceback (most recent call last):\n  File \"tests.py\", line 3\nSyntaxError: bad"};
    } else {
      r.per_test.push_back(testing::outcome("CalculatorTestAdd", "test_add_1", TestStatus::Pass));
    }
    return r;
  };
  gateway::ScriptedGateway gw(oracle_script(fixture()));
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {}, "m",
                        executor);
  CHECK(r.status == RunStatus::Completed);
  CHECK(calls == 2);
  REQUIRE(r.interventions.size() == 1);
  CHECK(r.interventions[0].reason.find("SyntaxError") != std::string::npos);
  CHECK(r.bugfix_cycles_used == 0);
}

TEST_CASE("testing variants need an executor") {
  gateway::ScriptedGateway gw(oracle_script(fixture()));
  CHECK_THROWS_AS(run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {},
                               "m", {}),
                  Error);
}

TEST_CASE("script faults are told apart from code faults") {
  exec::ExecutionResult r;
  r.collection_error = exec::CollectionError{"ImportError", "File \"candidate.py\", line 1"};
  CHECK_FALSE(is_script_fault(r));
  r.collection_error->traceback = "File \"/tmp/x/tests.py\", line 1";
  CHECK(is_script_fault(r));
}

TEST_CASE("execution results text omits durations") {
  exec::ExecutionResult r;
  r.per_test.push_back(testing::outcome("G", "a", TestStatus::Pass));
  r.per_test.push_back(testing::outcome("G", "b", TestStatus::Fail, "AssertionError"));
  r.per_test[0].duration_s = 1.234;
  auto text = format_execution_results(r);
  CHECK(text.find("1 of 2 test cases passed.") != std::string::npos);
  CHECK(text.find("1.234") == std::string::npos);
  r.per_test[0].duration_s = 9.0;
  CHECK(format_execution_results(r) == text);
}

TEST_CASE("grid is task-major and stable") {
  corpus::Corpus two = fixture();
  auto grid = ablation_grid({"m1", "m2"}, all_variants(), two);
  REQUIRE(grid.size() == 20);
  CHECK(grid == ablation_grid({"m1", "m2"}, all_variants(), two));
  CHECK(grid[0].task_id == "ClassEval_0");
  CHECK(grid[0].variant == ProcessVariant::RawPrompt);
  CHECK(grid[0].model_id == "m1");
  CHECK(grid[1].model_id == "m2");
  CHECK(grid[2].variant == ProcessVariant::WaterfallFull);
  CHECK(grid[10].task_id == "ClassEval_1");
  CHECK(grid[0].run_id == "ClassEval_0__RawPrompt__m1");
  CHECK_THROWS_AS(ablation_grid({}, all_variants(), two), DomainError);
}

TEST_CASE("run ids are filesystem safe") {
  auto id = make_run_id("a/b", ProcessVariant::WaterfallFull, "claude 3.5:haiku");
  CHECK(id.find('/') == std::string::npos);
  CHECK(id.find(' ') == std::string::npos);
}

TEST_CASE("records round-trip and are write-once when completed") {
  testing::TempDir dir;
  gateway::ScriptedGateway gw(oracle_script(fixture()));
  auto r = run_pipeline(calculator(), build_pipeline(ProcessVariant::WaterfallFull), gw, {}, "m",
                        stub_executor());
  CHECK(RunRecord::from_jsonl(r.to_jsonl()) == r);
  auto run_dir = save_run(r, dir.path());
  CHECK(std::filesystem::exists(run_dir / "code.py"));
  CHECK(std::filesystem::exists(run_dir / "testreport.md"));
  CHECK(load_run(run_dir) == r);
  CHECK_THROWS_AS(save_run(r, dir.path()), Error);
}

TEST_CASE("failed records may be replaced") {
  testing::TempDir dir;
  RunRecord failed;
  failed.task_id = "ClassEval_0";
  failed.model_id = "m";
  failed.status = RunStatus::GatewayFailed;
  failed.documents.push_back({DocumentKind::Requirement, "req", 0, Role::RequirementEngineer});
  save_run(failed, dir.path());
  RunRecord done = failed;
  done.status = RunStatus::Completed;
  done.documents = {{DocumentKind::Code, "class A:\n    pass\n", 0, Role::Developer}};
  done.final_code = "class A:\n    pass\n";
  auto run_dir = save_run(done, dir.path());
  CHECK(load_run(run_dir).status == RunStatus::Completed);
  CHECK_FALSE(std::filesystem::exists(run_dir / "requirement.md"));
}

TEST_CASE("final code evaluation") {
  testing::TempDir dir;
  exec::RunnerHandle runner{testing::stub_runner(), {}};
  RunRecord run;
  run.task_id = calculator().task_id;
  run.final_code = calculator().ground_truth;
  auto result = evaluate_final_code(run, calculator(), runner, 10.0, dir.path());
  REQUIRE(result);
  CHECK(result->all_passed());
  auto eval = nlohmann::json::parse(read_file(dir / kEvalFile));
  CHECK(eval["evaluated"] == true);

  run.status = RunStatus::GatewayFailed;
  CHECK_FALSE(evaluate_final_code(run, calculator(), runner, 10.0, dir.path()));
  eval = nlohmann::json::parse(read_file(dir / kEvalFile));
  CHECK(eval["evaluated"] == false);
  CHECK(eval["marker"] == "not-evaluated");
}
