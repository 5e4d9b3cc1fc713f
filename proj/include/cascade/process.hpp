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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cascade/agents.hpp"
#include "cascade/corpus.hpp"
#include "cascade/exec.hpp"
#include "cascade/gateway.hpp"

namespace cascade::process {

enum class Activity { Requirement, Design, Implementation, Testing };

enum class ProcessVariant {
  RawPrompt,
  WaterfallFull,
  WaterfallNoRequirement,
  WaterfallNoDesign,
  WaterfallNoTesting,
};

std::string_view to_string(Activity activity);
std::string_view to_string(ProcessVariant variant);
std::optional<ProcessVariant> parse_variant(std::string_view text);
const std::vector<ProcessVariant>& all_variants();
std::vector<Activity> activities(ProcessVariant variant);

struct ActivityNode {
  Activity activity = Activity::Implementation;
  agents::Role producer = agents::Role::Developer;
  std::vector<agents::TaskKind> tasks;  // production rows run by this node, in order
  /// Where the node's first prompt takes its context from, after fallbacks
  /// for removed activities are applied.
  agents::DocumentKind context_source = agents::DocumentKind::TaskDescription;
};

struct FeedbackEdge {
  agents::DocumentKind document = agents::DocumentKind::Requirement;
  std::vector<agents::Role> reviewers;
};

inline constexpr int kDefaultBugfixCap = 3;

struct ActivityGraph {
  ProcessVariant variant = ProcessVariant::WaterfallFull;
  std::vector<ActivityNode> nodes;
  std::vector<FeedbackEdge> feedback_edges;
  int bugfix_cap = kDefaultBugfixCap;
  int refinement_rounds = 1;

  bool has(Activity activity) const;
  bool has_role(agents::Role role) const;
  const FeedbackEdge* feedback_for(agents::DocumentKind kind) const;
  /// Document kinds a completed run of this graph holds, in activity order.
  std::vector<agents::DocumentKind> document_kinds() const;
};

/// Reviewers are kept only when their role owns a node in the variant, so a
/// variant without Testing has no Tester anywhere.
ActivityGraph build_pipeline(ProcessVariant variant, int refinement_rounds = 1,
                             int bugfix_cap = kDefaultBugfixCap);

enum class RunStatus { Completed, GatewayFailed, Unparseable };

std::string_view to_string(RunStatus status);
std::optional<RunStatus> parse_run_status(std::string_view text);

struct Exchange {
  std::string stage;  // e.g. "Architect/WriteDesign" or "Tester/Review:Code"
  std::string request;  // serialized envelope
  std::string response;
  std::string model_id;

  bool operator==(const Exchange&) const = default;
};

struct Intervention {
  std::string stage;
  int cycle = 0;
  std::string reason;

  bool operator==(const Intervention&) const = default;
};

struct RunRecord {
  std::string task_id;
  ProcessVariant variant = ProcessVariant::WaterfallFull;
  std::string model_id;
  std::vector<agents::ArtifactDocument> documents;
  std::vector<Exchange> transcript;
  std::string final_code;
  int bugfix_cycles_used = 0;
  RunStatus status = RunStatus::Completed;
  std::string failed_stage;
  std::string error;
  std::vector<Intervention> interventions;

  /// Latest revision of a kind, or nullptr.
  const agents::ArtifactDocument* latest(agents::DocumentKind kind) const;

  /// Header line, then one line per document, exchange and intervention.
  std::string to_jsonl() const;
  static RunRecord from_jsonl(std::string_view text);

  bool operator==(const RunRecord&) const = default;
};

/// Runs the Tester's script against the current code.
using ScriptExecutor =
    std::function<exec::ExecutionResult(const std::string& code, const std::string& script)>;

ScriptExecutor runner_executor(exec::RunnerHandle runner, double timeout_s,
                               bool keep_sandbox = false);

/// Text handed to the Tester when writing a test report. Durations are left
/// out so that replays see identical prompts.
std::string format_execution_results(const exec::ExecutionResult& result);

/// True when the failure lies in the test script itself rather than the code.
bool is_script_fault(const exec::ExecutionResult& result);

RunRecord run_pipeline(const corpus::TaskSpec& task, const ActivityGraph& graph,
                       gateway::ModelGateway& gateway, const agents::GenerationParams& params,
                       const std::string& model_id, const ScriptExecutor& executor,
                       const agents::TemplateSet& templates = agents::TemplateSet::defaults());

struct RunDescriptor {
  std::string task_id;
  ProcessVariant variant = ProcessVariant::WaterfallFull;
  std::string model_id;
  std::string run_id;

  bool operator==(const RunDescriptor&) const = default;
};

std::string make_run_id(std::string_view task_id, ProcessVariant variant,
                        std::string_view model_id);

/// Task-major, then variant, then model.
std::vector<RunDescriptor> ablation_grid(const std::vector<std::string>& models,
                                         const std::vector<ProcessVariant>& variants,
                                         const corpus::Corpus& corpus);

inline constexpr const char* kRecordFile = "record.jsonl";
inline constexpr const char* kEvalFile = "eval.json";

/// Writes runs/<run_id>/record.jsonl plus the latest documents as plain files.
std::filesystem::path save_run(const RunRecord& record, const std::filesystem::path& runs_dir);
RunRecord load_run(const std::filesystem::path& run_dir);

/// Scores final_code against the benchmark suite and writes eval.json into
/// `run_dir` when given. Runs that did not complete are not executed; their
/// eval.json carries {"evaluated": false} and nullopt is returned.
std::optional<exec::ExecutionResult> evaluate_final_code(
    const RunRecord& run, const corpus::TaskSpec& task, const exec::RunnerHandle& runner,
    double timeout_s = exec::kDefaultTimeoutSeconds,
    const std::optional<std::filesystem::path>& run_dir = std::nullopt, bool keep_sandbox = false);

/// Fixture provider: Developer rows answer with the task's ground truth,
/// the Tester's script row with the benchmark suite, every other row with a
/// short canned document. Tasks are looked up by the envelope's origin.
gateway::ScriptedGateway::Script oracle_script(const corpus::Corpus& corpus);

}  // namespace cascade::process
