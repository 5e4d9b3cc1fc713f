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

#include "cascade/process.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cascade::process {

using agents::ArtifactDocument;
using agents::DocumentKind;
using agents::Role;
using agents::TaskKind;

std::string_view to_string(Activity activity) {
  switch (activity) {
    case Activity::Requirement: return "Requirement";
    case Activity::Design: return "Design";
    case Activity::Implementation: return "Implementation";
    case Activity::Testing: return "Testing";
  }
  return "?";
}

std::string_view to_string(ProcessVariant variant) {
  switch (variant) {
    case ProcessVariant::RawPrompt: return "RawPrompt";
    case ProcessVariant::WaterfallFull: return "WaterfallFull";
    case ProcessVariant::WaterfallNoRequirement: return "WaterfallNoRequirement";
    case ProcessVariant::WaterfallNoDesign: return "WaterfallNoDesign";
    case ProcessVariant::WaterfallNoTesting: return "WaterfallNoTesting";
  }
  return "?";
}

const std::vector<ProcessVariant>& all_variants() {
  static const std::vector<ProcessVariant> variants = {
      ProcessVariant::RawPrompt, ProcessVariant::WaterfallFull,
      ProcessVariant::WaterfallNoRequirement, ProcessVariant::WaterfallNoDesign,
      ProcessVariant::WaterfallNoTesting};
  return variants;
}

std::optional<ProcessVariant> parse_variant(std::string_view text) {
  for (auto v : all_variants()) {
    if (to_string(v) == text) return v;
  }
  return std::nullopt;
}

std::vector<Activity> activities(ProcessVariant variant) {
  std::vector<Activity> full = {Activity::Requirement, Activity::Design, Activity::Implementation,
                                Activity::Testing};
  auto without = [&](Activity a) {
    full.erase(std::remove(full.begin(), full.end(), a), full.end());
    return full;
  };
  switch (variant) {
    case ProcessVariant::RawPrompt: return {Activity::Implementation};
    case ProcessVariant::WaterfallFull: return full;
    case ProcessVariant::WaterfallNoRequirement: return without(Activity::Requirement);
    case ProcessVariant::WaterfallNoDesign: return without(Activity::Design);
    case ProcessVariant::WaterfallNoTesting: return without(Activity::Testing);
  }
  return full;
}

bool ActivityGraph::has(Activity activity) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [&](const ActivityNode& n) { return n.activity == activity; });
}

bool ActivityGraph::has_role(Role role) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [&](const ActivityNode& n) { return n.producer == role; });
}

const FeedbackEdge* ActivityGraph::feedback_for(DocumentKind kind) const {
  for (const auto& e : feedback_edges) {
    if (e.document == kind) return &e;
  }
  return nullptr;
}

std::vector<DocumentKind> ActivityGraph::document_kinds() const {
  std::vector<DocumentKind> kinds;
  for (const auto& node : nodes) {
    for (auto task : node.tasks) {
      if (task == TaskKind::FixCode) continue;  // revises the Code Document
      kinds.push_back(agents::output_kind(task));
    }
  }
  return kinds;
}

ActivityGraph build_pipeline(ProcessVariant variant, int refinement_rounds, int bugfix_cap) {
  if (refinement_rounds < 0 || bugfix_cap < 0) {
    throw DomainError("refinement rounds and bug-fix cap must be non-negative");
  }
  ActivityGraph graph;
  graph.variant = variant;
  graph.refinement_rounds = refinement_rounds;

  std::optional<DocumentKind> upstream;
  for (auto activity : activities(variant)) {
    ActivityNode node;
    node.activity = activity;
    node.context_source = upstream.value_or(DocumentKind::TaskDescription);
    switch (activity) {
      case Activity::Requirement:
        node.producer = Role::RequirementEngineer;
        node.tasks = {TaskKind::WriteRequirements};
        upstream = DocumentKind::Requirement;
        break;
      case Activity::Design:
        node.producer = Role::Architect;
        node.tasks = {TaskKind::WriteDesign};
        upstream = DocumentKind::Design;
        break;
      case Activity::Implementation:
        node.producer = Role::Developer;
        node.tasks = {TaskKind::ImplementCode};
        upstream = DocumentKind::Code;
        break;
      case Activity::Testing:
        node.producer = Role::Tester;
        node.tasks = {TaskKind::DesignTests, TaskKind::WriteTestScript, TaskKind::WriteTestReport,
                      TaskKind::FixCode};
        // Test cases are derived from the task itself, not the code.
        node.context_source = DocumentKind::TaskDescription;
        break;
    }
    graph.nodes.push_back(std::move(node));
  }

  if (variant != ProcessVariant::RawPrompt) {
    for (const auto& node : graph.nodes) {
      auto kind = agents::output_kind(node.tasks.front());
      FeedbackEdge edge{kind, {}};
      for (auto reviewer : agents::reviewers_for(kind)) {
        if (graph.has_role(reviewer)) edge.reviewers.push_back(reviewer);
      }
      if (!edge.reviewers.empty()) graph.feedback_edges.push_back(std::move(edge));
    }
  }
  graph.bugfix_cap = graph.has(Activity::Testing) ? bugfix_cap : 0;
  return graph;
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "Completed";
    case RunStatus::GatewayFailed: return "GatewayFailed";
    case RunStatus::Unparseable: return "Unparseable";
  }
  return "?";
}

std::optional<RunStatus> parse_run_status(std::string_view text) {
  for (auto s : {RunStatus::Completed, RunStatus::GatewayFailed, RunStatus::Unparseable}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

const ArtifactDocument* RunRecord::latest(DocumentKind kind) const {
  for (auto it = documents.rbegin(); it != documents.rend(); ++it) {
    if (it->kind == kind) return &*it;
  }
  return nullptr;
}

std::string RunRecord::to_jsonl() const {
  std::string out;
  auto line = [&](const json& j) {
    out += j.dump();
    out += '\n';
  };
  line({{"type", "run"},
        {"task_id", task_id},
        {"variant", to_string(variant)},
        {"model_id", model_id},
        {"status", to_string(status)},
        {"bugfix_cycles_used", bugfix_cycles_used},
        {"failed_stage", failed_stage},
        {"error", error},
        {"final_code", final_code}});
  for (const auto& d : documents) {
    line({{"type", "document"},
          {"kind", agents::to_string(d.kind)},
          {"revision", d.revision},
          {"author", d.author ? json(agents::to_string(*d.author)) : json()},
          {"content", d.content}});
  }
  for (const auto& e : transcript) {
    line({{"type", "exchange"},
          {"stage", e.stage},
          {"model_id", e.model_id},
          {"request", e.request},
          {"response", e.response}});
  }
  for (const auto& i : interventions) {
    line({{"type", "intervention"}, {"stage", i.stage}, {"cycle", i.cycle}, {"reason", i.reason}});
  }
  return out;
}

RunRecord RunRecord::from_jsonl(std::string_view text) {
  RunRecord record;
  bool header = false;
  std::size_t line_no = 0;
  for (auto raw : split_lines(text)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    try {
      auto j = json::parse(raw);
      const auto type = j.at("type").get<std::string>();
      if (type == "run") {
        record.task_id = j.at("task_id");
        record.variant = parse_variant(j.at("variant").get<std::string>()).value();
        record.model_id = j.at("model_id");
        record.status = parse_run_status(j.at("status").get<std::string>()).value();
        record.bugfix_cycles_used = j.at("bugfix_cycles_used");
        record.failed_stage = j.at("failed_stage");
        record.error = j.at("error");
        record.final_code = j.at("final_code");
        header = true;
      } else if (type == "document") {
        ArtifactDocument d;
        d.kind = agents::parse_document_kind(j.at("kind").get<std::string>()).value();
        d.revision = j.at("revision");
        if (!j.at("author").is_null()) {
          d.author = agents::parse_role(j["author"].get<std::string>()).value();
        }
        d.content = j.at("content");
        record.documents.push_back(std::move(d));
      } else if (type == "exchange") {
        record.transcript.push_back(
            {j.at("stage"), j.at("request"), j.at("response"), j.at("model_id")});
      } else if (type == "intervention") {
        record.interventions.push_back({j.at("stage"), j.at("cycle"), j.at("reason")});
      } else {
        throw Error(fmt::format("unknown record type '{}'", type));
      }
    } catch (const json::exception& e) {
      throw Error(fmt::format("run record line {}: {}", line_no, e.what()));
    } catch (const std::bad_optional_access&) {
      throw Error(fmt::format("run record line {}: unknown enum value", line_no));
    }
  }
  if (!header) throw Error("run record has no header line");
  return record;
}

ScriptExecutor runner_executor(exec::RunnerHandle runner, double timeout_s, bool keep_sandbox) {
  return [runner = std::move(runner), timeout_s, keep_sandbox](const std::string& code,
                                                               const std::string& script) {
    exec::ExecutionRequest req;
    req.code = code;
    req.tests = script;
    req.timeout_s = timeout_s;
    req.keep_sandbox = keep_sandbox;
    return exec::execute_tests(req, runner);
  };
}

std::string format_execution_results(const exec::ExecutionResult& result) {
  std::string out;
  std::size_t passed = 0;
  for (const auto& o : result.per_test) passed += o.status == exec::TestStatus::Pass;
  out += fmt::format("{} of {} test cases passed.\n", passed, result.per_test.size());
  if (result.timed_out) out += fmt::format("{}\n", exec::kTimeLimitExceeded);
  if (result.collection_error) {
    out += fmt::format("The tests could not be loaded: {}\n{}\n",
                       result.collection_error->exception_type, result.collection_error->traceback);
  }
  for (const auto& o : result.per_test) {
    out += fmt::format("- {}.{}: {}", o.group, o.case_name, exec::to_string(o.status));
    if (o.exception_type) out += fmt::format(" ({})", *o.exception_type);
    out += '\n';
    if (o.status != exec::TestStatus::Pass && !o.traceback.empty()) {
      out += fmt::format("{}\n", trim(o.traceback));
    }
  }
  return out;
}

bool is_script_fault(const exec::ExecutionResult& result) {
  if (!result.collection_error) return false;
  return result.collection_error->traceback.find("tests.py") != std::string::npos;
}

namespace {

class PipelineRun {
 public:
  PipelineRun(const corpus::TaskSpec& task, const ActivityGraph& graph,
              gateway::ModelGateway& gateway, const agents::GenerationParams& params,
              const std::string& model_id, const ScriptExecutor& executor,
              const agents::TemplateSet& templates)
      : task_(task), graph_(graph), gateway_(gateway), params_(params), model_id_(model_id),
        executor_(executor), templates_(templates) {
    record_.task_id = task.task_id;
    record_.variant = graph.variant;
    record_.model_id = model_id;
  }

  RunRecord run() {
    try {
      for (const auto& node : graph_.nodes) run_node(node);
      record_.final_code = record_.latest(DocumentKind::Code)->content;
      record_.status = RunStatus::Completed;
    } catch (const gateway::GatewayError& e) {
      fail(RunStatus::GatewayFailed, e.what());
    } catch (const agents::CodeExtractionError& e) {
      fail(RunStatus::Unparseable, e.what());
    }
    return std::move(record_);
  }

 private:
  void fail(RunStatus status, std::string message) {
    record_.status = status;
    record_.failed_stage = stage_;
    record_.error = std::move(message);
    record_.final_code.clear();
  }

  std::string ask(agents::PromptEnvelope env) {
    env.origin.task_id = task_.task_id;
    auto response = gateway_.complete(env, params_, model_id_);
    record_.transcript.push_back({stage_, env.serialize(), response.text, model_id_});
    return response.text;
  }

  const ArtifactDocument& add(DocumentKind kind, std::string content, Role author) {
    int revision = 0;
    for (const auto& d : record_.documents) revision += d.kind == kind;
    record_.documents.push_back({kind, std::move(content), revision, author});
    return record_.documents.back();
  }

  static std::string content_of(DocumentKind kind, std::string_view response) {
    if (kind == DocumentKind::Code || kind == DocumentKind::TestScript) {
      return agents::extract_code(response, true);
    }
    return std::string(trim(response));
  }

  std::vector<ArtifactDocument> context_for(const ActivityNode& node) const {
    if (graph_.variant == ProcessVariant::RawPrompt) return {};
    if (node.context_source == DocumentKind::TaskDescription) {
      return {ArtifactDocument{DocumentKind::TaskDescription, {}, 0, std::nullopt}};
    }
    return {*record_.latest(node.context_source)};
  }

  std::string upstream_text(const std::vector<ArtifactDocument>& docs) const {
    std::vector<std::string> parts;
    for (const auto& d : docs) {
      parts.push_back(d.kind == DocumentKind::TaskDescription && d.content.empty()
                          ? corpus::baseline_prompt_payload(task_)
                          : d.content);
    }
    return fmt::format("{}", fmt::join(parts, "\n\n"));
  }

  const ArtifactDocument& produce(Role role, TaskKind kind, std::vector<ArtifactDocument> core) {
    const auto out_kind = agents::output_kind(kind);
    stage_ = fmt::format("{}/{}", agents::to_string(role), agents::to_string(kind));
    auto text = ask(agents::render_prompt(role, kind, core, task_, templates_));
    add(out_kind, content_of(out_kind, text), role);

    const auto* edge = graph_.feedback_for(out_kind);
    if (!edge || kind == TaskKind::FixCode) return record_.documents.back();
    const auto upstream = upstream_text(core);
    for (int round = 0; round < graph_.refinement_rounds; ++round) {
      const ArtifactDocument current = record_.documents.back();
      auto context = core;
      for (auto reviewer : edge->reviewers) {
        stage_ = fmt::format("{}/Review:{}", agents::to_string(reviewer),
                             agents::to_string(out_kind));
        auto critique = ask(agents::render_feedback_prompt(reviewer, current, upstream, templates_));
        context.push_back({DocumentKind::Feedback, std::string(trim(critique)), 0, reviewer});
      }
      context.push_back(current);
      stage_ = fmt::format("{}/{}", agents::to_string(role), agents::to_string(kind));
      auto revised = ask(agents::render_prompt(role, kind, context, task_, templates_));
      add(out_kind, content_of(out_kind, revised), role);
    }
    return record_.documents.back();
  }

  void write_script(int cycle, const std::optional<std::string>& fault) {
    std::vector<ArtifactDocument> context = {*record_.latest(DocumentKind::TestCases)};
    if (fault) {
      context.push_back({DocumentKind::Feedback, *fault, 0, std::nullopt});
      if (const auto* prev = record_.latest(DocumentKind::TestScript)) context.push_back(*prev);
    }
    try {
      produce(Role::Tester, TaskKind::WriteTestScript, context);
    } catch (const agents::CodeExtractionError& e) {
      if (fault) throw;
      record_.interventions.push_back({stage_, cycle, fmt::format("no test script: {}", e.what())});
      write_script(cycle, std::string("The previous response contained no runnable test script. "
                                      "Return the complete script in one code block."));
    }
  }

  exec::ExecutionResult execute(int cycle) {
    const auto& code = record_.latest(DocumentKind::Code)->content;
    auto result = executor_(code, record_.latest(DocumentKind::TestScript)->content);
    if (is_script_fault(result)) {
      const auto& ce = *result.collection_error;
      record_.interventions.push_back(
          {"Tester/WriteTestScript", cycle, fmt::format("test script failed to load: {}", ce.exception_type)});
      write_script(cycle, fmt::format("The test script failed to load with {}:\n{}",
                                      ce.exception_type, trim(ce.traceback)));
      result = executor_(code, record_.latest(DocumentKind::TestScript)->content);
    }
    return result;
  }

  void run_testing(const ActivityNode& node) {
    produce(Role::Tester, TaskKind::DesignTests, context_for(node));
    write_script(0, std::nullopt);
    for (int cycle = 0;; ++cycle) {
      auto result = execute(cycle);
      ArtifactDocument results{DocumentKind::ExecutionResults, format_execution_results(result), 0,
                               std::nullopt};
      produce(Role::Tester, TaskKind::WriteTestReport, {results});
      if (result.all_passed() || cycle >= graph_.bugfix_cap) break;
      produce(Role::Developer, TaskKind::FixCode,
              {*record_.latest(DocumentKind::TestReport), *record_.latest(DocumentKind::Code)});
      record_.bugfix_cycles_used = cycle + 1;
    }
  }

  void run_node(const ActivityNode& node) {
    if (node.activity == Activity::Testing) {
      run_testing(node);
      return;
    }
    produce(node.producer, node.tasks.front(), context_for(node));
  }

  const corpus::TaskSpec& task_;
  const ActivityGraph& graph_;
  gateway::ModelGateway& gateway_;
  const agents::GenerationParams& params_;
  const std::string& model_id_;
  const ScriptExecutor& executor_;
  const agents::TemplateSet& templates_;
  RunRecord record_;
  std::string stage_;
};

}  // namespace

RunRecord run_pipeline(const corpus::TaskSpec& task, const ActivityGraph& graph,
                       gateway::ModelGateway& gateway, const agents::GenerationParams& params,
                       const std::string& model_id, const ScriptExecutor& executor,
                       const agents::TemplateSet& templates) {
  params.validate();
  if (graph.has(Activity::Testing) && !executor) {
    throw Error("a variant with Testing needs a script executor");
  }
  return PipelineRun(task, graph, gateway, params, model_id, executor, templates).run();
}

std::string make_run_id(std::string_view task_id, ProcessVariant variant,
                        std::string_view model_id) {
  return fmt::format("{}__{}__{}", sanitize_component(task_id), to_string(variant),
                     sanitize_component(model_id));
}

std::vector<RunDescriptor> ablation_grid(const std::vector<std::string>& models,
                                         const std::vector<ProcessVariant>& variants,
                                         const corpus::Corpus& corpus) {
  if (models.empty() || variants.empty() || corpus.tasks().empty()) {
    throw DomainError("grid needs at least one task, variant and model");
  }
  std::vector<RunDescriptor> grid;
  grid.reserve(corpus.tasks().size() * variants.size() * models.size());
  for (const auto& task : corpus.tasks()) {
    for (auto variant : variants) {
      for (const auto& model : models) {
        grid.push_back({task.task_id, variant, model, make_run_id(task.task_id, variant, model)});
      }
    }
  }
  return grid;
}

namespace {

const std::map<DocumentKind, const char*>& document_files() {
  static const std::map<DocumentKind, const char*> files = {
      {DocumentKind::Requirement, "requirement.md"}, {DocumentKind::Design, "design.md"},
      {DocumentKind::Code, "code.py"},               {DocumentKind::TestCases, "testcases.md"},
      {DocumentKind::TestScript, "testscript.py"},   {DocumentKind::TestReport, "testreport.md"},
  };
  return files;
}

}  // namespace

fs::path save_run(const RunRecord& record, const fs::path& runs_dir) {
  const auto dir = runs_dir / make_run_id(record.task_id, record.variant, record.model_id);
  const auto path = dir / kRecordFile;
  std::error_code ec;
  if (fs::exists(path, ec)) {
    auto existing = RunRecord::from_jsonl(read_file(path));
    if (existing.status == RunStatus::Completed) {
      throw Error(fmt::format("{} already holds a completed run", dir.string()));
    }
  }
  for (const auto& [kind, file] : document_files()) {
    if (const auto* doc = record.latest(kind)) {
      write_file(dir / file, doc->content);
    } else {
      fs::remove(dir / file, ec);  // left over from an earlier failed attempt
    }
  }
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, record.to_jsonl());
  fs::rename(tmp, path);
  return dir;
}

RunRecord load_run(const fs::path& run_dir) {
  return RunRecord::from_jsonl(read_file(run_dir / kRecordFile));
}

std::optional<exec::ExecutionResult> evaluate_final_code(const RunRecord& run,
                                                         const corpus::TaskSpec& task,
                                                         const exec::RunnerHandle& runner,
                                                         double timeout_s,
                                                         const std::optional<fs::path>& run_dir,
                                                         bool keep_sandbox) {
  if (run.task_id != task.task_id) {
    throw Error(fmt::format("run is for {}, not {}", run.task_id, task.task_id));
  }
  if (run.status != RunStatus::Completed) {
    if (run_dir) {
      json marker = {{"evaluated", false},
                     {"marker", "not-evaluated"},
                     {"status", to_string(run.status)}};
      write_file(*run_dir / kEvalFile, marker.dump(2) + "\n");
    }
    return std::nullopt;
  }
  exec::ExecutionRequest req;
  req.code = run.final_code;
  req.tests = task.test_suite;
  req.timeout_s = timeout_s;
  req.keep_sandbox = keep_sandbox;
  auto result = exec::execute_tests(req, runner);
  if (run_dir) {
    json doc = {{"evaluated", true}, {"result", exec::to_json(result)}};
    write_file(*run_dir / kEvalFile, doc.dump(2) + "\n");
  }
  return result;
}

gateway::ScriptedGateway::Script oracle_script(const corpus::Corpus& corpus) {
  auto tasks = std::make_shared<std::map<std::string, corpus::TaskSpec>>();
  for (const auto& t : corpus.tasks()) tasks->emplace(t.task_id, t);
  return [tasks](const agents::PromptEnvelope& env, const agents::GenerationParams&,
                 const std::string&) -> std::string {
    auto it = tasks->find(env.origin.task_id);
    if (it == tasks->end()) {
      throw gateway::GatewayError(fmt::format("oracle knows no task '{}'", env.origin.task_id));
    }
    const auto& task = it->second;
    switch (env.origin.task_kind) {
      case TaskKind::ImplementCode:
      case TaskKind::FixCode:
        return fmt::format("```python\n{}\n```\n", trim(task.ground_truth));
      case TaskKind::WriteTestScript:
        return fmt::format("```python\n{}\n```\n", trim(task.test_suite));
      case TaskKind::Review:
        return "No changes needed.";
      default:
        return fmt::format("{} for {}.",
                           agents::display_name(agents::output_kind(env.origin.task_kind)),
                           task.class_name);
    }
  };
}

}  // namespace cascade::process
