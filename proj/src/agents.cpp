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

#include "cascade/agents.hpp"

#include <algorithm>
#include <array>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace cascade::agents {
namespace {

constexpr std::string_view kRequirementExample = R"(# Requirement Document
## Class
- Name: Counter
- Class variables: `count` (int, starts at 0)
## Methods
- `increment(self, step=1) -> int`: adds `step` to `count` and returns the new value.
- `reset(self) -> None`: sets `count` back to 0.
## Acceptance criteria
- `Counter().increment()` returns 1.)";

constexpr std::string_view kDesignExample = R"(# Design Document
## Structure
class Counter
  - state: count: int
  - increment(step=1) -> int   # mutates count, returns it
  - reset() -> None
## Interactions
- reset() is independent of increment(); both only touch `count`.)";

constexpr std::string_view kCodeExample = R"(```python
class Counter:
    def __init__(self):
        self.count = 0

    def increment(self, step=1):
        self.count += step
        return self.count

    def reset(self):
        self.count = 0
```)";

constexpr std::string_view kTestCasesExample = R"(# Test Case Document
## increment
1. normal: fresh counter, increment() -> 1
2. normal: increment(5) -> 5
3. edge: increment(0) -> 0
4. edge: increment(-1) -> -1
5. error: increment("a") raises TypeError)";

constexpr std::string_view kTestScriptExample = R"(```python
import unittest

class TestCounterIncrement(unittest.TestCase):
    def test_increment_default(self):
        self.assertEqual(Counter().increment(), 1)
```)";

constexpr std::string_view kTestReportExample = R"(# Test Report
- Executed: 10, Passed: 9, Failed: 1
## Failures
- TestCounterIncrement.test_increment_string: expected TypeError, nothing raised.
## Suggested fixes
- Validate that `step` is an int.)";

constexpr std::string_view kFeedbackExample = R"(# Review Notes
1. The method `reset` is missing its return type; state it as None.
2. Clarify what happens when `step` is negative.)";

std::map<std::pair<Role, TaskKind>, PromptTemplate> builtin_templates() {
  std::map<std::pair<Role, TaskKind>, PromptTemplate> t;
  t[{Role::RequirementEngineer, TaskKind::WriteRequirements}] = {
      "analyze the task description and write a requirements document.",
      "1) Review the task description. 2) Write a requirements document that accounts for "
      "method signatures and class variables.",
      std::string(kRequirementExample)};
  t[{Role::Architect, TaskKind::WriteDesign}] = {
      "design the high-level components and structure of the code.",
      "1) Review the provided documents. 2) Write a design document that preserves method "
      "definitions and serves as a guide for developers.",
      std::string(kDesignExample)};
  t[{Role::Developer, TaskKind::ImplementCode}] = {
      "implement Python code that meets all requirements.",
      "1) Review the provided documents. 2) Write clean, efficient, and readable code following "
      "best practices. Use a single class structure and keep method definitions unchanged.",
      std::string(kCodeExample)};
  t[{Role::Developer, TaskKind::FixCode}] = {
      "fix code while ensuring all requirements are met.",
      "1) Review the test reports and provided documents. 2) Revise the code to make it "
      "efficient, readable, and consistent with best practices.",
      std::string(kCodeExample)};
  t[{Role::Tester, TaskKind::DesignTests}] = {
      "design test cases that verify all requirements.",
      "1) Review the provided documents. 2) Write test cases that preserve method definitions, "
      "cover normal, edge, and error conditions, and include at least five test cases per "
      "method.",
      std::string(kTestCasesExample)};
  t[{Role::Tester, TaskKind::WriteTestScript}] = {
      "write a Python test script using the unittest framework.",
      "1) Review the provided documents. 2) Write test scripts with one test case for each "
      "scenario, reusing existing modules where possible.",
      std::string(kTestScriptExample)};
  t[{Role::Tester, TaskKind::WriteTestReport}] = {
      "write a test failure report.",
      "1) Review the test execution results. 2) Document the outcomes in a test report.",
      std::string(kTestReportExample)};
  for (Role reviewer : {Role::Architect, Role::Developer, Role::Tester}) {
    t[{reviewer, TaskKind::Review}] = {
        "reviewing the {{document}} and giving feedback.",
        "1) Review the {{document}} against its upstream context. 2) Point out gaps, "
        "inconsistencies, and ambiguities that matter to your role.",
        std::string(kFeedbackExample)};
  }
  return t;
}

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  const std::string needle = fmt::format("{{{{{}}}}}", key);
  for (auto pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + value.size())) {
    text.replace(pos, needle.size(), value);
  }
  return text;
}

void ensure_no_placeholders(const PromptEnvelope& env) {
  for (const auto* field : {&env.role_text, &env.instruction_text, &env.question_text}) {
    auto open = field->find("{{");
    if (open != std::string::npos && field->find("}}", open) != std::string::npos) {
      throw TemplateError(fmt::format("unreplaced placeholder in prompt field: {}", *field));
    }
  }
}

struct ContextRule {
  std::vector<DocumentKind> primary;
  std::vector<DocumentKind> fallbacks;  // single-document alternatives, in preference order
};

ContextRule context_rule(TaskKind kind) {
  switch (kind) {
    case TaskKind::WriteRequirements:
      return {{DocumentKind::TaskDescription}, {}};
    case TaskKind::WriteDesign:
      return {{DocumentKind::Requirement}, {DocumentKind::TaskDescription}};
    case TaskKind::ImplementCode:
      return {{DocumentKind::Design}, {DocumentKind::Requirement, DocumentKind::TaskDescription}};
    case TaskKind::FixCode:
      return {{DocumentKind::TestReport, DocumentKind::Code}, {}};
    case TaskKind::DesignTests:
      return {{DocumentKind::TaskDescription}, {}};
    case TaskKind::WriteTestScript:
      return {{DocumentKind::TestCases}, {}};
    case TaskKind::WriteTestReport:
      return {{DocumentKind::ExecutionResults}, {}};
    case TaskKind::Review:
      break;
  }
  return {};
}

bool kinds_match(std::vector<DocumentKind> given, std::vector<DocumentKind> wanted) {
  // The task description may be implicit (no document supplied).
  if (given.empty() && wanted == std::vector{DocumentKind::TaskDescription}) return true;
  std::sort(given.begin(), given.end());
  std::sort(wanted.begin(), wanted.end());
  return given == wanted;
}

std::string section_title(const ArtifactDocument& doc) {
  if (doc.kind == DocumentKind::Feedback) {
    return doc.author ? fmt::format("Feedback from {}", display_name(*doc.author))
                      : std::string("Feedback");
  }
  return std::string(display_name(doc.kind));
}

std::string document_body(const ArtifactDocument& doc, const corpus::TaskSpec& task) {
  if (doc.kind == DocumentKind::TaskDescription && doc.content.empty()) {
    return corpus::baseline_prompt_payload(task);
  }
  return doc.content;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::RequirementEngineer: return "RequirementEngineer";
    case Role::Architect: return "Architect";
    case Role::Developer: return "Developer";
    case Role::Tester: return "Tester";
  }
  return "?";
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::WriteRequirements: return "WriteRequirements";
    case TaskKind::WriteDesign: return "WriteDesign";
    case TaskKind::ImplementCode: return "ImplementCode";
    case TaskKind::FixCode: return "FixCode";
    case TaskKind::DesignTests: return "DesignTests";
    case TaskKind::WriteTestScript: return "WriteTestScript";
    case TaskKind::WriteTestReport: return "WriteTestReport";
    case TaskKind::Review: return "Review";
  }
  return "?";
}

std::string_view to_string(DocumentKind kind) {
  switch (kind) {
    case DocumentKind::TaskDescription: return "task_description";
    case DocumentKind::Requirement: return "requirement";
    case DocumentKind::Design: return "design";
    case DocumentKind::Code: return "code";
    case DocumentKind::TestCases: return "test_cases";
    case DocumentKind::TestScript: return "test_script";
    case DocumentKind::TestReport: return "test_report";
    case DocumentKind::ExecutionResults: return "execution_results";
    case DocumentKind::Feedback: return "feedback";
  }
  return "?";
}

std::string_view display_name(Role role) {
  switch (role) {
    case Role::RequirementEngineer: return "Requirement Engineer";
    case Role::Architect: return "Architect";
    case Role::Developer: return "Developer";
    case Role::Tester: return "Tester";
  }
  return "?";
}

std::string_view display_name(DocumentKind kind) {
  switch (kind) {
    case DocumentKind::TaskDescription: return "Task Description";
    case DocumentKind::Requirement: return "Requirement Document";
    case DocumentKind::Design: return "Design Document";
    case DocumentKind::Code: return "Code Document";
    case DocumentKind::TestCases: return "Test Case Document";
    case DocumentKind::TestScript: return "Test Script";
    case DocumentKind::TestReport: return "Test Report";
    case DocumentKind::ExecutionResults: return "Test Execution Results";
    case DocumentKind::Feedback: return "Feedback";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view text) {
  for (Role r : {Role::RequirementEngineer, Role::Architect, Role::Developer, Role::Tester}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(TaskKind::Review); ++i) {
    auto kind = static_cast<TaskKind>(i);
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::optional<DocumentKind> parse_document_kind(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(DocumentKind::Feedback); ++i) {
    auto kind = static_cast<DocumentKind>(i);
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

const std::vector<std::pair<Role, TaskKind>>& production_rows() {
  static const std::vector<std::pair<Role, TaskKind>> rows = {
      {Role::RequirementEngineer, TaskKind::WriteRequirements},
      {Role::Architect, TaskKind::WriteDesign},
      {Role::Developer, TaskKind::ImplementCode},
      {Role::Developer, TaskKind::FixCode},
      {Role::Tester, TaskKind::DesignTests},
      {Role::Tester, TaskKind::WriteTestScript},
      {Role::Tester, TaskKind::WriteTestReport},
  };
  return rows;
}

bool is_valid_row(Role role, TaskKind kind) {
  const auto& rows = production_rows();
  return std::find(rows.begin(), rows.end(), std::pair{role, kind}) != rows.end();
}

std::vector<TaskKind> task_kinds(Role role) {
  std::vector<TaskKind> out;
  for (const auto& [r, k] : production_rows()) {
    if (r == role) out.push_back(k);
  }
  return out;
}

DocumentKind output_kind(TaskKind kind) {
  switch (kind) {
    case TaskKind::WriteRequirements: return DocumentKind::Requirement;
    case TaskKind::WriteDesign: return DocumentKind::Design;
    case TaskKind::ImplementCode:
    case TaskKind::FixCode: return DocumentKind::Code;
    case TaskKind::DesignTests: return DocumentKind::TestCases;
    case TaskKind::WriteTestScript: return DocumentKind::TestScript;
    case TaskKind::WriteTestReport: return DocumentKind::TestReport;
    case TaskKind::Review: return DocumentKind::Feedback;
  }
  return DocumentKind::Feedback;
}

const std::vector<Role>& reviewers_for(DocumentKind kind) {
  static const std::vector<Role> requirement = {Role::Architect, Role::Tester};
  static const std::vector<Role> design = {Role::Developer, Role::Tester};
  static const std::vector<Role> code = {Role::Architect, Role::Tester};
  static const std::vector<Role> test_cases = {Role::Architect, Role::Developer};
  static const std::vector<Role> none;
  switch (kind) {
    case DocumentKind::Requirement: return requirement;
    case DocumentKind::Design: return design;
    case DocumentKind::Code: return code;
    case DocumentKind::TestCases: return test_cases;
    default: return none;
  }
}

std::string PromptEnvelope::serialize() const {
  nlohmann::ordered_json j;
  j["Role"] = role_text;
  j["Instruction"] = instruction_text;
  j["Example"] = example_text;
  j["Context"] = context_text;
  j["Question"] = question_text;
  return j.dump();
}

PromptEnvelope PromptEnvelope::parse(std::string_view json_text) {
  static constexpr std::array<std::string_view, 5> keys = {"Role", "Instruction", "Example",
                                                           "Context", "Question"};
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(fmt::format("malformed envelope: {}", e.what()));
  }
  if (!j.is_object() || j.size() != keys.size()) {
    throw Error("envelope must be an object with exactly five fields");
  }
  std::size_t i = 0;
  for (auto it = j.begin(); it != j.end(); ++it, ++i) {
    if (it.key() != keys[i] || !it.value().is_string()) {
      throw Error(fmt::format("envelope field {} out of order or not a string", it.key()));
    }
  }
  PromptEnvelope env;
  env.role_text = j["Role"].get<std::string>();
  env.instruction_text = j["Instruction"].get<std::string>();
  env.example_text = j["Example"].get<std::string>();
  env.context_text = j["Context"].get<std::string>();
  env.question_text = j["Question"].get<std::string>();
  return env;
}

bool PromptEnvelope::same_fields(const PromptEnvelope& other) const {
  return role_text == other.role_text && instruction_text == other.instruction_text &&
         example_text == other.example_text && context_text == other.context_text &&
         question_text == other.question_text;
}

void GenerationParams::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw DomainError(fmt::format("temperature {} outside [0, 2]", temperature));
  }
  if (max_output_tokens <= 0) throw DomainError("max_output_tokens must be positive");
  if (retry_limit < 0) throw DomainError("retry_limit must be non-negative");
}

const TemplateSet& TemplateSet::defaults() {
  static const TemplateSet set = [] {
    TemplateSet s;
    s.templates_ = builtin_templates();
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load(const fs::path& dir) {
  TemplateSet set = defaults();
  for (auto& [key, tmpl] : set.templates_) {
    auto base = dir / std::string(to_string(key.first)) / std::string(to_string(key.second));
    if (!fs::is_directory(base)) continue;
    if (fs::exists(base / "task.txt")) tmpl.task = std::string(trim(read_file(base / "task.txt")));
    if (fs::exists(base / "instruction.txt")) {
      tmpl.instruction = std::string(trim(read_file(base / "instruction.txt")));
    }
    if (fs::exists(base / "example.txt")) {
      tmpl.example = std::string(trim(read_file(base / "example.txt")));
    }
  }
  return set;
}

const PromptTemplate& TemplateSet::get(Role role, TaskKind kind) const {
  auto it = templates_.find({role, kind});
  if (it == templates_.end()) {
    throw TemplateError(fmt::format("no template for ({}, {})", to_string(role), to_string(kind)));
  }
  return it->second;
}

void TemplateSet::set(Role role, TaskKind kind, PromptTemplate tmpl) {
  templates_[{role, kind}] = std::move(tmpl);
}

void TemplateSet::write(const fs::path& dir) const {
  for (const auto& [key, tmpl] : templates_) {
    auto base = dir / std::string(to_string(key.first)) / std::string(to_string(key.second));
    write_file(base / "task.txt", tmpl.task + "\n");
    write_file(base / "instruction.txt", tmpl.instruction + "\n");
    write_file(base / "example.txt", tmpl.example + "\n");
  }
}

PromptEnvelope render_prompt(Role role, TaskKind kind,
                             const std::vector<ArtifactDocument>& context_docs,
                             const corpus::TaskSpec& task, const TemplateSet& templates) {
  if (!is_valid_row(role, kind)) {
    throw ContextMismatch(
        fmt::format("({}, {}) is not a production row", to_string(role), to_string(kind)));
  }
  const auto rule = context_rule(kind);
  const auto own_output = output_kind(kind);
  const bool own_is_input =
      std::find(rule.primary.begin(), rule.primary.end(), own_output) != rule.primary.end();

  std::vector<const ArtifactDocument*> core;
  std::vector<const ArtifactDocument*> extras;
  for (const auto& doc : context_docs) {
    bool extra = doc.kind == DocumentKind::Feedback || (!own_is_input && doc.kind == own_output);
    (extra ? extras : core).push_back(&doc);
  }
  std::vector<DocumentKind> core_kinds;
  for (const auto* doc : core) core_kinds.push_back(doc->kind);

  bool ok = kinds_match(core_kinds, rule.primary);
  for (auto fallback : rule.fallbacks) {
    ok = ok || kinds_match(core_kinds, {fallback});
  }
  if (!ok) {
    std::string given;
    for (auto k : core_kinds) given += fmt::format("{} ", to_string(k));
    throw ContextMismatch(fmt::format("({}, {}) cannot take context [{}]", to_string(role),
                                      to_string(kind), trim(given)));
  }

  std::string context;
  if (core.empty()) {
    context = corpus::baseline_prompt_payload(task);
  } else if (core.size() == 1 && extras.empty()) {
    context = document_body(*core.front(), task);
  }
  if (context.empty() || !extras.empty()) {
    std::vector<std::string> sections;
    if (core.empty()) {
      sections.push_back(fmt::format("### {}\n{}", display_name(DocumentKind::TaskDescription),
                                     corpus::baseline_prompt_payload(task)));
    }
    for (const auto* doc : core) {
      sections.push_back(fmt::format("### {}\n{}", section_title(*doc), document_body(*doc, task)));
    }
    for (const auto* doc : extras) {
      auto title = doc->kind == own_output ? fmt::format("Previous {}", display_name(doc->kind))
                                           : section_title(*doc);
      sections.push_back(fmt::format("### {}\n{}", title, doc->content));
    }
    context = fmt::format("{}", fmt::join(sections, "\n\n"));
  }

  const auto& tmpl = templates.get(role, kind);
  PromptEnvelope env;
  env.role_text = fmt::format("You are a {} delegated for {}", display_name(role), tmpl.task);
  env.instruction_text = fmt::format("According to the Context, {}", tmpl.instruction);
  env.example_text = tmpl.example;
  env.context_text = std::move(context);
  env.question_text = fmt::format("Follow the instructions. The {} must satisfy the requirements.",
                                  display_name(own_output));
  env.origin = {role, kind, task.task_id};
  ensure_no_placeholders(env);
  return env;
}

PromptEnvelope render_feedback_prompt(Role reviewer, const ArtifactDocument& document,
                                      std::string_view upstream_context,
                                      const TemplateSet& templates) {
  const auto& allowed = reviewers_for(document.kind);
  if (std::find(allowed.begin(), allowed.end(), reviewer) == allowed.end()) {
    throw ContextMismatch(fmt::format("{} does not review the {}", display_name(reviewer),
                                      display_name(document.kind)));
  }
  const auto doc_name = display_name(document.kind);
  const auto& tmpl = templates.get(reviewer, TaskKind::Review);

  std::string context = fmt::format("### {}\n{}", doc_name, document.content);
  if (!upstream_context.empty()) {
    context += fmt::format("\n\n### Upstream Context\n{}", upstream_context);
  }

  PromptEnvelope env;
  env.role_text = fmt::format("You are a {} delegated for {}", display_name(reviewer),
                              substitute(tmpl.task, "document", doc_name));
  env.instruction_text =
      fmt::format("According to the Context, {}", substitute(tmpl.instruction, "document", doc_name));
  env.example_text = tmpl.example;
  env.context_text = std::move(context);
  env.question_text = fmt::format(
      "Follow the instructions. Give actionable revision notes the author can apply to the {}.",
      doc_name);
  env.origin = {reviewer, TaskKind::Review, {}};
  ensure_no_placeholders(env);
  return env;
}

std::string extract_code(std::string_view response, bool require_class) {
  if (trim(response).empty()) throw CodeExtractionError("empty response");
  std::string best;
  std::size_t best_lines = 0;
  bool found_block = false;
  bool in_block = false;
  std::string current;
  std::size_t current_lines = 0;
  for (auto line : split_lines(response)) {
    auto t = trim(line);
    if (starts_with(t, "```")) {
      if (in_block) {
        if (!found_block || current_lines > best_lines) {
          best = current;
          best_lines = current_lines;
        }
        found_block = true;
        in_block = false;
      } else {
        in_block = true;
        current.clear();
        current_lines = 0;
      }
      continue;
    }
    if (in_block) {
      current += line;
      current += '\n';
      ++current_lines;
    }
  }
  std::string code = found_block ? best : std::string(trim(response)) + "\n";
  if (require_class) {
    static const std::regex class_re(R"((^|\n)[ \t]*class[ \t]+[A-Za-z_]\w*)");
    if (!std::regex_search(code, class_re)) {
      throw CodeExtractionError("response contains no class definition");
    }
  }
  return code;
}

}  // namespace cascade::agents
