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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascade/common.hpp"
#include "cascade/corpus.hpp"

namespace cascade::agents {

enum class Role { RequirementEngineer, Architect, Developer, Tester };

enum class TaskKind {
  WriteRequirements,
  WriteDesign,
  ImplementCode,
  FixCode,
  DesignTests,
  WriteTestScript,
  WriteTestReport,
  Review,  // reviewer feedback; not a production row
};

enum class DocumentKind {
  TaskDescription,
  Requirement,
  Design,
  Code,
  TestCases,
  TestScript,
  TestReport,
  ExecutionResults,
  Feedback,
};

std::string_view to_string(Role role);
std::string_view to_string(TaskKind kind);
std::string_view to_string(DocumentKind kind);
/// Human-readable name used inside prompts ("Requirement Engineer", "Design Document").
std::string_view display_name(Role role);
std::string_view display_name(DocumentKind kind);

std::optional<Role> parse_role(std::string_view text);
std::optional<TaskKind> parse_task_kind(std::string_view text);
std::optional<DocumentKind> parse_document_kind(std::string_view text);

/// The seven production rows: every valid (role, task kind) pair.
const std::vector<std::pair<Role, TaskKind>>& production_rows();
bool is_valid_row(Role role, TaskKind kind);
std::vector<TaskKind> task_kinds(Role role);
DocumentKind output_kind(TaskKind kind);

/// Roles that review a document kind during self-refinement; empty when the
/// kind is not refined.
const std::vector<Role>& reviewers_for(DocumentKind kind);

struct ArtifactDocument {
  DocumentKind kind = DocumentKind::TaskDescription;
  std::string content;
  int revision = 0;
  std::optional<Role> author;

  bool operator==(const ArtifactDocument&) const = default;
};

/// Routing tag carried with an envelope. It is not one of the five fields and
/// never affects serialization or fingerprints.
struct EnvelopeOrigin {
  Role role = Role::Developer;
  TaskKind task_kind = TaskKind::ImplementCode;
  std::string task_id;
};

struct PromptEnvelope {
  std::string role_text;
  std::string instruction_text;
  std::string example_text;
  std::string context_text;
  std::string question_text;
  EnvelopeOrigin origin;

  /// JSON object with exactly the keys Role, Instruction, Example, Context, Question in that order.
  std::string serialize() const;
  static PromptEnvelope parse(std::string_view json_text);

  bool same_fields(const PromptEnvelope& other) const;
};

struct GenerationParams {
  double temperature = 0.8;
  int max_output_tokens = 4096;
  int retry_limit = 3;
  std::optional<long long> seed;

  /// Throws DomainError when temperature is outside [0, 2] or a count is negative.
  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

class ContextMismatch : public Error {
 public:
  using Error::Error;
};

class CodeExtractionError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

struct PromptTemplate {
  std::string task;         // fills "[task]" in the role frame
  std::string instruction;  // appended after "According to the Context, "
  std::string example;      // the document example
};

/// Instruction templates keyed by (role, task kind). Defaults are the built-in
/// texts; `load` overrides any of `task.txt`, `instruction.txt`, `example.txt`
/// found under `<dir>/<Role>/<TaskKind>/`.
class TemplateSet {
 public:
  static const TemplateSet& defaults();
  static TemplateSet load(const std::filesystem::path& dir);

  const PromptTemplate& get(Role role, TaskKind kind) const;
  void set(Role role, TaskKind kind, PromptTemplate tmpl);
  void write(const std::filesystem::path& dir) const;
  std::size_t size() const { return templates_.size(); }

 private:
  std::map<std::pair<Role, TaskKind>, PromptTemplate> templates_;
};

/// Renders the producer prompt for one production row. `context_docs` must
/// match the row's context requirement; documents of kind Feedback and earlier
/// drafts of the row's own output are accepted as refinement extras.
PromptEnvelope render_prompt(Role role, TaskKind kind,
                             const std::vector<ArtifactDocument>& context_docs,
                             const corpus::TaskSpec& task,
                             const TemplateSet& templates = TemplateSet::defaults());

/// Renders a reviewer prompt asking `reviewer` to critique `document`.
PromptEnvelope render_feedback_prompt(Role reviewer, const ArtifactDocument& document,
                                      std::string_view upstream_context = {},
                                      const TemplateSet& templates = TemplateSet::defaults());

/// Returns the largest fenced block (first wins on ties) or the trimmed
/// response when there is none. With `require_class`, throws
/// CodeExtractionError unless the result contains a class definition.
std::string extract_code(std::string_view response, bool require_class = true);

}  // namespace cascade::agents
