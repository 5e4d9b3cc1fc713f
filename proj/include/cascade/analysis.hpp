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
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cascade/corpus.hpp"
#include "cascade/exec.hpp"
#include "cascade/process.hpp"

namespace cascade::analysis {

using process::ProcessVariant;

// ---------------------------------------------------------------------------
// Relative change

/// (value - baseline) / baseline * 100, rounded half away from zero. A zero
/// baseline yields value * 100.
long long percent_change(double value, double baseline);
/// "+49%", "-40%", "0%".
std::string format_percent(long long percent);

enum class Direction { Improved, Regressed, Neutral };
std::string_view to_string(Direction direction);
/// For error counts and issue densities lower is better; for pass rates higher is.
Direction classify_change(long long percent, bool higher_is_better);

class MissingBaseline : public Error {
 public:
  explicit MissingBaseline(ProcessVariant baseline);
};

// ---------------------------------------------------------------------------
// Runtime errors

inline constexpr const char* kOneOffErrors = "One-Off Errors";
inline constexpr long long kOneOffThreshold = 2;

struct RunKey {
  std::string task_id;
  ProcessVariant variant = ProcessVariant::RawPrompt;
  std::string model_id;

  std::string run_id() const { return process::make_run_id(task_id, variant, model_id); }
  auto operator<=>(const RunKey&) const = default;
};

struct ErrorRecord {
  RunKey key;
  std::string error_type;

  auto operator<=>(const ErrorRecord&) const = default;
};

/// One record per distinct exception type across outcomes and the
/// collection error; a timeout adds "Time Limit Exceeded".
std::vector<ErrorRecord> extract_errors(const exec::ExecutionResult& result, const RunKey& key);

/// Drops repeated (run, error type) pairs, keeping first occurrences.
std::vector<ErrorRecord> dedup(const std::vector<ErrorRecord>& records);

struct Column {
  std::string model_id;
  ProcessVariant variant = ProcessVariant::RawPrompt;
  auto operator<=>(const Column&) const = default;
};

class FrequencyTable {
 public:
  std::vector<std::string> models;
  std::vector<ProcessVariant> variants;
  ProcessVariant baseline = ProcessVariant::RawPrompt;

  /// Visible rows: baseline frequency descending, then overall frequency,
  /// then name. One-Off Errors is not among them.
  std::vector<std::string> rows;
  /// Error types absorbed into One-Off Errors, per model.
  std::map<std::string, std::vector<std::string>> one_off_types;

  /// nullopt when the type is absorbed into One-Off Errors for that model.
  std::optional<long long> count(const std::string& error_type, const Column& col) const;
  long long one_off(const Column& col) const;
  long long total(const Column& col) const;
  const std::set<std::string>& runs(const std::string& row, const Column& col) const;

  // Raw storage; filled by build_frequency_table.
  std::map<std::pair<std::string, Column>, long long> cells;
  std::map<Column, long long> one_off_cells;
  std::map<std::pair<std::string, Column>, std::set<std::string>> provenance;
};

/// `variants` fixes the column set; when empty it is taken from the records.
FrequencyTable build_frequency_table(const std::vector<ErrorRecord>& records,
                                     ProcessVariant baseline,
                                     std::vector<std::string> models = {},
                                     std::vector<ProcessVariant> variants = {});

// ---------------------------------------------------------------------------
// Taxonomy

enum class Category { MissingCode, ReturnMismatch, InputValidation, SemanticFailure, Dataset, Environment };

enum class Subcategory {
  RenamedVariable,
  MissingVariable,
  MissingFunction,
  RenamedFunction,
  MissingClass,
  RenamedClass,
  MissingImport,
  IncompleteImplementation,
  ArityMismatch,
  OrderMismatch,
  TypeMismatch,
  FormatMismatch,
  OverrestrictiveValidation,
  FaultyValidation,
  MissingInputValidation,
  SpecViolation,
  SignatureMismatch,
  WrongAlgorithm,
  WrongEdgeCaseHandling,
  Timeout,
  SyntaxError,
  IntegrationError,
  FaultySpec,
  FaultyTest,
  MissingImportTest,
  SpecTestMismatch,
  VersionIncompatibility,
  UndeclaredDependency,
  DeprecatedDependency,
};

const std::vector<Category>& all_categories();
const std::vector<Subcategory>& subcategories(Category category);
Category category_of(Subcategory sub);

std::string_view to_string(Category category);
std::string_view to_string(Subcategory sub);
std::string_view display_name(Category category);
std::string_view display_name(Subcategory sub);
/// Accepts the identifier or the display name.
std::optional<Category> parse_category(std::string_view text);
std::optional<Subcategory> parse_subcategory(std::string_view text);

struct TaxonomyLabel {
  RunKey key;
  Category category = Category::SemanticFailure;
  Subcategory subcategory = Subcategory::WrongAlgorithm;
  bool primary = true;
  std::vector<std::pair<Category, Subcategory>> cross_refs;
  std::size_t line = 0;  // 1-based line in the annotation file, 0 when built in code
};

enum class ViolationKind {
  Malformed,
  UnknownCategory,
  UnknownSubcategory,
  CategoryMismatch,
  DuplicatePrimary,
  MissingPrimary,
  OrphanLabel,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  std::size_t line = 0;
  ViolationKind kind = ViolationKind::Malformed;
  std::string message;
};

/// Carries every violation found; the concrete type names the first one.
class AnnotationError : public Error {
 public:
  explicit AnnotationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class UnknownSubcategory : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

class DuplicatePrimary : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

class OrphanLabel : public AnnotationError {
 public:
  using AnnotationError::AnnotationError;
};

struct AnnotationCheck {
  std::vector<TaxonomyLabel> labels;
  std::vector<Violation> violations;
};

/// Parses line-delimited JSON labels and reports every violation with its
/// line number. Labels naming a run outside `failing_runs` are orphans; the
/// orphan check is skipped when `failing_runs` is nullopt.
AnnotationCheck check_annotations(std::string_view text,
                                  const std::optional<std::set<RunKey>>& failing_runs = std::nullopt);

/// As check_annotations, throwing on the first violation.
std::vector<TaxonomyLabel> load_annotations(
    const std::filesystem::path& path,
    const std::optional<std::set<RunKey>>& failing_runs = std::nullopt);

std::string label_to_json(const TaxonomyLabel& label);

struct TaxonomyMatrix {
  std::vector<std::string> models;
  std::vector<ProcessVariant> variants;
  ProcessVariant baseline = ProcessVariant::RawPrompt;

  long long count(Category category, const Column& col) const;
  long long count(Subcategory sub, const Column& col) const;
  long long cross_ref_count(Category category, const Column& col) const;
  long long cross_ref_count(Subcategory sub, const Column& col) const;
  /// Runs with a primary label in the column.
  long long labelled_runs(const Column& col) const;
  const std::set<std::string>& runs(Category category, const Column& col) const;
  const std::set<std::string>& runs(Subcategory sub, const Column& col) const;

  std::map<std::pair<Category, Column>, long long> category_cells;
  std::map<std::pair<Subcategory, Column>, long long> subcategory_cells;
  std::map<std::pair<Category, Column>, long long> cross_category_cells;
  std::map<std::pair<Subcategory, Column>, long long> cross_subcategory_cells;
  std::map<std::pair<Category, Column>, std::set<std::string>> category_runs;
  std::map<std::pair<Subcategory, Column>, std::set<std::string>> subcategory_runs;
};

TaxonomyMatrix build_taxonomy_matrix(const std::vector<TaxonomyLabel>& labels,
                                     ProcessVariant baseline,
                                     std::vector<std::string> models = {},
                                     std::vector<ProcessVariant> variants = {});

struct LabelSuggestion {
  Category category = Category::SemanticFailure;
  Subcategory subcategory = Subcategory::WrongAlgorithm;
  double score = 0.0;
  std::string trigger;
};

/// Advisory pre-labels for a failing run, best first. Never used as labels.
std::vector<LabelSuggestion> suggest_labels(const exec::ExecutionResult& result,
                                            const corpus::TaskSpec& task);

}  // namespace cascade::analysis
