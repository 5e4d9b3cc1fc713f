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

#include "cascade/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cascade/python_source.hpp"

using nlohmann::json;

namespace cascade::analysis {

long long percent_change(double value, double baseline) {
  double pct = baseline == 0.0 ? value * 100.0 : (value - baseline) / baseline * 100.0;
  // Snap away binary noise so that exact halves round outward.
  pct = std::round(pct * 1e6) / 1e6;
  return std::llround(pct);
}

std::string format_percent(long long percent) {
  if (percent == 0) return "0%";
  return fmt::format("{:+d}%", percent);
}

std::string_view to_string(Direction direction) {
  switch (direction) {
    case Direction::Improved: return "improved";
    case Direction::Regressed: return "regressed";
    case Direction::Neutral: return "neutral";
  }
  return "?";
}

Direction classify_change(long long percent, bool higher_is_better) {
  if (percent == 0) return Direction::Neutral;
  return (percent > 0) == higher_is_better ? Direction::Improved : Direction::Regressed;
}

MissingBaseline::MissingBaseline(ProcessVariant baseline)
    : Error(fmt::format("baseline variant {} has no data", process::to_string(baseline))) {}

// ---------------------------------------------------------------------------

std::vector<ErrorRecord> extract_errors(const exec::ExecutionResult& result, const RunKey& key) {
  std::vector<ErrorRecord> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& type) {
    if (type.empty() || !seen.insert(type).second) return;
    out.push_back({key, type});
  };
  for (const auto& o : result.per_test) {
    if (o.status == exec::TestStatus::Pass) continue;
    add(o.exception_type.value_or(
        exec::exception_from_traceback(o.traceback).value_or("UnknownError")));
  }
  if (result.collection_error) add(result.collection_error->exception_type);
  if (result.timed_out) add(exec::kTimeLimitExceeded);
  return out;
}

std::vector<ErrorRecord> dedup(const std::vector<ErrorRecord>& records) {
  std::vector<ErrorRecord> out;
  std::set<ErrorRecord> seen;
  for (const auto& r : records) {
    if (seen.insert(r).second) out.push_back(r);
  }
  return out;
}

namespace {

template <typename T>
void resolve_columns(std::vector<std::string>& models, std::vector<ProcessVariant>& variants,
                     const std::vector<T>& items, ProcessVariant baseline) {
  if (models.empty()) {
    std::set<std::string> seen;
    for (const auto& i : items) {
      if (seen.insert(i.key.model_id).second) models.push_back(i.key.model_id);
    }
    std::sort(models.begin(), models.end());
  }
  if (variants.empty()) {
    std::set<ProcessVariant> seen;
    for (const auto& i : items) seen.insert(i.key.variant);
    variants.assign(seen.begin(), seen.end());
  }
  if (!variants.empty() &&
      std::find(variants.begin(), variants.end(), baseline) == variants.end()) {
    throw MissingBaseline(baseline);
  }
}

const std::set<std::string>& empty_set() {
  static const std::set<std::string> empty;
  return empty;
}

template <typename Map, typename Key>
long long lookup(const Map& map, const Key& key) {
  auto it = map.find(key);
  return it == map.end() ? 0 : it->second;
}

}  // namespace

std::optional<long long> FrequencyTable::count(const std::string& error_type,
                                               const Column& col) const {
  auto absorbed = one_off_types.find(col.model_id);
  if (absorbed != one_off_types.end() &&
      std::find(absorbed->second.begin(), absorbed->second.end(), error_type) !=
          absorbed->second.end()) {
    return std::nullopt;
  }
  return lookup(cells, std::pair{error_type, col});
}

long long FrequencyTable::one_off(const Column& col) const { return lookup(one_off_cells, col); }

long long FrequencyTable::total(const Column& col) const {
  long long sum = one_off(col);
  for (const auto& row : rows) sum += count(row, col).value_or(0);
  return sum;
}

const std::set<std::string>& FrequencyTable::runs(const std::string& row, const Column& col) const {
  auto it = provenance.find({row, col});
  return it == provenance.end() ? empty_set() : it->second;
}

FrequencyTable build_frequency_table(const std::vector<ErrorRecord>& input,
                                     ProcessVariant baseline, std::vector<std::string> models,
                                     std::vector<ProcessVariant> variants) {
  const auto records = dedup(input);
  FrequencyTable table;
  resolve_columns(models, variants, records, baseline);
  if (variants.empty()) throw MissingBaseline(baseline);
  table.models = models;
  table.variants = variants;
  table.baseline = baseline;

  std::map<std::pair<std::string, std::string>, long long> per_model_total;
  for (const auto& r : records) {
    Column col{r.key.model_id, r.key.variant};
    ++table.cells[{r.error_type, col}];
    table.provenance[{r.error_type, col}].insert(r.key.run_id());
    ++per_model_total[{r.key.model_id, r.error_type}];
  }

  std::set<std::string> visible;
  for (const auto& [model_type, n] : per_model_total) {
    const auto& [model, type] = model_type;
    if (n <= kOneOffThreshold) {
      table.one_off_types[model].push_back(type);
      for (auto v : variants) {
        Column col{model, v};
        auto c = lookup(table.cells, std::pair{type, col});
        table.one_off_cells[col] += c;
        const auto& src = table.runs(type, col);
        table.provenance[{kOneOffErrors, col}].insert(src.begin(), src.end());
      }
    } else {
      visible.insert(type);
    }
  }

  auto sum_over = [&](const std::string& type, std::optional<ProcessVariant> only) {
    long long s = 0;
    for (const auto& m : models) {
      for (auto v : variants) {
        if (only && v != *only) continue;
        s += table.count(type, {m, v}).value_or(0);
      }
    }
    return s;
  };
  table.rows.assign(visible.begin(), visible.end());
  std::stable_sort(table.rows.begin(), table.rows.end(), [&](const auto& a, const auto& b) {
    auto ka = std::make_pair(sum_over(a, baseline), sum_over(a, std::nullopt));
    auto kb = std::make_pair(sum_over(b, baseline), sum_over(b, std::nullopt));
    return ka > kb;
  });
  return table;
}

// ---------------------------------------------------------------------------
// Taxonomy tables

namespace {

struct SubInfo {
  Subcategory sub;
  Category category;
  const char* id;
  const char* display;
};

const std::vector<SubInfo>& sub_table() {
  using C = Category;
  using S = Subcategory;
  static const std::vector<SubInfo> table = {
      {S::RenamedVariable, C::MissingCode, "RenamedVariable", "Renamed Variable"},
      {S::MissingVariable, C::MissingCode, "MissingVariable", "Missing Variable"},
      {S::MissingFunction, C::MissingCode, "MissingFunction", "Missing Function"},
      {S::RenamedFunction, C::MissingCode, "RenamedFunction", "Renamed Function"},
      {S::MissingClass, C::MissingCode, "MissingClass", "Missing Class"},
      {S::RenamedClass, C::MissingCode, "RenamedClass", "Renamed Class"},
      {S::MissingImport, C::MissingCode, "MissingImport", "Missing Import"},
      {S::IncompleteImplementation, C::MissingCode, "IncompleteImplementation",
       "Incomplete Implementation"},
      {S::ArityMismatch, C::ReturnMismatch, "ArityMismatch", "Arity Mismatch"},
      {S::OrderMismatch, C::ReturnMismatch, "OrderMismatch", "Order Mismatch"},
      {S::TypeMismatch, C::ReturnMismatch, "TypeMismatch", "Type Mismatch"},
      {S::FormatMismatch, C::ReturnMismatch, "FormatMismatch", "Format Mismatch"},
      {S::OverrestrictiveValidation, C::InputValidation, "OverrestrictiveValidation",
       "Overrestrictive Validation"},
      {S::FaultyValidation, C::InputValidation, "FaultyValidation", "Faulty Validation"},
      {S::MissingInputValidation, C::InputValidation, "MissingInputValidation",
       "Missing Input Validation"},
      {S::SpecViolation, C::SemanticFailure, "SpecViolation", "Spec Violation"},
      {S::SignatureMismatch, C::SemanticFailure, "SignatureMismatch", "Signature Mismatch"},
      {S::WrongAlgorithm, C::SemanticFailure, "WrongAlgorithm", "Wrong Algorithm"},
      {S::WrongEdgeCaseHandling, C::SemanticFailure, "WrongEdgeCaseHandling",
       "Wrong Edge Case Handling"},
      {S::Timeout, C::SemanticFailure, "Timeout", "Timeout"},
      {S::SyntaxError, C::SemanticFailure, "SyntaxError", "Syntax Error"},
      {S::IntegrationError, C::SemanticFailure, "IntegrationError", "Integration Error"},
      {S::FaultySpec, C::Dataset, "FaultySpec", "Faulty Spec"},
      {S::FaultyTest, C::Dataset, "FaultyTest", "Faulty Test"},
      {S::MissingImportTest, C::Dataset, "MissingImportTest", "Missing Import (Test)"},
      {S::SpecTestMismatch, C::Dataset, "SpecTestMismatch", "Spec-Test Mismatch"},
      {S::VersionIncompatibility, C::Environment, "VersionIncompatibility",
       "Version Incompatibility"},
      {S::UndeclaredDependency, C::Environment, "UndeclaredDependency", "Undeclared Dependency"},
      {S::DeprecatedDependency, C::Environment, "DeprecatedDependency", "Deprecated Dependency"},
  };
  return table;
}

const SubInfo& info(Subcategory sub) { return sub_table()[static_cast<std::size_t>(sub)]; }

}  // namespace

const std::vector<Category>& all_categories() {
  static const std::vector<Category> cats = {Category::MissingCode,     Category::ReturnMismatch,
                                             Category::InputValidation, Category::SemanticFailure,
                                             Category::Dataset,         Category::Environment};
  return cats;
}

const std::vector<Subcategory>& subcategories(Category category) {
  static const auto grouped = [] {
    std::map<Category, std::vector<Subcategory>> m;
    for (const auto& s : sub_table()) m[s.category].push_back(s.sub);
    return m;
  }();
  return grouped.at(category);
}

Category category_of(Subcategory sub) { return info(sub).category; }

std::string_view to_string(Category category) {
  switch (category) {
    case Category::MissingCode: return "MissingCode";
    case Category::ReturnMismatch: return "ReturnMismatch";
    case Category::InputValidation: return "InputValidation";
    case Category::SemanticFailure: return "SemanticFailure";
    case Category::Dataset: return "Dataset";
    case Category::Environment: return "Environment";
  }
  return "?";
}

std::string_view display_name(Category category) {
  switch (category) {
    case Category::MissingCode: return "Missing Code";
    case Category::ReturnMismatch: return "Return Mismatch";
    case Category::InputValidation: return "Input Validation";
    case Category::SemanticFailure: return "Semantic Failure";
    case Category::Dataset: return "Dataset";
    case Category::Environment: return "Environment";
  }
  return "?";
}

std::string_view to_string(Subcategory sub) { return info(sub).id; }
std::string_view display_name(Subcategory sub) { return info(sub).display; }

std::optional<Category> parse_category(std::string_view text) {
  for (auto c : all_categories()) {
    if (to_string(c) == text || display_name(c) == text) return c;
  }
  return std::nullopt;
}

std::optional<Subcategory> parse_subcategory(std::string_view text) {
  for (const auto& s : sub_table()) {
    if (s.id == text || s.display == text) return s.sub;
  }
  return std::nullopt;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Malformed: return "Malformed";
    case ViolationKind::UnknownCategory: return "UnknownCategory";
    case ViolationKind::UnknownSubcategory: return "UnknownSubcategory";
    case ViolationKind::CategoryMismatch: return "CategoryMismatch";
    case ViolationKind::DuplicatePrimary: return "DuplicatePrimary";
    case ViolationKind::MissingPrimary: return "MissingPrimary";
    case ViolationKind::OrphanLabel: return "OrphanLabel";
  }
  return "?";
}

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::vector<std::string> parts;
  for (const auto& v : violations) {
    parts.push_back(fmt::format("line {}: {}: {}", v.line, to_string(v.kind), v.message));
  }
  return fmt::format("{}", fmt::join(parts, "; "));
}

}  // namespace

AnnotationError::AnnotationError(std::vector<Violation> violations)
    : Error(describe(violations)), violations_(std::move(violations)) {}

namespace {

struct LabelPair {
  Category category;
  Subcategory subcategory;
};

// Parses and checks one (category, subcategory) pair; returns nullopt after
// recording a violation.
std::optional<LabelPair> read_pair(const json& j, std::size_t line, std::vector<Violation>& out) {
  if (!j.contains("category") || !j["category"].is_string() || !j.contains("subcategory") ||
      !j["subcategory"].is_string()) {
    out.push_back({line, ViolationKind::Malformed, "category and subcategory must be strings"});
    return std::nullopt;
  }
  auto cat_text = j["category"].get<std::string>();
  auto sub_text = j["subcategory"].get<std::string>();
  auto cat = parse_category(cat_text);
  if (!cat) {
    out.push_back({line, ViolationKind::UnknownCategory, fmt::format("'{}'", cat_text)});
    return std::nullopt;
  }
  auto sub = parse_subcategory(sub_text);
  if (!sub) {
    out.push_back({line, ViolationKind::UnknownSubcategory, fmt::format("'{}'", sub_text)});
    return std::nullopt;
  }
  if (category_of(*sub) != *cat) {
    out.push_back({line, ViolationKind::CategoryMismatch,
                   fmt::format("{} belongs to {}, not {}", to_string(*sub),
                               to_string(category_of(*sub)), to_string(*cat))});
    return std::nullopt;
  }
  return LabelPair{*cat, *sub};
}

}  // namespace

AnnotationCheck check_annotations(std::string_view text,
                                  const std::optional<std::set<RunKey>>& failing_runs) {
  AnnotationCheck check;
  auto& v = check.violations;
  std::map<RunKey, std::size_t> primary_line;
  std::map<RunKey, std::size_t> first_line;

  std::size_t line = 0;
  for (auto raw : split_lines(text)) {
    ++line;
    if (trim(raw).empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      v.push_back({line, ViolationKind::Malformed, e.what()});
      continue;
    }
    if (!j.is_object()) {
      v.push_back({line, ViolationKind::Malformed, "not a JSON object"});
      continue;
    }
    TaxonomyLabel label;
    label.line = line;
    try {
      label.key.task_id = j.at("task_id").get<std::string>();
      label.key.model_id = j.at("model_id").get<std::string>();
      auto variant_text = j.at("variant").get<std::string>();
      auto variant = process::parse_variant(variant_text);
      if (!variant) {
        v.push_back({line, ViolationKind::Malformed, fmt::format("unknown variant '{}'", variant_text)});
        continue;
      }
      label.key.variant = *variant;
      label.primary = j.at("primary").get<bool>();
    } catch (const json::exception& e) {
      v.push_back({line, ViolationKind::Malformed, e.what()});
      continue;
    }
    auto pair = read_pair(j, line, v);
    if (!pair) continue;
    label.category = pair->category;
    label.subcategory = pair->subcategory;

    bool refs_ok = true;
    if (j.contains("cross_refs")) {
      if (!j["cross_refs"].is_array()) {
        v.push_back({line, ViolationKind::Malformed, "cross_refs must be an array"});
        continue;
      }
      for (const auto& ref : j["cross_refs"]) {
        if (!ref.is_object()) {
          v.push_back({line, ViolationKind::Malformed, "cross_ref must be an object"});
          refs_ok = false;
          break;
        }
        auto p = read_pair(ref, line, v);
        if (!p) {
          refs_ok = false;
          break;
        }
        label.cross_refs.emplace_back(p->category, p->subcategory);
      }
    }
    if (!refs_ok) continue;

    if (failing_runs && !failing_runs->count(label.key)) {
      v.push_back({line, ViolationKind::OrphanLabel,
                   fmt::format("no failing run {}", label.key.run_id())});
      continue;
    }
    first_line.emplace(label.key, line);
    if (label.primary) {
      auto [it, inserted] = primary_line.emplace(label.key, line);
      if (!inserted) {
        v.push_back({line, ViolationKind::DuplicatePrimary,
                     fmt::format("{} already has a primary label on line {}", label.key.run_id(),
                                 it->second)});
        continue;
      }
    }
    check.labels.push_back(std::move(label));
  }
  for (const auto& [key, l] : first_line) {
    if (!primary_line.count(key)) {
      v.push_back({l, ViolationKind::MissingPrimary, fmt::format("{} has no primary label", key.run_id())});
    }
  }
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
  return check;
}

std::vector<TaxonomyLabel> load_annotations(const std::filesystem::path& path,
                                            const std::optional<std::set<RunKey>>& failing_runs) {
  auto check = check_annotations(read_file(path), failing_runs);
  if (check.violations.empty()) return std::move(check.labels);
  switch (check.violations.front().kind) {
    case ViolationKind::UnknownSubcategory: throw UnknownSubcategory(std::move(check.violations));
    case ViolationKind::DuplicatePrimary: throw DuplicatePrimary(std::move(check.violations));
    case ViolationKind::OrphanLabel: throw OrphanLabel(std::move(check.violations));
    default: throw AnnotationError(std::move(check.violations));
  }
}

std::string label_to_json(const TaxonomyLabel& label) {
  json refs = json::array();
  for (const auto& [c, s] : label.cross_refs) {
    refs.push_back({{"category", to_string(c)}, {"subcategory", to_string(s)}});
  }
  json j = {{"task_id", label.key.task_id},
            {"variant", process::to_string(label.key.variant)},
            {"model_id", label.key.model_id},
            {"category", to_string(label.category)},
            {"subcategory", to_string(label.subcategory)},
            {"primary", label.primary},
            {"cross_refs", refs}};
  return j.dump();
}

long long TaxonomyMatrix::count(Category category, const Column& col) const {
  return lookup(category_cells, std::pair{category, col});
}
long long TaxonomyMatrix::count(Subcategory sub, const Column& col) const {
  return lookup(subcategory_cells, std::pair{sub, col});
}
long long TaxonomyMatrix::cross_ref_count(Category category, const Column& col) const {
  return lookup(cross_category_cells, std::pair{category, col});
}
long long TaxonomyMatrix::cross_ref_count(Subcategory sub, const Column& col) const {
  return lookup(cross_subcategory_cells, std::pair{sub, col});
}
long long TaxonomyMatrix::labelled_runs(const Column& col) const {
  long long n = 0;
  for (auto c : all_categories()) n += count(c, col);
  return n;
}
const std::set<std::string>& TaxonomyMatrix::runs(Category category, const Column& col) const {
  auto it = category_runs.find({category, col});
  return it == category_runs.end() ? empty_set() : it->second;
}
const std::set<std::string>& TaxonomyMatrix::runs(Subcategory sub, const Column& col) const {
  auto it = subcategory_runs.find({sub, col});
  return it == subcategory_runs.end() ? empty_set() : it->second;
}

TaxonomyMatrix build_taxonomy_matrix(const std::vector<TaxonomyLabel>& labels,
                                     ProcessVariant baseline, std::vector<std::string> models,
                                     std::vector<ProcessVariant> variants) {
  TaxonomyMatrix m;
  resolve_columns(models, variants, labels, baseline);
  m.models = models;
  m.variants = variants;
  m.baseline = baseline;
  std::set<RunKey> counted;
  for (const auto& l : labels) {
    Column col{l.key.model_id, l.key.variant};
    if (l.primary) {
      if (!counted.insert(l.key).second) {
        throw DuplicatePrimary({{l.line, ViolationKind::DuplicatePrimary, l.key.run_id()}});
      }
      ++m.category_cells[{l.category, col}];
      ++m.subcategory_cells[{l.subcategory, col}];
      m.category_runs[{l.category, col}].insert(l.key.run_id());
      m.subcategory_runs[{l.subcategory, col}].insert(l.key.run_id());
    } else {
      ++m.cross_category_cells[{l.category, col}];
      ++m.cross_subcategory_cells[{l.subcategory, col}];
    }
    for (const auto& [c, s] : l.cross_refs) {
      ++m.cross_category_cells[{c, col}];
      ++m.cross_subcategory_cells[{s, col}];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Suggestions

namespace {

std::optional<std::string> first_match(const std::string& text, const std::regex& re) {
  std::smatch m;
  if (std::regex_search(text, m, re)) return m[1].str();
  return std::nullopt;
}

bool contains(const std::string& text, std::string_view needle) {
  return text.find(needle) != std::string::npos;
}

}  // namespace

std::vector<LabelSuggestion> suggest_labels(const exec::ExecutionResult& result,
                                            const corpus::TaskSpec& task) {
  std::map<Subcategory, LabelSuggestion> best;
  auto suggest = [&](Subcategory sub, double score, std::string trigger) {
    auto it = best.find(sub);
    if (it != best.end() && it->second.score >= score) return;
    best[sub] = {category_of(sub), sub, score, std::move(trigger)};
  };

  std::set<std::string> methods;
  for (const auto& m : task.methods) methods.insert(m.name);
  std::set<std::string> imported;
  for (const auto& n : python::imported_names(task.ground_truth)) imported.insert(n);

  static const std::regex name_re(R"(name '([^']+)' is not defined)");
  static const std::regex attr_re(R"(object has no attribute '([^']+)')");
  static const std::regex module_attr_re(R"(module '([^']+)' has no attribute)");
  static const std::regex missing_module_re(R"(No module named '([^']+)')");

  auto examine = [&](const std::string& type, const std::string& tb, bool collection) {
    const bool in_tests = contains(tb, "tests.py");
    if (type == "SyntaxError" || type == "IndentationError" || type == "TabError") {
      suggest(Subcategory::SyntaxError, 0.95, fmt::format("{} while loading", type));
    } else if (type == "NameError") {
      auto name = first_match(tb, name_re).value_or("");
      if (!name.empty() && name == task.class_name) {
        suggest(Subcategory::MissingClass, 0.9, fmt::format("NameError on class '{}'", name));
      } else if (imported.count(name)) {
        suggest(in_tests ? Subcategory::MissingImportTest : Subcategory::MissingImport, 0.85,
                fmt::format("NameError on imported name '{}'", name));
      } else if (methods.count(name)) {
        suggest(Subcategory::MissingFunction, 0.8, fmt::format("NameError on method '{}'", name));
      } else {
        suggest(Subcategory::MissingVariable, 0.6, fmt::format("NameError on '{}'", name));
      }
    } else if (type == "AttributeError") {
      if (auto mod = first_match(tb, module_attr_re)) {
        suggest(Subcategory::VersionIncompatibility, 0.6,
                fmt::format("module '{}' lacks an attribute", *mod));
      } else {
        auto attr = first_match(tb, attr_re).value_or("");
        if (methods.count(attr)) {
          suggest(Subcategory::MissingFunction, 0.8, fmt::format("missing method '{}'", attr));
        } else {
          suggest(Subcategory::MissingVariable, 0.6, fmt::format("missing attribute '{}'", attr));
        }
      }
    } else if (type == "ModuleNotFoundError" || type == "ImportError") {
      auto mod = first_match(tb, missing_module_re).value_or("?");
      if (collection && in_tests) {
        suggest(Subcategory::MissingImportTest, 0.7, fmt::format("test import of '{}' failed", mod));
      } else {
        suggest(Subcategory::UndeclaredDependency, 0.75, fmt::format("module '{}' not installed", mod));
      }
    } else if (type == "TypeError") {
      if (contains(tb, "positional argument") || contains(tb, "keyword argument")) {
        suggest(Subcategory::SignatureMismatch, 0.75, "call does not match the signature");
      } else {
        suggest(Subcategory::TypeMismatch, 0.5, "TypeError on a returned value");
      }
    } else if (type == "ValueError") {
      if (contains(tb, "values to unpack")) {
        suggest(Subcategory::ArityMismatch, 0.75, "unpacking the wrong number of values");
      } else if (contains(tb, "raise ValueError")) {
        suggest(Subcategory::OverrestrictiveValidation, 0.55, "code raised ValueError on input");
      } else {
        suggest(Subcategory::FaultyValidation, 0.4, "ValueError");
      }
    } else if (type == "AssertionError") {
      suggest(Subcategory::WrongAlgorithm, 0.4, "assertion failed");
      if (contains(tb, "assertEqual") && (contains(tb, "!=") || contains(tb, "First differing"))) {
        suggest(Subcategory::FormatMismatch, 0.3, "returned value differs from expected");
      }
    } else if (type == "DeprecationWarning") {
      suggest(Subcategory::DeprecatedDependency, 0.7, "deprecated API");
    } else if (type == "ZeroDivisionError" || type == "IndexError" || type == "KeyError") {
      suggest(Subcategory::WrongEdgeCaseHandling, 0.5, fmt::format("{} on boundary input", type));
    } else if (!type.empty()) {
      suggest(Subcategory::WrongAlgorithm, 0.2, fmt::format("unclassified {}", type));
    }
  };

  if (result.timed_out) suggest(Subcategory::Timeout, 0.9, exec::kTimeLimitExceeded);
  if (result.collection_error) {
    examine(result.collection_error->exception_type, result.collection_error->traceback, true);
  }
  for (const auto& o : result.per_test) {
    if (o.status == exec::TestStatus::Pass) continue;
    examine(o.exception_type.value_or(""), o.traceback, false);
  }

  std::vector<LabelSuggestion> out;
  for (auto& [sub, s] : best) out.push_back(std::move(s));
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

}  // namespace cascade::analysis
