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
#include <vector>

#include "cascade/corpus.hpp"
#include "cascade/exec.hpp"

namespace cascade::metrics {

struct PassAtKInput {
  long long n = 1;  // samples generated per task
  long long c = 0;  // correct samples
  long long k = 1;  // samples drawn
};

/// 1 - C(n-c, k) / C(n, k) as a product of ratios; never forms a binomial.
/// Throws DomainError unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(const PassAtKInput& input);

/// Every outcome passed, nothing failed to load, no timeout.
bool class_correct(const exec::ExecutionResult& eval);

struct FunctionScore {
  std::map<std::string, bool> methods;  // only methods with at least one mapped group
  std::size_t correct() const;
  std::size_t total() const { return methods.size(); }
};

/// A method is correct when every test group mapped to it passed in full.
/// With `groups`, a group also needs an outcome for each of its cases.
/// Groups mapped to the whole class are ignored here.
FunctionScore function_pass1(const exec::ExecutionResult& eval,
                             const std::map<std::string, std::string>& test_map,
                             const std::vector<corpus::TestGroup>& groups = {});

/// Mean over all (task, method) pairs; tasks without mapped methods add
/// nothing. nullopt when no pair exists.
std::optional<double> aggregate_function_pass1(const std::vector<FunctionScore>& scores);

/// Lines that are neither blank nor comment-only; documentation strings count
/// as comment-only.
long long count_ncloc(std::string_view source);

enum class SoftwareQuality { Security, Reliability, Maintainability };
enum class CleanCodeAttribute { Consistency, Intentionality, Adaptability, Responsibility };

std::string_view to_string(SoftwareQuality q);
std::string_view to_string(CleanCodeAttribute a);
std::optional<SoftwareQuality> parse_software_quality(std::string_view text);
std::optional<CleanCodeAttribute> parse_clean_code_attribute(std::string_view text);

struct QualityIssue {
  std::string rule_id;
  std::optional<SoftwareQuality> software_quality;
  std::optional<CleanCodeAttribute> clean_code_attribute;
  std::string file;
  long long line = 0;

  bool operator==(const QualityIssue&) const = default;
};

/// One density per category, issues per 10 ncLOC.
struct Densities {
  std::map<SoftwareQuality, double> software_quality;
  std::map<CleanCodeAttribute, double> clean_code;

  double at(SoftwareQuality q) const { return software_quality.at(q); }
  double at(CleanCodeAttribute a) const { return clean_code.at(a); }
};

/// count * 10 / total_ncloc for every category, zeros included. Throws
/// DomainError when total_ncloc <= 0.
Densities issue_density(const std::vector<QualityIssue>& issues, long long total_ncloc);

/// Signed integer percent versus the baseline, rounded half away from zero.
long long relative_change(double value, double baseline);

class MalformedIssueExport : public Error {
 public:
  using Error::Error;
};

struct IssueExport {
  std::vector<QualityIssue> issues;
  std::optional<long long> ncloc;  // as reported by the analyzer, if present
};

/// Reads an issue export (see docs/quality-export.md).
IssueExport parse_issue_export(std::string_view json_text);
std::vector<QualityIssue> import_issue_report(const std::filesystem::path& path);

struct QualityReport {
  std::vector<QualityIssue> issues;
  long long total_ncloc = 0;
  Densities densities;
  std::vector<std::string> warnings;
};

/// Densities over natively counted ncLOC; a differing analyzer figure is
/// kept as a warning.
QualityReport build_quality_report(const IssueExport& export_data,
                                   const std::vector<std::string>& sources);

}  // namespace cascade::metrics
