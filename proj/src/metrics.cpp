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

#include "cascade/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cascade/analysis.hpp"
#include "cascade/python_source.hpp"

using nlohmann::json;

namespace cascade::metrics {

double pass_at_k(const PassAtKInput& in) {
  if (in.n < 1 || in.c < 0 || in.c > in.n || in.k < 1 || in.k > in.n) {
    throw DomainError(fmt::format("pass@k needs 0 <= c <= n and 1 <= k <= n (n={}, c={}, k={})",
                                  in.n, in.c, in.k));
  }
  if (in.n - in.c < in.k) return 1.0;
  double miss = 1.0;  // C(n-c, k) / C(n, k)
  for (long long i = in.n - in.c + 1; i <= in.n; ++i) {
    miss *= 1.0 - static_cast<double>(in.k) / static_cast<double>(i);
  }
  return 1.0 - miss;
}

bool class_correct(const exec::ExecutionResult& eval) { return eval.all_passed(); }

std::size_t FunctionScore::correct() const {
  return static_cast<std::size_t>(
      std::count_if(methods.begin(), methods.end(), [](const auto& m) { return m.second; }));
}

FunctionScore function_pass1(const exec::ExecutionResult& eval,
                             const std::map<std::string, std::string>& test_map,
                             const std::vector<corpus::TestGroup>& groups) {
  std::map<std::string, std::map<std::string, exec::TestStatus>> seen;
  for (const auto& o : eval.per_test) seen[o.group][o.case_name] = o.status;

  auto group_passed = [&](const std::string& group) {
    if (eval.collection_error) return false;
    auto it = seen.find(group);
    if (it == seen.end() || it->second.empty()) return false;
    for (const auto& [name, status] : it->second) {
      if (status != exec::TestStatus::Pass) return false;
    }
    for (const auto& g : groups) {
      if (g.name != group) continue;
      for (const auto& c : g.cases) {
        if (!it->second.count(c)) return false;
      }
    }
    return true;
  };

  FunctionScore score;
  for (const auto& [group, method] : test_map) {
    if (method == corpus::kWholeClass) continue;
    auto [it, inserted] = score.methods.emplace(method, true);
    it->second = it->second && group_passed(group);
  }
  return score;
}

std::optional<double> aggregate_function_pass1(const std::vector<FunctionScore>& scores) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& s : scores) {
    correct += s.correct();
    total += s.total();
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

long long count_ncloc(std::string_view source) {
  long long n = 0;
  for (const auto& line : python::scan(source).lines) n += line.kind == python::LineKind::Code;
  return n;
}

std::string_view to_string(SoftwareQuality q) {
  switch (q) {
    case SoftwareQuality::Security: return "Security";
    case SoftwareQuality::Reliability: return "Reliability";
    case SoftwareQuality::Maintainability: return "Maintainability";
  }
  return "?";
}

std::string_view to_string(CleanCodeAttribute a) {
  switch (a) {
    case CleanCodeAttribute::Consistency: return "Consistency";
    case CleanCodeAttribute::Intentionality: return "Intentionality";
    case CleanCodeAttribute::Adaptability: return "Adaptability";
    case CleanCodeAttribute::Responsibility: return "Responsibility";
  }
  return "?";
}

namespace {

std::string lower(std::string_view text) {
  std::string out;
  for (char c : text) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::optional<SoftwareQuality> parse_software_quality(std::string_view text) {
  const auto t = lower(text);
  for (auto q : {SoftwareQuality::Security, SoftwareQuality::Reliability,
                 SoftwareQuality::Maintainability}) {
    if (lower(to_string(q)) == t) return q;
  }
  return std::nullopt;
}

std::optional<CleanCodeAttribute> parse_clean_code_attribute(std::string_view text) {
  // The analyzer's own spelling uses adjectives (CONSISTENT, INTENTIONAL, ...).
  static const std::map<std::string, CleanCodeAttribute> names = {
      {"consistency", CleanCodeAttribute::Consistency},
      {"consistent", CleanCodeAttribute::Consistency},
      {"intentionality", CleanCodeAttribute::Intentionality},
      {"intentional", CleanCodeAttribute::Intentionality},
      {"adaptability", CleanCodeAttribute::Adaptability},
      {"adaptable", CleanCodeAttribute::Adaptability},
      {"responsibility", CleanCodeAttribute::Responsibility},
      {"responsible", CleanCodeAttribute::Responsibility},
  };
  auto it = names.find(lower(text));
  if (it == names.end()) return std::nullopt;
  return it->second;
}

Densities issue_density(const std::vector<QualityIssue>& issues, long long total_ncloc) {
  if (total_ncloc <= 0) throw DomainError("total ncLOC must be positive");
  Densities d;
  for (auto q : {SoftwareQuality::Security, SoftwareQuality::Reliability,
                 SoftwareQuality::Maintainability}) {
    d.software_quality[q] = 0.0;
  }
  for (auto a : {CleanCodeAttribute::Consistency, CleanCodeAttribute::Intentionality,
                 CleanCodeAttribute::Adaptability, CleanCodeAttribute::Responsibility}) {
    d.clean_code[a] = 0.0;
  }
  std::map<SoftwareQuality, long long> sq;
  std::map<CleanCodeAttribute, long long> cc;
  for (const auto& i : issues) {
    if (i.software_quality) ++sq[*i.software_quality];
    if (i.clean_code_attribute) ++cc[*i.clean_code_attribute];
  }
  const double ncloc = static_cast<double>(total_ncloc);
  for (auto [q, n] : sq) d.software_quality[q] = static_cast<double>(n) * 10.0 / ncloc;
  for (auto [a, n] : cc) d.clean_code[a] = static_cast<double>(n) * 10.0 / ncloc;
  return d;
}

long long relative_change(double value, double baseline) {
  return analysis::percent_change(value, baseline);
}

IssueExport parse_issue_export(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw MalformedIssueExport(fmt::format("not valid JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("issues") || !j["issues"].is_array()) {
    throw MalformedIssueExport("export lacks an issues array");
  }
  IssueExport out;
  if (j.contains("ncloc") && j["ncloc"].is_number_integer()) out.ncloc = j["ncloc"].get<long long>();

  std::size_t index = 0;
  for (const auto& item : j["issues"]) {
    auto where = [&] { return fmt::format("issues[{}]", index); };
    if (!item.is_object()) throw MalformedIssueExport(fmt::format("{}: not an object", where()));
    QualityIssue issue;
    auto str = [&](const char* key) -> std::optional<std::string> {
      if (!item.contains(key) || item[key].is_null()) return std::nullopt;
      if (!item[key].is_string()) {
        throw MalformedIssueExport(fmt::format("{}: '{}' must be a string", where(), key));
      }
      return item[key].get<std::string>();
    };

    issue.rule_id = str("rule").value_or("");
    if (issue.rule_id.empty()) throw MalformedIssueExport(fmt::format("{}: missing rule", where()));

    std::optional<std::string> quality = str("category");
    if (!quality && item.contains("impacts") && item["impacts"].is_array() &&
        !item["impacts"].empty()) {
      const auto& impact = item["impacts"].front();
      if (impact.is_object() && impact.contains("softwareQuality") &&
          impact["softwareQuality"].is_string()) {
        quality = impact["softwareQuality"].get<std::string>();
      }
    }
    if (quality) {
      issue.software_quality = parse_software_quality(*quality);
      if (!issue.software_quality) {
        throw MalformedIssueExport(
            fmt::format("{}: unknown software quality '{}'", where(), *quality));
      }
    }

    auto attribute = str("attribute");
    if (!attribute) attribute = str("cleanCodeAttributeCategory");
    if (attribute) {
      issue.clean_code_attribute = parse_clean_code_attribute(*attribute);
      if (!issue.clean_code_attribute) {
        throw MalformedIssueExport(
            fmt::format("{}: unknown clean code attribute '{}'", where(), *attribute));
      }
    }
    if (!issue.software_quality && !issue.clean_code_attribute) {
      throw MalformedIssueExport(fmt::format("{}: issue {} has no category", where(), issue.rule_id));
    }

    if (item.contains("location") && item["location"].is_object()) {
      const auto& loc = item["location"];
      issue.file = loc.value("file", "");
      issue.line = loc.value("line", 0LL);
    } else {
      issue.file = str("component").value_or("");
      if (item.contains("line") && item["line"].is_number_integer()) issue.line = item["line"];
    }
    out.issues.push_back(std::move(issue));
    ++index;
  }
  return out;
}

std::vector<QualityIssue> import_issue_report(const std::filesystem::path& path) {
  return parse_issue_export(read_file(path)).issues;
}

QualityReport build_quality_report(const IssueExport& export_data,
                                   const std::vector<std::string>& sources) {
  QualityReport report;
  report.issues = export_data.issues;
  for (const auto& s : sources) report.total_ncloc += count_ncloc(s);
  if (export_data.ncloc && *export_data.ncloc != report.total_ncloc) {
    report.warnings.push_back(fmt::format("analyzer reports {} ncLOC, counted {}",
                                          *export_data.ncloc, report.total_ncloc));
  }
  report.densities = issue_density(report.issues, report.total_ncloc);
  return report;
}

}  // namespace cascade::metrics
