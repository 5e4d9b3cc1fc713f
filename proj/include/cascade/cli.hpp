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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cascade/analysis.hpp"
#include "cascade/gateway.hpp"
#include "cascade/metrics.hpp"
#include "cascade/process.hpp"

namespace cascade::cli {

/// One experiment. Stored as JSON; relative paths resolve against the
/// config file's directory.
struct Config {
  std::vector<std::string> models;
  std::vector<process::ProcessVariant> variants = process::all_variants();
  std::filesystem::path corpus;
  std::filesystem::path runs_dir = "runs";
  std::filesystem::path reports_dir = "reports";
  std::filesystem::path labels_dir = "labels";
  gateway::Provider provider = gateway::Provider::Scripted;
  std::filesystem::path cassette;  // default <runs_dir>/cassette.jsonl
  std::optional<std::filesystem::path> templates_dir;
  agents::GenerationParams params;
  double timeout_s = exec::kDefaultTimeoutSeconds;
  int refinement_rounds = 1;
  int bugfix_cap = process::kDefaultBugfixCap;
  std::size_t jobs = 1;
  std::filesystem::path runner;
  std::vector<std::string> runner_args;
  process::ProcessVariant baseline = process::ProcessVariant::RawPrompt;

  std::filesystem::path cassette_path() const;
  /// Canonical JSON of every field.
  std::string to_json() const;
  /// Hash of the canonical JSON without `jobs`, which only affects scheduling.
  std::string digest() const;
  void validate() const;

  static Config from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static Config load(const std::filesystem::path& path);
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ManifestEntry {
  process::RunDescriptor descriptor;
  std::string status = "Pending";  // Pending, a RunStatus name, or Error
  std::string error;
};

struct RunManifest {
  std::string config_digest;
  std::string corpus_fingerprint;
  gateway::Provider provider = gateway::Provider::Scripted;
  std::vector<ManifestEntry> entries;

  std::size_t count(std::string_view status) const;
  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

inline constexpr const char* kManifestFile = "manifest.json";

/// Supplies the gateway for a run; the default builds it from the config.
using GatewayFactory = std::function<std::shared_ptr<gateway::ModelGateway>(const Config&)>;

struct RunOptions {
  GatewayFactory gateway_factory;          // overrides provider selection
  process::ScriptExecutor executor;        // overrides the configured runner
  bool keep_sandbox = false;
};

/// Runs every grid cell not yet Completed under an identical config and
/// returns the updated manifest. Throws ConfigError when the runs directory
/// holds a manifest for a different config.
RunManifest cmd_run(const Config& config, const RunOptions& options = {});

struct EvaluateSummary {
  std::size_t evaluated = 0;
  std::size_t not_evaluated = 0;
  std::size_t failed = 0;  // runner errors
  std::vector<std::string> errors;
};

EvaluateSummary cmd_evaluate(const Config& config, bool keep_sandbox = false);

struct ReplayDiff {
  std::string run_id;
  bool identical = false;
  std::string detail;
};

/// Re-runs every Completed cell against the recorded cassette into
/// `out_runs_dir` and compares record.jsonl byte for byte.
std::vector<ReplayDiff> cmd_replay(const Config& config, const std::filesystem::path& out_runs_dir,
                                   const RunOptions& options = {});

class MissingData : public Error {
 public:
  explicit MissingData(std::vector<std::string> cells);
  const std::vector<std::string>& cells() const { return cells_; }

 private:
  std::vector<std::string> cells_;
};

/// Aligned text and CSV renderings of one report, plus per-cell run ids.
struct RenderedReport {
  std::string text;
  std::string csv;
  std::string provenance_csv;
};

struct RunEvaluation {
  analysis::RunKey key;
  bool evaluated = false;
  std::optional<exec::ExecutionResult> result;
  std::optional<metrics::IssueExport> issues;
  std::string final_code;
};

/// Loads eval.json (and issues.json when present) for every manifest entry.
/// Throws MissingData listing runs without eval.json.
std::vector<RunEvaluation> collect_evaluations(const Config& config, const RunManifest& manifest);

struct MetricRow {
  std::string model_id;
  process::ProcessVariant variant = process::ProcessVariant::RawPrompt;
  long long n = 1;  // samples per task
  long long tasks = 0;
  double class_pass1 = 0.0;
  std::optional<double> function_pass1;
  std::optional<metrics::Densities> densities;
  long long ncloc = 0;
  std::vector<std::string> run_ids;
};

std::vector<MetricRow> compute_metric_rows(const Config& config, const corpus::Corpus& corpus,
                                           const std::vector<RunEvaluation>& evals);

RenderedReport render_comparison(const std::vector<MetricRow>& rows,
                                 process::ProcessVariant baseline, bool provenance);
RenderedReport render_errors(const analysis::FrequencyTable& table, bool provenance);
RenderedReport render_taxonomy(const analysis::TaxonomyMatrix& matrix, bool provenance);

enum class ReportKind { Comparison, Errors, Taxonomy };
std::optional<ReportKind> parse_report_kind(std::string_view text);

/// Writes <reports_dir>/<kind>.txt and .csv (and .provenance.csv when
/// requested); returns the text rendering.
std::string cmd_report(const Config& config, ReportKind kind, bool provenance);

/// Frequency table over every evaluated run.
analysis::FrequencyTable errors_table(const Config& config);

/// Validates every labels/*.jsonl file against the failing runs, writes
/// advisory suggestions for failing runs that still lack a primary label to
/// <labels_dir>/suggestions.jsonl, and returns the matrix.
analysis::TaxonomyMatrix taxonomy_matrix(const Config& config);

/// Entry point used by the executable; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace cascade::cli
