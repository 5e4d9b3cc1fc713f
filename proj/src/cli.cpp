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

#include "cascade/cli.hpp"

#include <algorithm>
#include <iostream>
#include <mutex>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cascade::cli {

using process::ProcessVariant;

// ---------------------------------------------------------------------------
// Config

fs::path Config::cassette_path() const {
  return cassette.empty() ? runs_dir / "cassette.jsonl" : cassette;
}

std::string Config::to_json() const {
  json variants_json = json::array();
  for (auto v : variants) variants_json.push_back(process::to_string(v));
  json params_json = {{"temperature", params.temperature},
                      {"max_output_tokens", params.max_output_tokens},
                      {"retry_limit", params.retry_limit},
                      {"seed", params.seed ? json(*params.seed) : json()}};
  json j = {{"models", models},
            {"variants", variants_json},
            {"corpus", corpus.string()},
            {"runs_dir", runs_dir.string()},
            {"reports_dir", reports_dir.string()},
            {"labels_dir", labels_dir.string()},
            {"provider", gateway::to_string(provider)},
            {"cassette", cassette_path().string()},
            {"templates_dir", templates_dir ? json(templates_dir->string()) : json()},
            {"params", params_json},
            {"timeout_s", timeout_s},
            {"refinement_rounds", refinement_rounds},
            {"bugfix_cap", bugfix_cap},
            {"jobs", jobs},
            {"runner", runner.string()},
            {"runner_args", runner_args},
            {"baseline", process::to_string(baseline)}};
  return j.dump();
}

std::string Config::digest() const {
  auto j = json::parse(to_json());
  j.erase("jobs");
  return sha256_hex(j.dump());
}

void Config::validate() const {
  if (models.empty()) throw ConfigError("config lists no models");
  if (variants.empty()) throw ConfigError("config lists no variants");
  if (corpus.empty()) throw ConfigError("config names no corpus");
  if (!(timeout_s > 0.0)) throw ConfigError("timeout_s must be positive");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (refinement_rounds < 0 || bugfix_cap < 0) {
    throw ConfigError("refinement_rounds and bugfix_cap must be non-negative");
  }
  try {
    params.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

Config Config::from_json(std::string_view text, const fs::path& base_dir) {
  static const std::set<std::string> known = {
      "models",  "variants",      "corpus",    "runs_dir",   "reports_dir",
      "labels_dir", "provider",   "cassette",  "templates_dir", "params",
      "timeout_s", "refinement_rounds", "bugfix_cap", "jobs", "runner",
      "runner_args", "baseline"};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  Config c;
  try {
    c.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j["variants"]) {
        auto parsed = process::parse_variant(v.get<std::string>());
        if (!parsed) throw ConfigError(fmt::format("unknown variant {}", v.dump()));
        c.variants.push_back(*parsed);
      }
    }
    c.corpus = resolve(j.at("corpus").get<std::string>());
    c.runs_dir = resolve(j.value("runs_dir", "runs"));
    c.reports_dir = resolve(j.value("reports_dir", "reports"));
    c.labels_dir = resolve(j.value("labels_dir", "labels"));
    if (j.contains("provider")) {
      auto p = gateway::parse_provider(j["provider"].get<std::string>());
      if (!p) throw ConfigError(fmt::format("unknown provider {}", j["provider"].dump()));
      c.provider = *p;
    }
    if (j.contains("cassette")) c.cassette = resolve(j["cassette"].get<std::string>());
    if (j.contains("templates_dir") && !j["templates_dir"].is_null()) {
      c.templates_dir = resolve(j["templates_dir"].get<std::string>());
    }
    if (j.contains("params")) {
      const auto& p = j["params"];
      for (const auto& [key, value] : p.items()) {
        if (key != "temperature" && key != "max_output_tokens" && key != "retry_limit" &&
            key != "seed") {
          throw ConfigError(fmt::format("unknown params key '{}'", key));
        }
      }
      c.params.temperature = p.value("temperature", c.params.temperature);
      c.params.max_output_tokens = p.value("max_output_tokens", c.params.max_output_tokens);
      c.params.retry_limit = p.value("retry_limit", c.params.retry_limit);
      if (p.contains("seed") && !p["seed"].is_null()) c.params.seed = p["seed"].get<long long>();
    }
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.refinement_rounds = j.value("refinement_rounds", c.refinement_rounds);
    c.bugfix_cap = j.value("bugfix_cap", c.bugfix_cap);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("runner")) c.runner = resolve(j["runner"].get<std::string>());
    c.runner_args = j.value("runner_args", std::vector<std::string>{});
    if (j.contains("baseline")) {
      auto b = process::parse_variant(j["baseline"].get<std::string>());
      if (!b) throw ConfigError(fmt::format("unknown baseline {}", j["baseline"].dump()));
      c.baseline = *b;
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad config: {}", e.what()));
  }
  c.validate();
  return c;
}

Config Config::load(const fs::path& path) {
  return from_json(read_file(path), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Manifest

std::size_t RunManifest::count(std::string_view status) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.status == status; }));
}

std::string RunManifest::to_json() const {
  json runs = json::array();
  for (const auto& e : entries) {
    runs.push_back({{"run_id", e.descriptor.run_id},
                    {"task_id", e.descriptor.task_id},
                    {"variant", process::to_string(e.descriptor.variant)},
                    {"model_id", e.descriptor.model_id},
                    {"status", e.status},
                    {"error", e.error}});
  }
  json j = {{"config_digest", config_digest},
            {"corpus_fingerprint", corpus_fingerprint},
            {"provider", gateway::to_string(provider)},
            {"runs", runs}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    auto j = json::parse(text);
    m.config_digest = j.at("config_digest");
    m.corpus_fingerprint = j.at("corpus_fingerprint");
    m.provider = gateway::parse_provider(j.at("provider").get<std::string>()).value();
    for (const auto& r : j.at("runs")) {
      ManifestEntry e;
      e.descriptor.run_id = r.at("run_id");
      e.descriptor.task_id = r.at("task_id");
      e.descriptor.variant = process::parse_variant(r.at("variant").get<std::string>()).value();
      e.descriptor.model_id = r.at("model_id");
      e.status = r.at("status");
      e.error = r.value("error", "");
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(fmt::format("bad manifest: {}", e.what()));
  } catch (const std::bad_optional_access&) {
    throw Error("bad manifest: unknown enum value");
  }
  return m;
}

void RunManifest::save(const fs::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, to_json());
  fs::rename(tmp, path);
}

RunManifest RunManifest::load(const fs::path& path) { return from_json(read_file(path)); }

// ---------------------------------------------------------------------------
// Run / evaluate / replay

namespace {

exec::RunnerHandle runner_handle(const Config& config) {
  if (config.runner.empty()) throw ConfigError("config names no runner");
  return {config.runner, config.runner_args};
}

agents::TemplateSet templates_for(const Config& config) {
  return config.templates_dir ? agents::TemplateSet::load(*config.templates_dir)
                              : agents::TemplateSet::defaults();
}

process::ScriptExecutor executor_for(const Config& config, const RunOptions& options) {
  if (options.executor) return options.executor;
  bool testing = std::any_of(config.variants.begin(), config.variants.end(), [](auto v) {
    auto acts = process::activities(v);
    return std::find(acts.begin(), acts.end(), process::Activity::Testing) != acts.end();
  });
  if (!testing) return {};
  return process::runner_executor(runner_handle(config), config.timeout_s, options.keep_sandbox);
}

RunManifest open_manifest(const Config& config, const corpus::Corpus& corpus) {
  const auto path = config.runs_dir / kManifestFile;
  const auto grid = process::ablation_grid(config.models, config.variants, corpus);
  RunManifest manifest;
  std::error_code ec;
  if (fs::exists(path, ec)) {
    manifest = RunManifest::load(path);
    if (manifest.config_digest != config.digest()) {
      throw ConfigError(fmt::format("{} was written for a different config", path.string()));
    }
    if (manifest.corpus_fingerprint != corpus.fingerprint()) {
      throw ConfigError(fmt::format("{} was written for a different corpus", path.string()));
    }
    return manifest;
  }
  manifest.config_digest = config.digest();
  manifest.corpus_fingerprint = corpus.fingerprint();
  manifest.provider = config.provider;
  for (const auto& d : grid) manifest.entries.push_back({d, "Pending", {}});
  return manifest;
}

bool completed_on_disk(const Config& config, const ManifestEntry& entry) {
  if (entry.status != process::to_string(process::RunStatus::Completed)) return false;
  std::error_code ec;
  return fs::exists(config.runs_dir / entry.descriptor.run_id / process::kRecordFile, ec);
}

}  // namespace

RunManifest cmd_run(const Config& config, const RunOptions& options) {
  config.validate();
  const auto corpus = corpus::load_corpus(config.corpus);
  auto manifest = open_manifest(config, corpus);
  const auto manifest_path = config.runs_dir / kManifestFile;
  fs::create_directories(config.runs_dir);
  manifest.save(manifest_path);

  std::shared_ptr<gateway::Cassette> cassette;
  std::shared_ptr<gateway::ModelGateway> gw;
  if (options.gateway_factory) {
    gw = options.gateway_factory(config);
  } else if (config.provider == gateway::Provider::Replay) {
    gw = std::make_shared<gateway::ReplayGateway>(
        std::make_shared<gateway::Cassette>(gateway::Cassette::load(config.cassette_path())));
  } else {
    std::error_code ec;
    cassette = fs::exists(config.cassette_path(), ec)
                   ? std::make_shared<gateway::Cassette>(gateway::Cassette::load(config.cassette_path()))
                   : std::make_shared<gateway::Cassette>();
    std::shared_ptr<gateway::ModelGateway> inner;
    if (config.provider == gateway::Provider::Live) {
      inner = std::make_shared<gateway::LiveGateway>();
    } else {
      inner = std::make_shared<gateway::ScriptedGateway>(process::oracle_script(corpus));
    }
    gw = std::make_shared<gateway::RecordingGateway>(inner, cassette);
  }

  const auto executor = executor_for(config, options);
  const auto templates = templates_for(config);
  std::map<ProcessVariant, process::ActivityGraph> graphs;
  for (auto v : config.variants) {
    graphs.emplace(v, process::build_pipeline(v, config.refinement_rounds, config.bugfix_cap));
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!completed_on_disk(config, manifest.entries[i])) pending.push_back(i);
  }
  spdlog::info("{} of {} runs pending", pending.size(), manifest.entries.size());

  std::mutex mutex;
  parallel_for(pending.size(), config.jobs, [&](std::size_t n) {
    auto& entry = manifest.entries[pending[n]];
    const auto& d = entry.descriptor;
    std::string status;
    std::string error;
    try {
      const auto* task = corpus.find(d.task_id);
      if (!task) throw Error("task not in corpus");
      auto record = process::run_pipeline(*task, graphs.at(d.variant), *gw, config.params,
                                          d.model_id, executor, templates);
      process::save_run(record, config.runs_dir);
      status = process::to_string(record.status);
      error = record.error;
    } catch (const std::exception& e) {
      status = "Error";
      error = e.what();
    }
    std::lock_guard lock(mutex);
    entry.status = status;
    entry.error = error;
    if (status != "Completed") spdlog::warn("{}: {} {}", d.run_id, status, error);
    manifest.save(manifest_path);
    if (cassette) cassette->save(config.cassette_path());
  });
  if (cassette) cassette->save(config.cassette_path());
  manifest.save(manifest_path);
  return manifest;
}

EvaluateSummary cmd_evaluate(const Config& config, bool keep_sandbox) {
  config.validate();
  const auto corpus = corpus::load_corpus(config.corpus);
  const auto manifest = RunManifest::load(config.runs_dir / kManifestFile);
  const auto runner = runner_handle(config);

  EvaluateSummary summary;
  std::mutex mutex;
  parallel_for(manifest.entries.size(), config.jobs, [&](std::size_t i) {
    const auto& d = manifest.entries[i].descriptor;
    const auto dir = config.runs_dir / d.run_id;
    std::error_code ec;
    if (!fs::exists(dir / process::kRecordFile, ec)) {
      std::lock_guard lock(mutex);
      ++summary.failed;
      summary.errors.push_back(fmt::format("{}: no run record", d.run_id));
      return;
    }
    try {
      auto record = process::load_run(dir);
      const auto* task = corpus.find(d.task_id);
      if (!task) throw Error("task not in corpus");
      auto result =
          process::evaluate_final_code(record, *task, runner, config.timeout_s, dir, keep_sandbox);
      std::lock_guard lock(mutex);
      ++(result ? summary.evaluated : summary.not_evaluated);
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex);
      ++summary.failed;
      summary.errors.push_back(fmt::format("{}: {}", d.run_id, e.what()));
    }
  });
  std::sort(summary.errors.begin(), summary.errors.end());
  return summary;
}

std::vector<ReplayDiff> cmd_replay(const Config& config, const fs::path& out_runs_dir,
                                   const RunOptions& options) {
  config.validate();
  const auto corpus = corpus::load_corpus(config.corpus);
  const auto manifest = RunManifest::load(config.runs_dir / kManifestFile);
  std::shared_ptr<gateway::ModelGateway> gw =
      options.gateway_factory
          ? options.gateway_factory(config)
          : std::make_shared<gateway::ReplayGateway>(std::make_shared<gateway::Cassette>(
                gateway::Cassette::load(config.cassette_path())));
  const auto executor = executor_for(config, options);
  const auto templates = templates_for(config);

  std::vector<ReplayDiff> diffs;
  for (const auto& entry : manifest.entries) {
    if (!completed_on_disk(config, entry)) continue;
    const auto& d = entry.descriptor;
    ReplayDiff diff{d.run_id, false, {}};
    try {
      const auto* task = corpus.find(d.task_id);
      if (!task) throw Error("task not in corpus");
      auto graph = process::build_pipeline(d.variant, config.refinement_rounds, config.bugfix_cap);
      auto record =
          process::run_pipeline(*task, graph, *gw, config.params, d.model_id, executor, templates);
      auto dir = process::save_run(record, out_runs_dir);
      auto original = read_file(config.runs_dir / d.run_id / process::kRecordFile);
      auto replayed = read_file(dir / process::kRecordFile);
      diff.identical = original == replayed;
      if (!diff.identical) {
        auto a = split_lines(original);
        auto b = split_lines(replayed);
        std::size_t k = 0;
        while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
        diff.detail = fmt::format("first difference on line {}", k + 1);
      }
    } catch (const std::exception& e) {
      diff.detail = e.what();
    }
    diffs.push_back(std::move(diff));
  }
  return diffs;
}

// ---------------------------------------------------------------------------
// Data collection

MissingData::MissingData(std::vector<std::string> cells)
    : Error(fmt::format("missing data for: {}", fmt::join(cells, ", "))), cells_(std::move(cells)) {}

std::vector<RunEvaluation> collect_evaluations(const Config& config, const RunManifest& manifest) {
  std::vector<RunEvaluation> out;
  std::vector<std::string> missing;
  for (const auto& entry : manifest.entries) {
    const auto& d = entry.descriptor;
    const auto dir = config.runs_dir / d.run_id;
    std::error_code ec;
    if (!fs::exists(dir / process::kEvalFile, ec)) {
      missing.push_back(d.run_id);
      continue;
    }
    RunEvaluation ev;
    ev.key = {d.task_id, d.variant, d.model_id};
    try {
      auto j = json::parse(read_file(dir / process::kEvalFile));
      ev.evaluated = j.at("evaluated").get<bool>();
      if (ev.evaluated) ev.result = exec::execution_result_from_json(j.at("result"));
    } catch (const json::exception& e) {
      throw Error(fmt::format("{}: bad {}: {}", d.run_id, process::kEvalFile, e.what()));
    }
    if (fs::exists(dir / "issues.json", ec)) {
      ev.issues = metrics::parse_issue_export(read_file(dir / "issues.json"));
    }
    if (fs::exists(dir / process::kRecordFile, ec)) {
      ev.final_code = process::load_run(dir).final_code;
    }
    out.push_back(std::move(ev));
  }
  if (!missing.empty()) throw MissingData(std::move(missing));
  return out;
}

std::vector<MetricRow> compute_metric_rows(const Config& config, const corpus::Corpus& corpus,
                                           const std::vector<RunEvaluation>& evals) {
  std::vector<MetricRow> rows;
  for (const auto& model : config.models) {
    for (auto variant : config.variants) {
      MetricRow row;
      row.model_id = model;
      row.variant = variant;
      double class_sum = 0.0;
      std::vector<metrics::FunctionScore> scores;
      std::vector<metrics::QualityIssue> issues;
      bool any_issues = false;
      for (const auto& ev : evals) {
        if (ev.key.model_id != model || ev.key.variant != variant) continue;
        const auto* task = corpus.find(ev.key.task_id);
        if (!task) throw Error(fmt::format("task {} not in corpus", ev.key.task_id));
        ++row.tasks;
        row.run_ids.push_back(ev.key.run_id());
        const bool correct = ev.evaluated && metrics::class_correct(*ev.result);
        class_sum += metrics::pass_at_k({1, correct ? 1 : 0, 1});
        const auto test_map = corpus::map_tests_to_methods(*task);
        if (ev.evaluated) {
          scores.push_back(metrics::function_pass1(*ev.result, test_map, task->test_groups));
        } else {
          metrics::FunctionScore none;
          for (const auto& [group, method] : test_map) {
            if (method != corpus::kWholeClass) none.methods[method] = false;
          }
          scores.push_back(std::move(none));
        }
        if (ev.issues) {
          any_issues = true;
          issues.insert(issues.end(), ev.issues->issues.begin(), ev.issues->issues.end());
          row.ncloc += metrics::count_ncloc(ev.final_code);
        }
      }
      if (row.tasks == 0) continue;
      row.class_pass1 = class_sum / static_cast<double>(row.tasks);
      row.function_pass1 = metrics::aggregate_function_pass1(scores);
      if (any_issues && row.ncloc > 0) row.densities = metrics::issue_density(issues, row.ncloc);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string render() const {
    std::vector<std::size_t> widths;
    for (const auto& r : rows_) {
      if (widths.size() < r.size()) widths.resize(r.size(), 0);
      for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], display_width(r[i]));
    }
    std::string out;
    for (std::size_t ri = 0; ri < rows_.size(); ++ri) {
      const auto& r = rows_[ri];
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        std::string pad(widths[i] - display_width(r[i]), ' ');
        if (i > 0) line += "  ";
        line += i == 0 ? r[i] + pad : pad + r[i];
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out += line + "\n";
      if (ri == 0) {
        std::size_t total = 0;
        for (auto w : widths) total += w;
        out += std::string(total + 2 * (widths.size() - 1), '-') + "\n";
      }
    }
    return out;
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::vector<std::string> escaped;
  for (const auto& f : fields) escaped.push_back(csv_field(f));
  return fmt::format("{}\n", fmt::join(escaped, ","));
}

constexpr const char* kAbsent = "–";

std::string cell_text(const std::string& value, std::optional<long long> change) {
  return change ? fmt::format("{} ({})", value, analysis::format_percent(*change)) : value;
}

std::string zero_baseline_note(ProcessVariant baseline) {
  return fmt::format("Changes are relative to {}; when the baseline is 0 the change is the new "
                     "value x 100%.\n",
                     process::to_string(baseline));
}

struct Provenance {
  std::string csv = csv_line({"row", "column", "run_ids"});
  void add(const std::string& row, const std::string& column, const std::set<std::string>& runs) {
    csv += csv_line({row, column, fmt::format("{}", fmt::join(runs, ";"))});
  }
};

}  // namespace

RenderedReport render_comparison(const std::vector<MetricRow>& rows, ProcessVariant baseline,
                                 bool provenance) {
  using metrics::CleanCodeAttribute;
  using metrics::SoftwareQuality;
  std::map<std::string, const MetricRow*> base;
  for (const auto& r : rows) {
    if (r.variant == baseline) base[r.model_id] = &r;
  }
  for (const auto& r : rows) {
    if (!base.count(r.model_id)) throw analysis::MissingBaseline(baseline);
  }

  auto any_nonzero = [&](auto dim) {
    return std::any_of(rows.begin(), rows.end(), [&](const MetricRow& r) {
      return r.densities && r.densities->at(dim) != 0.0;
    });
  };
  std::vector<SoftwareQuality> sq = {SoftwareQuality::Reliability, SoftwareQuality::Maintainability};
  if (any_nonzero(SoftwareQuality::Security)) sq.insert(sq.begin(), SoftwareQuality::Security);
  std::vector<CleanCodeAttribute> cc = {CleanCodeAttribute::Consistency,
                                        CleanCodeAttribute::Intentionality,
                                        CleanCodeAttribute::Adaptability};
  if (any_nonzero(CleanCodeAttribute::Responsibility)) cc.push_back(CleanCodeAttribute::Responsibility);

  std::vector<std::string> header = {"Model", "Workflow", "n", "Class", "Function"};
  for (auto q : sq) header.emplace_back(metrics::to_string(q));
  for (auto a : cc) header.emplace_back(metrics::to_string(a));
  TextTable table(header);
  std::string csv = csv_line({"model", "variant", "n", "metric", "value", "change_pct", "direction"});
  Provenance prov;
  bool missing_quality = false;

  for (const auto& r : rows) {
    const MetricRow& b = *base.at(r.model_id);
    const bool is_base = r.variant == baseline;
    std::vector<std::string> cells = {r.model_id, std::string(process::to_string(r.variant)),
                                      std::to_string(r.n)};
    auto emit = [&](const std::string& metric, std::optional<double> value,
                    std::optional<double> base_value, bool higher_is_better) {
      if (!value) {
        cells.emplace_back("n/a");
        csv += csv_line({r.model_id, std::string(process::to_string(r.variant)),
                         std::to_string(r.n), metric, "n/a", "", ""});
        return;
      }
      auto text = fmt::format("{:.4f}", *value);
      std::optional<long long> change;
      if (!is_base && base_value) change = analysis::percent_change(*value, *base_value);
      cells.push_back(cell_text(text, change));
      csv += csv_line(
          {r.model_id, std::string(process::to_string(r.variant)), std::to_string(r.n), metric,
           text, change ? analysis::format_percent(*change) : "",
           change ? std::string(analysis::to_string(analysis::classify_change(*change, higher_is_better)))
                  : ""});
      if (provenance) {
        prov.add(fmt::format("{}/{}", r.model_id, process::to_string(r.variant)), metric,
                 std::set<std::string>(r.run_ids.begin(), r.run_ids.end()));
      }
    };
    emit("class_pass1", r.class_pass1, b.class_pass1, true);
    emit("function_pass1", r.function_pass1, b.function_pass1, true);
    auto density = [](const MetricRow& row, auto dim) -> std::optional<double> {
      if (!row.densities) return std::nullopt;
      return row.densities->at(dim);
    };
    for (auto q : sq) emit(std::string(metrics::to_string(q)), density(r, q), density(b, q), false);
    for (auto a : cc) emit(std::string(metrics::to_string(a)), density(r, a), density(b, a), false);
    missing_quality = missing_quality || !r.densities;
    table.add(std::move(cells));
  }

  RenderedReport out;
  out.text = "Pass@1 (Class, Function) | Software Quality | Clean Code\n";
  out.text += table.render();
  out.text += "\n" + zero_baseline_note(baseline);
  out.text += "Quality columns are issues per 10 ncLOC; documentation strings count as comment lines.\n";
  out.text += "Function Pass@1 uses per-method test groups; groups naming no method count toward the class only.\n";
  if (std::find(sq.begin(), sq.end(), SoftwareQuality::Security) == sq.end() ||
      std::find(cc.begin(), cc.end(), CleanCodeAttribute::Responsibility) == cc.end()) {
    out.text += "Security and Responsibility are shown only when nonzero.\n";
  }
  if (missing_quality) out.text += "n/a: no issue export for that cell.\n";
  out.csv = std::move(csv);
  if (provenance) out.provenance_csv = std::move(prov.csv);
  return out;
}

namespace {

std::vector<analysis::Column> columns_of(const std::vector<std::string>& models,
                                         const std::vector<ProcessVariant>& variants) {
  std::vector<analysis::Column> cols;
  for (const auto& m : models) {
    for (auto v : variants) cols.push_back({m, v});
  }
  return cols;
}

std::string column_label(const analysis::Column& c) {
  return fmt::format("{}/{}", c.model_id, process::to_string(c.variant));
}

}  // namespace

RenderedReport render_errors(const analysis::FrequencyTable& t, bool provenance) {
  const auto cols = columns_of(t.models, t.variants);
  std::vector<std::string> header = {"Error Type"};
  for (const auto& c : cols) header.push_back(column_label(c));
  TextTable table(header);
  std::string csv = csv_line({"error_type", "model", "variant", "count", "change_pct", "direction"});
  Provenance prov;

  auto add_row = [&](const std::string& label, auto value_of) {
    std::vector<std::string> cells = {label};
    for (const auto& c : cols) {
      std::optional<long long> value = value_of(c);
      std::optional<long long> base = value_of(analysis::Column{c.model_id, t.baseline});
      std::string text = value ? std::to_string(*value) : kAbsent;
      std::optional<long long> change;
      if (value && base && c.variant != t.baseline) {
        change = analysis::percent_change(static_cast<double>(*value), static_cast<double>(*base));
      }
      cells.push_back(cell_text(text, change));
      csv += csv_line({label, c.model_id, std::string(process::to_string(c.variant)), text,
                       change ? analysis::format_percent(*change) : "",
                       change ? std::string(analysis::to_string(analysis::classify_change(*change, false)))
                              : ""});
      if (provenance && label != "Total") prov.add(label, column_label(c), t.runs(label, c));
    }
    table.add(std::move(cells));
  };

  for (const auto& row : t.rows) {
    add_row(row, [&](const analysis::Column& c) { return t.count(row, c); });
  }
  add_row(analysis::kOneOffErrors,
          [&](const analysis::Column& c) -> std::optional<long long> { return t.one_off(c); });
  add_row("Total", [&](const analysis::Column& c) -> std::optional<long long> { return t.total(c); });

  RenderedReport out;
  out.text = table.render();
  out.text += "\n" + zero_baseline_note(t.baseline);
  out.text += fmt::format("{}: types seen at most {} times for a model across all workflows; "
                          "their own rows show {} for that model.\n",
                          analysis::kOneOffErrors, analysis::kOneOffThreshold, kAbsent);
  out.csv = std::move(csv);
  if (provenance) out.provenance_csv = std::move(prov.csv);
  return out;
}

RenderedReport render_taxonomy(const analysis::TaxonomyMatrix& m, bool provenance) {
  const auto cols = columns_of(m.models, m.variants);
  std::vector<std::string> header = {"Error Category"};
  for (const auto& c : cols) header.push_back(column_label(c));
  TextTable table(header);
  TextTable cross(header);
  std::string csv =
      csv_line({"category", "subcategory", "model", "variant", "count", "change_pct", "direction"});
  Provenance prov;

  auto add_row = [&](TextTable& target, const std::string& label, const std::string& cat,
                     const std::string& sub, auto count_of, auto runs_of, bool supplemental) {
    std::vector<std::string> cells = {label};
    for (const auto& c : cols) {
      long long value = count_of(c);
      long long base = count_of(analysis::Column{c.model_id, m.baseline});
      std::optional<long long> change;
      if (c.variant != m.baseline) {
        change = analysis::percent_change(static_cast<double>(value), static_cast<double>(base));
      }
      cells.push_back(cell_text(std::to_string(value), change));
      if (!supplemental) {
        csv += csv_line({cat, sub, c.model_id, std::string(process::to_string(c.variant)),
                         std::to_string(value), change ? analysis::format_percent(*change) : "",
                         change ? std::string(analysis::to_string(
                                      analysis::classify_change(*change, false)))
                                : ""});
        if (provenance) prov.add(sub.empty() ? cat : cat + "/" + sub, column_label(c), runs_of(c));
      }
    }
    target.add(std::move(cells));
  };

  for (auto cat : analysis::all_categories()) {
    const std::string cat_id(analysis::to_string(cat));
    add_row(table, std::string(analysis::display_name(cat)), cat_id, "",
            [&](const auto& c) { return m.count(cat, c); },
            [&](const auto& c) { return m.runs(cat, c); }, false);
    for (auto sub : analysis::subcategories(cat)) {
      add_row(table, "  " + std::string(analysis::display_name(sub)), cat_id,
              std::string(analysis::to_string(sub)), [&](const auto& c) { return m.count(sub, c); },
              [&](const auto& c) { return m.runs(sub, c); }, false);
    }
    add_row(cross, std::string(analysis::display_name(cat)), cat_id, "",
            [&](const auto& c) { return m.cross_ref_count(cat, c); },
            [&](const auto&) { return std::set<std::string>{}; }, true);
  }

  RenderedReport out;
  out.text = table.render();
  out.text += "\nCross-references (supplemental, not part of the counts above)\n";
  out.text += cross.render();
  out.text += "\n" + zero_baseline_note(m.baseline);
  out.csv = std::move(csv);
  if (provenance) out.provenance_csv = std::move(prov.csv);
  return out;
}

std::optional<ReportKind> parse_report_kind(std::string_view text) {
  if (text == "comparison") return ReportKind::Comparison;
  if (text == "errors") return ReportKind::Errors;
  if (text == "taxonomy") return ReportKind::Taxonomy;
  return std::nullopt;
}

analysis::FrequencyTable errors_table(const Config& config) {
  const auto manifest = RunManifest::load(config.runs_dir / kManifestFile);
  const auto evals = collect_evaluations(config, manifest);
  std::vector<analysis::ErrorRecord> records;
  for (const auto& ev : evals) {
    if (!ev.evaluated) continue;
    auto r = analysis::extract_errors(*ev.result, ev.key);
    records.insert(records.end(), r.begin(), r.end());
  }
  return analysis::build_frequency_table(records, config.baseline, config.models, config.variants);
}

analysis::TaxonomyMatrix taxonomy_matrix(const Config& config) {
  const auto corpus = corpus::load_corpus(config.corpus);
  const auto manifest = RunManifest::load(config.runs_dir / kManifestFile);
  const auto evals = collect_evaluations(config, manifest);
  std::set<analysis::RunKey> failing;
  for (const auto& ev : evals) {
    if (ev.evaluated && !metrics::class_correct(*ev.result)) failing.insert(ev.key);
  }

  std::vector<analysis::TaxonomyLabel> labels;
  std::error_code ec;
  if (fs::is_directory(config.labels_dir, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.labels_dir)) {
      if (e.path().extension() == ".jsonl" && e.path().filename() != "suggestions.jsonl") {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        auto l = analysis::load_annotations(f, failing);
        labels.insert(labels.end(), l.begin(), l.end());
      } catch (const analysis::AnnotationError& e) {
        throw Error(fmt::format("{}: {}", f.string(), e.what()));
      }
    }
  }
  auto matrix = analysis::build_taxonomy_matrix(labels, config.baseline, config.models,
                                                config.variants);

  std::set<analysis::RunKey> labelled;
  for (const auto& l : labels) {
    if (l.primary) labelled.insert(l.key);
  }
  std::string suggestions;
  for (const auto& ev : evals) {
    if (!failing.count(ev.key) || labelled.count(ev.key)) continue;
    const auto* task = corpus.find(ev.key.task_id);
    if (!task) continue;
    for (const auto& s : analysis::suggest_labels(*ev.result, *task)) {
      json j = {{"task_id", ev.key.task_id},
                {"variant", process::to_string(ev.key.variant)},
                {"model_id", ev.key.model_id},
                {"category", analysis::to_string(s.category)},
                {"subcategory", analysis::to_string(s.subcategory)},
                {"score", s.score},
                {"trigger", s.trigger},
                {"advisory", true}};
      suggestions += j.dump() + "\n";
    }
  }
  write_file(config.labels_dir / "suggestions.jsonl", suggestions);
  return matrix;
}

std::string cmd_report(const Config& config, ReportKind kind, bool provenance) {
  RenderedReport report;
  std::string stem;
  switch (kind) {
    case ReportKind::Comparison: {
      const auto corpus = corpus::load_corpus(config.corpus);
      const auto manifest = RunManifest::load(config.runs_dir / kManifestFile);
      const auto rows = compute_metric_rows(config, corpus, collect_evaluations(config, manifest));
      report = render_comparison(rows, config.baseline, provenance);
      stem = "metrics";
      break;
    }
    case ReportKind::Errors:
      report = render_errors(errors_table(config), provenance);
      stem = "errors";
      break;
    case ReportKind::Taxonomy:
      report = render_taxonomy(taxonomy_matrix(config), provenance);
      stem = "taxonomy";
      break;
  }
  write_file(config.reports_dir / (stem + ".txt"), report.text);
  write_file(config.reports_dir / (stem + ".csv"), report.csv);
  if (provenance) write_file(config.reports_dir / (stem + ".provenance.csv"), report.provenance_csv);
  return report.text;
}

// ---------------------------------------------------------------------------
// Command line

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-agent software process experiments over class-level code tasks"};
  app.require_subcommand(1);
  std::string config_path = "cascade.json";
  app.add_option("-c,--config", config_path, "Experiment config (JSON)");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress");

  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus utilities");
  corpus_cmd->require_subcommand(1);
  auto* lint = corpus_cmd->add_subcommand("lint", "Check every task directory");
  std::string lint_path;
  lint->add_option("path", lint_path, "Corpus directory")->required();

  std::string provider;
  std::optional<std::size_t> jobs;
  std::optional<double> timeout;
  bool keep_sandbox = false;
  auto common_exec = [&](CLI::App* cmd) {
    cmd->add_option("--jobs", jobs, "Parallel runs");
    cmd->add_option("--timeout", timeout, "Per-execution wall-clock limit in seconds");
    cmd->add_flag("--keep-sandbox", keep_sandbox, "Keep execution sandboxes");
  };

  auto* run = app.add_subcommand("run", "Run the grid, resuming completed cells");
  run->add_option("--provider", provider, "live, replay or scripted");
  common_exec(run);
  auto* evaluate = app.add_subcommand("evaluate", "Score final code against the benchmark tests");
  common_exec(evaluate);

  auto* analyze = app.add_subcommand("analyze", "Error analysis");
  analyze->require_subcommand(1);
  auto* analyze_errors = analyze->add_subcommand("errors", "Runtime error frequencies");
  auto* analyze_taxonomy = analyze->add_subcommand("taxonomy", "Validate labels and build the matrix");

  auto* report = app.add_subcommand("report", "Write report tables");
  std::string kind_text = "comparison";
  report->add_option("--kind", kind_text, "comparison, errors or taxonomy")
      ->check(CLI::IsMember({"comparison", "errors", "taxonomy"}));
  std::string baseline_text;
  report->add_option("--baseline", baseline_text, "Baseline variant");
  bool provenance = false;
  report->add_flag("--provenance", provenance, "Write the run ids behind every cell");

  auto* replay = app.add_subcommand("replay", "Re-run completed cells from the cassette and compare");
  std::string replay_out = "replay-runs";
  replay->add_option("--out", replay_out, "Directory for replayed runs");
  common_exec(replay);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits 0
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*lint) {
      bool ok = true;
      for (const auto& l : corpus::lint_corpus(lint_path)) {
        std::cout << l.task_id << ": " << l.status << "\n";
        ok = ok && l.status == "OK";
      }
      return ok ? 0 : 1;
    }

    auto config = Config::load(config_path);
    if (jobs) config.jobs = *jobs;
    if (timeout) config.timeout_s = *timeout;
    if (!provider.empty()) {
      auto p = gateway::parse_provider(provider);
      if (!p) throw ConfigError(fmt::format("unknown provider '{}'", provider));
      config.provider = *p;
    }
    if (!baseline_text.empty()) {
      auto b = process::parse_variant(baseline_text);
      if (!b) throw ConfigError(fmt::format("unknown variant '{}'", baseline_text));
      config.baseline = *b;
    }
    config.validate();

    if (*run) {
      RunOptions options;
      options.keep_sandbox = keep_sandbox;
      auto manifest = cmd_run(config, options);
      const auto done = manifest.count("Completed");
      std::cout << fmt::format("{} of {} runs completed\n", done, manifest.entries.size());
      for (const auto& e : manifest.entries) {
        if (e.status != "Completed") std::cout << fmt::format("{}: {} {}\n", e.descriptor.run_id, e.status, e.error);
      }
      return done == manifest.entries.size() ? 0 : 1;
    }
    if (*evaluate) {
      auto s = cmd_evaluate(config, keep_sandbox);
      std::cout << fmt::format("evaluated {}, not evaluated {}, failed {}\n", s.evaluated,
                               s.not_evaluated, s.failed);
      for (const auto& e : s.errors) std::cout << e << "\n";
      return s.failed == 0 ? 0 : 1;
    }
    if (*analyze_errors) {
      std::cout << render_errors(errors_table(config), false).text;
      return 0;
    }
    if (*analyze_taxonomy) {
      std::cout << render_taxonomy(taxonomy_matrix(config), false).text;
      return 0;
    }
    if (*report) {
      std::cout << cmd_report(config, *parse_report_kind(kind_text), provenance);
      return 0;
    }
    if (*replay) {
      RunOptions options;
      options.keep_sandbox = keep_sandbox;
      bool ok = true;
      for (const auto& d : cmd_replay(config, replay_out, options)) {
        std::cout << fmt::format("{}: {}{}\n", d.run_id, d.identical ? "identical" : "differs",
                                 d.detail.empty() ? "" : " (" + d.detail + ")");
        ok = ok && d.identical;
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cascade::cli
