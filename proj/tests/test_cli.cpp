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

#include <doctest.h>

#include <atomic>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cascade/cli.hpp"
#include "support.hpp"

using namespace cascade;
using namespace cascade::cli;
using process::ProcessVariant;
namespace fs = std::filesystem;

namespace {

std::string config_text(const fs::path& root, const std::string& extra = "") {
  return fmt::format(R"({{
  "models": ["m1"],
  "corpus": "{}",
  "runs_dir": "{}",
  "reports_dir": "{}",
  "labels_dir": "{}",
  "runner": "{}",
  "timeout_s": 10{}
}})",
                     (testing::fixtures() / "corpus").string(), (root / "runs").string(),
                     (root / "reports").string(), (root / "labels").string(),
                     testing::stub_runner().string(), extra);
}

Config config_in(const fs::path& root, const std::string& extra = "") {
  return Config::from_json(config_text(root, extra));
}

// Counts calls per task and forwards to the oracle provider.
struct CountingFactory {
  std::shared_ptr<std::map<std::string, int>> calls = std::make_shared<std::map<std::string, int>>();

  GatewayFactory factory() const {
    auto counts = calls;
    return [counts](const Config& config) -> std::shared_ptr<gateway::ModelGateway> {
      auto oracle = process::oracle_script(corpus::load_corpus(config.corpus));
      auto mutex = std::make_shared<std::mutex>();
      return std::make_shared<gateway::ScriptedGateway>(
          [oracle, counts, mutex](const agents::PromptEnvelope& env,
                                  const agents::GenerationParams& p, const std::string& m) {
            {
              std::lock_guard lock(*mutex);
              ++(*counts)[env.origin.task_id];
            }
            return oracle(env, p, m);
          });
    };
  }
};

MetricRow row(ProcessVariant v, double cls, double fn, double maintainability) {
  MetricRow r;
  r.model_id = "gpt";
  r.variant = v;
  r.tasks = 100;
  r.class_pass1 = cls;
  r.function_pass1 = fn;
  metrics::Densities d;
  for (auto q : {metrics::SoftwareQuality::Security, metrics::SoftwareQuality::Reliability,
                 metrics::SoftwareQuality::Maintainability}) {
    d.software_quality[q] = 0.0;
  }
  for (auto a : {metrics::CleanCodeAttribute::Consistency, metrics::CleanCodeAttribute::Intentionality,
                 metrics::CleanCodeAttribute::Adaptability, metrics::CleanCodeAttribute::Responsibility}) {
    d.clean_code[a] = 0.0;
  }
  d.software_quality[metrics::SoftwareQuality::Maintainability] = maintainability;
  r.densities = d;
  r.run_ids = {fmt::format("t1__{}__gpt", process::to_string(v))};
  return r;
}

}  // namespace

TEST_CASE("config parsing resolves paths and rejects unknown keys") {
  auto c = Config::from_json(R"({"models": ["a"], "corpus": "corpus", "jobs": 2})", "/base");
  CHECK(c.corpus == fs::path("/base/corpus"));
  CHECK(c.runs_dir == fs::path("/base/runs"));
  CHECK(c.cassette_path() == fs::path("/base/runs/cassette.jsonl"));
  CHECK(c.variants.size() == 5);
  CHECK(c.provider == gateway::Provider::Scripted);
  CHECK(c.timeout_s == 480.0);
  CHECK(c.params.temperature == 0.8);

  CHECK_THROWS_AS(Config::from_json(R"({"models": ["a"], "corpus": "c", "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(Config::from_json(R"({"models": [], "corpus": "c"})"), ConfigError);
  CHECK_THROWS_AS(Config::from_json(R"({"models": ["a"], "corpus": "c", "variants": ["Agile"]})"),
                  ConfigError);
  CHECK_THROWS_AS(Config::from_json(R"({"models": ["a"], "corpus": "c", "timeout_s": 0})"),
                  ConfigError);
  CHECK_THROWS_AS(Config::from_json("{"), ConfigError);
}

TEST_CASE("digest tracks every input except jobs") {
  auto base = Config::from_json(R"({"models": ["a"], "corpus": "c"})", "/x");
  auto jobs = Config::from_json(R"({"models": ["a"], "corpus": "c", "jobs": 8})", "/x");
  auto temp = Config::from_json(R"({"models": ["a"], "corpus": "c", "params": {"temperature": 0.2}})", "/x");
  auto rounds = Config::from_json(R"({"models": ["a"], "corpus": "c", "refinement_rounds": 2})", "/x");
  CHECK(base.digest() == jobs.digest());
  CHECK(base.digest() != temp.digest());
  CHECK(base.digest() != rounds.digest());
  CHECK(base.digest() == Config::from_json(R"({"corpus": "c", "models": ["a"]})", "/x").digest());
}

TEST_CASE("manifest round-trip") {
  RunManifest m;
  m.config_digest = "d";
  m.corpus_fingerprint = "f";
  m.provider = gateway::Provider::Replay;
  m.entries.push_back({{"t", ProcessVariant::WaterfallNoDesign, "m", "t__WaterfallNoDesign__m"},
                       "Error", "boom"});
  auto back = RunManifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  CHECK(back.count("Error") == 1);
}

TEST_CASE("a scripted grid completes, resumes and replays") {
  testing::TempDir root;
  auto config = config_in(root.path());
  auto manifest = cmd_run(config);
  REQUIRE(manifest.entries.size() == 10);
  CHECK(manifest.count("Completed") == 10);
  CHECK(fs::exists(config.cassette_path()));

  SUBCASE("nothing reruns when every cell is complete") {
    CountingFactory counter;
    RunOptions options;
    options.gateway_factory = counter.factory();
    cmd_run(config, options);
    CHECK(counter.calls->empty());
  }

  SUBCASE("only missing cells execute after an interruption") {
    const auto victim = "ClassEval_1__RawPrompt__m1";
    fs::remove_all(config.runs_dir / victim);
    auto saved = RunManifest::load(config.runs_dir / kManifestFile);
    for (auto& e : saved.entries) {
      if (e.descriptor.run_id == victim) e.status = "Pending";
    }
    saved.save(config.runs_dir / kManifestFile);

    CountingFactory counter;
    RunOptions options;
    options.gateway_factory = counter.factory();
    auto resumed = cmd_run(config, options);
    CHECK(resumed.count("Completed") == 10);
    CHECK(*counter.calls == std::map<std::string, int>{{"ClassEval_1", 1}});
  }

  SUBCASE("replay from the cassette is byte-identical") {
    auto diffs = cmd_replay(config, root / "replayed");
    REQUIRE(diffs.size() == 10);
    for (const auto& d : diffs) {
      CAPTURE(d.run_id);
      CAPTURE(d.detail);
      CHECK(d.identical);
    }
  }

  SUBCASE("a changed config refuses the existing manifest") {
    auto changed = config_in(root.path(), R"(, "refinement_rounds": 2)");
    CHECK_THROWS_AS(cmd_run(changed), ConfigError);
  }

  SUBCASE("evaluate then report") {
    auto summary = cmd_evaluate(config);
    CHECK(summary.evaluated == 10);
    CHECK(summary.failed == 0);
    auto text = cmd_report(config, ReportKind::Comparison, true);
    CHECK(text.rfind("Pass@1 (Class, Function) | Software Quality | Clean Code\n", 0) == 0);
    CHECK(fs::exists(config.reports_dir / "metrics.csv"));
    CHECK(fs::exists(config.reports_dir / "metrics.provenance.csv"));
    CHECK(text.find("1.0000") != std::string::npos);

    auto errors = cmd_report(config, ReportKind::Errors, false);
    CHECK(errors.find("Total") != std::string::npos);
    auto taxonomy = cmd_report(config, ReportKind::Taxonomy, false);
    CHECK(taxonomy.find("Missing Code") != std::string::npos);
    CHECK(fs::exists(config.labels_dir / "suggestions.jsonl"));
  }

  SUBCASE("reports without evaluations name the missing cells") {
    try {
      cmd_report(config, ReportKind::Comparison, false);
      FAIL("expected MissingData");
    } catch (const MissingData& e) {
      CHECK(e.cells().size() == 10);
    }
  }
}

TEST_CASE("replay without a cassette entry fails the cell, not the grid") {
  testing::TempDir root;
  auto config = config_in(root.path(), R"(, "provider": "replay", "variants": ["RawPrompt"])");
  write_file(config.cassette_path(), gateway::Cassette("m1").serialize());
  auto manifest = cmd_run(config);
  CHECK(manifest.entries.size() == 2);
  CHECK(manifest.count("GatewayFailed") == 2);
}

TEST_CASE("comparison report layout") {
  std::vector<MetricRow> rows = {row(ProcessVariant::RawPrompt, 0.35, 0.6853, 0.2254),
                                 row(ProcessVariant::WaterfallFull, 0.21, 0.5478, 0.2188)};
  auto r = render_comparison(rows, ProcessVariant::RawPrompt, true);
  auto lines = split_lines(r.text);
  CHECK(lines[0] == "Pass@1 (Class, Function) | Software Quality | Clean Code");
  CHECK(r.text.find("0.2100 (-40%)") != std::string::npos);
  CHECK(r.text.find("0.5478 (-20%)") != std::string::npos);
  CHECK(r.text.find("0.2188 (-3%)") != std::string::npos);
  CHECK(lines[1].find("Security") == std::string::npos);
  CHECK(lines[1].find("Responsibility") == std::string::npos);
  CHECK(r.csv.find("gpt,WaterfallFull,1,class_pass1,0.2100,-40%,regressed") != std::string::npos);
  CHECK(r.csv.find("gpt,WaterfallFull,1,Maintainability,0.2188,-3%,improved") != std::string::npos);
  CHECK(r.provenance_csv.find("t1__WaterfallFull__gpt") != std::string::npos);

  // Every numeric value in the CSV appears in the text rendering.
  for (auto line : split_lines(r.csv)) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (fields.size() < 5 || fields[4] == "value") continue;
    CHECK(r.text.find(fields[4]) != std::string::npos);
  }

  rows[1].densities->software_quality[metrics::SoftwareQuality::Security] = 0.01;
  CHECK(split_lines(render_comparison(rows, ProcessVariant::RawPrompt, false).text)[1].find(
            "Security") != std::string::npos);
  CHECK_THROWS_AS(render_comparison({rows[1]}, ProcessVariant::RawPrompt, false),
                  analysis::MissingBaseline);
}

TEST_CASE("errors report layout") {
  auto records = testing::load_error_records(testing::fixtures() / "errors" / "records20.jsonl");
  auto table = analysis::build_frequency_table(records, ProcessVariant::RawPrompt, {"gpt", "claude"},
                                               {ProcessVariant::RawPrompt, ProcessVariant::WaterfallFull});
  auto r = render_errors(table, true);
  auto pos = [&](const std::string& s) { return r.text.find("\n" + s); };
  CHECK(pos("AssertionError") < pos("NameError"));
  CHECK(pos("NameError") < pos("TypeError"));
  CHECK(pos("TypeError") < pos("One-Off Errors"));
  CHECK(pos("One-Off Errors") < pos("Total"));
  CHECK(r.text.find("–") != std::string::npos);
  CHECK(r.text.find("when the baseline is 0") != std::string::npos);
  CHECK(r.csv.find("Total,gpt,WaterfallFull,6,+20%,regressed") != std::string::npos);
  CHECK(r.provenance_csv.find("One-Off Errors") != std::string::npos);
}

TEST_CASE("taxonomy report layout") {
  auto labels = analysis::load_annotations(testing::fixtures() / "taxonomy" / "labels12.jsonl");
  auto m = analysis::build_taxonomy_matrix(labels, ProcessVariant::RawPrompt, {"m1"},
                                           {ProcessVariant::RawPrompt, ProcessVariant::WaterfallFull});
  auto r = render_taxonomy(m, false);
  std::size_t last = 0;
  for (auto c : analysis::all_categories()) {
    auto at = r.text.find("\n" + std::string(analysis::display_name(c)));
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    last = at;
    for (auto s : analysis::subcategories(c)) {
      CHECK(r.text.find("\n  " + std::string(analysis::display_name(s))) != std::string::npos);
    }
  }
  CHECK(r.text.find("Cross-references") != std::string::npos);
  CHECK(r.csv.find("MissingCode,,m1,WaterfallFull,1,-50%,improved") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  testing::TempDir root;
  write_file(root / "cascade.json", config_text(root.path(), R"(, "variants": ["RawPrompt"])"));
  auto cfg = (root / "cascade.json").string();
  auto run = [&](std::vector<std::string> args) {
    std::vector<char*> argv;
    std::string prog = "cascade";
    argv.push_back(prog.data());
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(run({"--config", cfg, "run"}) == 0);
  CHECK(run({"--config", cfg, "evaluate"}) == 0);
  CHECK(run({"--config", cfg, "report", "--kind", "errors"}) == 0);
  CHECK(run({"--config", cfg, "replay", "--out", (root / "again").string()}) == 0);
  CHECK(run({"corpus", "lint", (testing::fixtures() / "corpus").string()}) == 0);
  CHECK(run({"--config", (root / "missing.json").string(), "run"}) == 2);
  CHECK(run({"--config", cfg, "report", "--kind", "charts"}) == 2);
  CHECK(run({"bogus"}) == 2);
}
