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

#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "cascade/analysis.hpp"
#include "cascade/corpus.hpp"
#include "cascade/exec.hpp"

namespace testing {

inline std::filesystem::path fixtures() { return CASCADE_FIXTURES_DIR; }
inline std::filesystem::path stub_runner() { return fixtures() / "stub_runner.sh"; }

inline cascade::corpus::Corpus fixture_corpus() {
  return cascade::corpus::load_corpus(fixtures() / "corpus", true);
}

// Removes itself on destruction.
class TempDir {
 public:
  TempDir() {
    auto tmpl = (std::filesystem::temp_directory_path() / "cascade-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline cascade::exec::TestOutcome outcome(std::string group, std::string name,
                                          cascade::exec::TestStatus status,
                                          std::optional<std::string> exc = std::nullopt) {
  cascade::exec::TestOutcome o;
  o.group = std::move(group);
  o.case_name = std::move(name);
  o.status = status;
  o.exception_type = std::move(exc);
  if (o.exception_type) o.traceback = "Traceback (most recent call last):\n" + *o.exception_type;
  return o;
}

// One {task_id, variant, model_id, error_type} object per line.
inline std::vector<cascade::analysis::ErrorRecord> load_error_records(
    const std::filesystem::path& path) {
  std::vector<cascade::analysis::ErrorRecord> out;
  const auto text = cascade::read_file(path);
  for (auto line : cascade::split_lines(text)) {
    if (cascade::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    out.push_back({{j.at("task_id"),
                    cascade::process::parse_variant(j.at("variant").get<std::string>()).value(),
                    j.at("model_id")},
                   j.at("error_type")});
  }
  return out;
}

}  // namespace testing
