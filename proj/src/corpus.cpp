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

#include "cascade/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cascade/python_source.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cascade::corpus {
namespace {

std::string normalize(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '_') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool iequals_prefix(std::string_view text, std::string_view prefix) {
  if (prefix.size() > text.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string read_field(const fs::path& dir, const char* file, const std::string& task_id,
                       const char* field) {
  auto path = dir / file;
  if (!fs::is_regular_file(path)) throw MissingField(task_id, field);
  auto text = read_file(path);
  if (trim(text).empty()) throw MissingField(task_id, field);
  return text;
}

json task_to_json(const TaskSpec& task) {
  json methods = json::array();
  for (const auto& m : task.methods) {
    methods.push_back({{"name", m.name}, {"signature", m.signature}, {"doc", m.doc}});
  }
  return {{"task_id", task.task_id},       {"skeleton", task.skeleton},
          {"description", task.description}, {"methods", methods},
          {"ground_truth", task.ground_truth}, {"test_suite", task.test_suite}};
}

std::vector<fs::path> task_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(fmt::format("corpus path {} is not a directory", root.string()));
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

MissingField::MissingField(std::string task_id, std::string field)
    : CorpusError(task_id, fmt::format("MissingField({}, {})", task_id, field)),
      field_(std::move(field)) {}

DuplicateTaskId::DuplicateTaskId(std::string task_id)
    : CorpusError(task_id, fmt::format("DuplicateTaskId({})", task_id)) {}

UnparsableSkeleton::UnparsableSkeleton(std::string task_id, const std::string& detail)
    : CorpusError(task_id, fmt::format("UnparsableSkeleton({}): {}", task_id, detail)) {}

AmbiguousMapping::AmbiguousMapping(std::string task_id, const std::string& group)
    : CorpusError(task_id, fmt::format("AmbiguousMapping({}): group {}", task_id, group)) {}

std::size_t TaskSpec::test_count() const {
  return std::accumulate(test_groups.begin(), test_groups.end(), std::size_t{0},
                         [](std::size_t acc, const TestGroup& g) { return acc + g.cases.size(); });
}

Corpus::Corpus(std::vector<TaskSpec> tasks, fs::path source_path)
    : tasks_(std::move(tasks)), source_path_(std::move(source_path)) {
  std::string canonical;
  for (const auto& task : tasks_) {
    canonical += task_to_json(task).dump();
    canonical += '\n';
  }
  fingerprint_ = sha256_hex(canonical);
}

const TaskSpec* Corpus::find(std::string_view task_id) const {
  for (const auto& task : tasks_) {
    if (task.task_id == task_id) return &task;
  }
  return nullptr;
}

double Corpus::mean_test_count() const {
  if (tasks_.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& task : tasks_) total += task.test_count();
  return static_cast<double>(total) / static_cast<double>(tasks_.size());
}

std::vector<TestGroup> parse_test_groups(std::string_view test_suite) {
  std::vector<TestGroup> groups;
  for (auto& cls : python::top_level_classes(test_suite)) {
    bool is_test_case = std::any_of(cls.bases.begin(), cls.bases.end(), [](const auto& b) {
      return b.find("TestCase") != std::string::npos;
    });
    if (!is_test_case) continue;
    TestGroup group{cls.name, {}};
    for (const auto& fn : cls.methods) {
      if (starts_with(fn.name, "test")) group.cases.push_back(fn.name);
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

std::map<std::string, std::string> map_tests_to_methods(const TaskSpec& task) {
  std::map<std::string, std::string> mapping;
  for (const auto& group : task.test_groups) {
    std::string_view rest = group.name;
    // Accept both `Test<Class><Method>` and the `<Class>Test<Method>` spelling.
    if (iequals_prefix(rest, "Test")) {
      rest.remove_prefix(4);
      if (iequals_prefix(rest, task.class_name)) rest.remove_prefix(task.class_name.size());
    } else if (iequals_prefix(rest, task.class_name) &&
               iequals_prefix(rest.substr(task.class_name.size()), "Test")) {
      rest.remove_prefix(task.class_name.size() + 4);
    }
    auto remainder = normalize(rest);

    const MethodDescriptor* best = nullptr;
    std::size_t best_len = 0;
    bool tie = false;
    for (const auto& method : task.methods) {
      auto key = normalize(method.name);
      if (key.empty() || !starts_with(remainder, key)) continue;
      if (key.size() > best_len) {
        best = &method;
        best_len = key.size();
        tie = false;
      } else if (key.size() == best_len) {
        tie = true;
      }
    }
    if (tie) throw AmbiguousMapping(task.task_id, group.name);
    mapping[group.name] = best ? best->name : kWholeClass;
  }
  return mapping;
}

std::string baseline_prompt_payload(const TaskSpec& task) {
  std::string payload = task.skeleton;
  if (!payload.empty() && payload.back() != '\n') payload += '\n';
  payload += '\n';
  payload += task.description;
  return payload;
}

TaskSpec load_task(const fs::path& dir) {
  std::string task_id = dir.filename().string();
  auto meta_path = dir / kMetaFile;
  if (!fs::is_regular_file(meta_path)) throw MissingField(task_id, "metadata");
  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::parse_error& e) {
    throw InvalidTask(task_id, fmt::format("InvalidTask({}): metadata: {}", task_id, e.what()));
  }
  if (!meta.contains("task_id") || !meta["task_id"].is_string() ||
      meta["task_id"].get<std::string>().empty()) {
    throw MissingField(task_id, "task_id");
  }
  TaskSpec task;
  task.task_id = meta["task_id"].get<std::string>();
  task.skeleton = read_field(dir, kSkeletonFile, task.task_id, "skeleton");
  task.description = read_field(dir, kDescriptionFile, task.task_id, "description");
  task.ground_truth = read_field(dir, kSolutionFile, task.task_id, "ground_truth");
  task.test_suite = read_field(dir, kTestsFile, task.task_id, "test_suite");

  auto scanned = python::scan(task.skeleton);
  if (!scanned.well_formed()) {
    throw UnparsableSkeleton(task.task_id, scanned.unterminated_string ? "unterminated string"
                                                                       : "unbalanced brackets");
  }
  auto classes = python::top_level_classes(task.skeleton);
  if (classes.size() != 1) {
    throw UnparsableSkeleton(task.task_id,
                             fmt::format("expected one class definition, found {}", classes.size()));
  }
  task.class_name = classes.front().name;

  if (meta.contains("methods")) {
    for (const auto& m : meta["methods"]) {
      task.methods.push_back({m.value("name", ""), m.value("signature", ""), m.value("doc", "")});
    }
  } else {
    for (const auto& fn : classes.front().methods) {
      if (starts_with(fn.name, "__")) continue;
      task.methods.push_back({fn.name, fn.signature, fn.doc});
    }
  }

  std::set<std::string> names;
  std::set<std::string> skeleton_defs;
  for (const auto& fn : classes.front().methods) skeleton_defs.insert(fn.name);
  for (const auto& m : task.methods) {
    if (m.name.empty()) {
      throw InvalidTask(task.task_id, fmt::format("InvalidTask({}): unnamed method", task.task_id));
    }
    if (!names.insert(m.name).second) {
      throw InvalidTask(task.task_id, fmt::format("InvalidTask({}): duplicate method {}",
                                                  task.task_id, m.name));
    }
    if (!skeleton_defs.count(m.name)) {
      throw InvalidTask(task.task_id, fmt::format("InvalidTask({}): method {} not in skeleton",
                                                  task.task_id, m.name));
    }
  }

  task.test_groups = parse_test_groups(task.test_suite);
  if (task.test_groups.empty()) {
    throw InvalidTask(task.task_id,
                      fmt::format("InvalidTask({}): test suite has no test groups", task.task_id));
  }
  task.test_map = map_tests_to_methods(task);
  return task;
}

Corpus load_corpus(const fs::path& path, bool strict) {
  std::vector<TaskSpec> tasks;
  std::vector<SkippedTask> skipped;
  std::set<std::string> seen;
  for (const auto& dir : task_dirs(path)) {
    try {
      auto task = load_task(dir);
      if (!seen.insert(task.task_id).second) throw DuplicateTaskId(task.task_id);
      spdlog::debug("loaded task {} ({} tests)", task.task_id, task.test_count());
      tasks.push_back(std::move(task));
    } catch (const CorpusError& e) {
      if (strict) throw;
      spdlog::warn("skipping {}: {}", dir.filename().string(), e.what());
      skipped.push_back({e.task_id(), e.what()});
    }
  }
  Corpus corpus(std::move(tasks), path);
  corpus.set_skipped(std::move(skipped));
  return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& path) {
  for (const auto& task : corpus.tasks()) {
    auto dir = path / sanitize_component(task.task_id);
    json methods = json::array();
    for (const auto& m : task.methods) {
      methods.push_back({{"name", m.name}, {"signature", m.signature}, {"doc", m.doc}});
    }
    json meta = {{"task_id", task.task_id}, {"methods", methods}};
    write_file(dir / kMetaFile, meta.dump(2) + "\n");
    write_file(dir / kSkeletonFile, task.skeleton);
    write_file(dir / kDescriptionFile, task.description);
    write_file(dir / kSolutionFile, task.ground_truth);
    write_file(dir / kTestsFile, task.test_suite);
  }
}

std::vector<LintLine> lint_corpus(const fs::path& path) {
  std::vector<LintLine> out;
  std::set<std::string> seen;
  for (const auto& dir : task_dirs(path)) {
    try {
      auto task = load_task(dir);
      if (!seen.insert(task.task_id).second) throw DuplicateTaskId(task.task_id);
      out.push_back({task.task_id, "OK"});
    } catch (const CorpusError& e) {
      out.push_back({e.task_id(), e.what()});
    }
  }
  return out;
}

}  // namespace cascade::corpus
