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

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cascade/common.hpp"

namespace cascade::corpus {

/// Sentinel method name for test groups that exercise the class as a whole.
inline constexpr const char* kWholeClass = "class";

struct MethodDescriptor {
  std::string name;
  std::string signature;
  std::string doc;

  bool operator==(const MethodDescriptor&) const = default;
};

struct TestGroup {
  std::string name;
  std::vector<std::string> cases;

  bool operator==(const TestGroup&) const = default;
};

struct TaskSpec {
  std::string task_id;
  std::string class_name;
  std::string skeleton;
  std::string description;
  std::vector<MethodDescriptor> methods;
  std::string ground_truth;
  std::string test_suite;
  std::vector<TestGroup> test_groups;
  std::map<std::string, std::string> test_map;  // group -> method | kWholeClass

  std::size_t test_count() const;
  bool operator==(const TaskSpec&) const = default;
};

struct SkippedTask {
  std::string task_id;
  std::string reason;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<TaskSpec> tasks, std::filesystem::path source_path);

  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  const std::filesystem::path& source_path() const { return source_path_; }
  /// SHA-256 over the task records in load order; independent of paths and mtimes.
  const std::string& fingerprint() const { return fingerprint_; }
  const std::vector<SkippedTask>& skipped() const { return skipped_; }

  const TaskSpec* find(std::string_view task_id) const;
  double mean_test_count() const;

  void set_skipped(std::vector<SkippedTask> skipped) { skipped_ = std::move(skipped); }

  bool operator==(const Corpus& other) const {
    return tasks_ == other.tasks_ && fingerprint_ == other.fingerprint_;
  }

 private:
  std::vector<TaskSpec> tasks_;
  std::filesystem::path source_path_;
  std::string fingerprint_;
  std::vector<SkippedTask> skipped_;
};

class CorpusError : public Error {
 public:
  CorpusError(std::string task_id, const std::string& message)
      : Error(message), task_id_(std::move(task_id)) {}
  const std::string& task_id() const { return task_id_; }

 private:
  std::string task_id_;
};

class MissingField : public CorpusError {
 public:
  MissingField(std::string task_id, std::string field);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class DuplicateTaskId : public CorpusError {
 public:
  explicit DuplicateTaskId(std::string task_id);
};

class UnparsableSkeleton : public CorpusError {
 public:
  UnparsableSkeleton(std::string task_id, const std::string& detail);
};

class InvalidTask : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class AmbiguousMapping : public CorpusError {
 public:
  AmbiguousMapping(std::string task_id, const std::string& group);
};

// On-disk layout: <root>/<task_dir>/{task.json, skeleton.py, description.txt,
// solution.py, tests.py}. task.json carries `task_id` and optionally `methods`
// ([{name, signature, doc}]); methods are otherwise read from the skeleton.
inline constexpr const char* kMetaFile = "task.json";
inline constexpr const char* kSkeletonFile = "skeleton.py";
inline constexpr const char* kDescriptionFile = "description.txt";
inline constexpr const char* kSolutionFile = "solution.py";
inline constexpr const char* kTestsFile = "tests.py";

/// Loads and validates a single task directory. Throws a CorpusError subtype.
TaskSpec load_task(const std::filesystem::path& dir);

/// Loads every task directory under `path` in lexicographic directory order.
/// Invalid tasks are skipped and logged; duplicates of an already loaded id
/// are skipped too. With `strict`, the first error is rethrown instead.
Corpus load_corpus(const std::filesystem::path& path, bool strict = false);

/// Writes the corpus back in the on-disk layout; loading the result yields an equal Corpus.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Test group discovery over a unittest-style suite.
std::vector<TestGroup> parse_test_groups(std::string_view test_suite);

/// Assigns every test group to a method via `Test<ClassName><MethodName>`,
/// case-insensitively, with the longest matching method suffix winning.
std::map<std::string, std::string> map_tests_to_methods(const TaskSpec& task);

/// The RawPrompt input: skeleton then description, separated by one blank line.
std::string baseline_prompt_payload(const TaskSpec& task);

struct LintLine {
  std::string task_id;
  std::string status;  // "OK" or the error message
};

/// One entry per task directory, in directory order.
std::vector<LintLine> lint_corpus(const std::filesystem::path& path);

}  // namespace cascade::corpus
