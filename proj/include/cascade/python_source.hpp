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

// Line-level structure scanning for the corpus language (Python). This is not
// a parser: it tracks strings, brackets and indentation closely enough to find
// class/def statements, documentation blocks and comment-only lines.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cascade::python {

enum class LineKind { Blank, Comment, DocString, Code };

struct LineInfo {
  std::string_view text;
  LineKind kind = LineKind::Blank;
  bool starts_statement = false;  // first physical line of a logical line
  std::size_t indent = 0;
};

struct ScanResult {
  std::vector<LineInfo> lines;
  bool unterminated_string = false;
  bool unbalanced_brackets = false;

  bool well_formed() const { return !unterminated_string && !unbalanced_brackets; }
};

ScanResult scan(std::string_view source);

struct FunctionDef {
  std::string name;
  std::string signature;  // the full `def ...:` header, continuation lines joined
  std::string doc;        // docstring body without the quotes, trimmed
  std::size_t indent = 0;
  std::size_t line = 0;   // 1-based
};

struct ClassDef {
  std::string name;
  std::vector<std::string> bases;
  std::size_t indent = 0;
  std::size_t line = 0;
  std::vector<FunctionDef> methods;  // direct children only
};

/// Top-level (indent 0) classes with their directly nested methods.
std::vector<ClassDef> top_level_classes(std::string_view source);

/// Every class statement at any depth, without methods.
std::vector<ClassDef> all_classes(std::string_view source);

/// Names of top-level imported modules and aliases (`import a.b as c`, `from x import y`).
std::vector<std::string> imported_names(std::string_view source);

}  // namespace cascade::python
