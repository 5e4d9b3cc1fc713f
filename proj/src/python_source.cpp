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

#include "cascade/python_source.hpp"

#include <regex>

#include "cascade/common.hpp"

namespace cascade::python {
namespace {

bool is_prefix_letter(char c) {
  switch (c) {
    case 'r': case 'R': case 'u': case 'U': case 'b': case 'B': case 'f': case 'F':
      return true;
    default:
      return false;
  }
}

std::size_t indent_of(std::string_view line) {
  std::size_t n = 0;
  for (char c : line) {
    if (c == ' ') {
      ++n;
    } else if (c == '\t') {
      n += 8 - (n % 8);
    } else {
      break;
    }
  }
  return n;
}

// Joins a statement's header lines (the statement line plus its continuation
// lines) into a single space-separated string.
std::string statement_text(const std::vector<LineInfo>& lines, std::size_t index) {
  std::string text(trim(lines[index].text));
  for (std::size_t j = index + 1; j < lines.size() && !lines[j].starts_statement; ++j) {
    if (lines[j].kind == LineKind::Blank || lines[j].kind == LineKind::Comment) continue;
    if (lines[j].kind == LineKind::DocString) break;
    text += ' ';
    text += trim(lines[j].text);
  }
  return text;
}

std::string strip_docstring(std::string raw) {
  auto body = std::string(trim(raw));
  std::size_t start = 0;
  while (start < body.size() && is_prefix_letter(body[start])) ++start;
  for (std::string_view quote : {"\"\"\"", "'''"}) {
    if (body.compare(start, 3, quote) == 0) {
      body = body.substr(start + 3);
      auto end = body.rfind(quote);
      if (end != std::string::npos) body = body.substr(0, end);
      break;
    }
  }
  return std::string(trim(body));
}

std::string docstring_after(const std::vector<LineInfo>& lines, std::size_t header) {
  std::size_t j = header + 1;
  while (j < lines.size() && !lines[j].starts_statement &&
         lines[j].kind != LineKind::DocString) {
    ++j;
  }
  while (j < lines.size() &&
         (lines[j].kind == LineKind::Blank || lines[j].kind == LineKind::Comment)) {
    ++j;
  }
  if (j >= lines.size() || lines[j].kind != LineKind::DocString) return {};
  std::string raw;
  for (; j < lines.size() && lines[j].kind == LineKind::DocString; ++j) {
    raw += lines[j].text;
    raw += '\n';
    if (j + 1 < lines.size() && lines[j + 1].starts_statement) break;
  }
  return strip_docstring(raw);
}

std::vector<std::string> split_bases(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  int depth = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || (text[i] == ',' && depth == 0)) {
      auto piece = trim(std::string_view(text).substr(start, i - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    } else if (text[i] == '(' || text[i] == '[') {
      ++depth;
    } else if (text[i] == ')' || text[i] == ']') {
      --depth;
    }
  }
  return out;
}

const std::regex& class_header() {
  static const std::regex re(R"(^class\s+([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*:)");
  return re;
}

const std::regex& def_header() {
  static const std::regex re(R"(^(?:async\s+)?def\s+([A-Za-z_]\w*)\s*\()");
  return re;
}

std::vector<ClassDef> collect_classes(std::string_view source, bool top_level_only) {
  auto scanned = scan(source);
  const auto& lines = scanned.lines;
  std::vector<ClassDef> classes;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (!line.starts_statement || line.kind != LineKind::Code) continue;
    if (top_level_only && line.indent != 0) continue;
    auto header = statement_text(lines, i);
    std::smatch m;
    if (!std::regex_search(header, m, class_header())) continue;
    ClassDef cls;
    cls.name = m[1].str();
    if (m[2].matched) cls.bases = split_bases(m[2].str());
    cls.indent = line.indent;
    cls.line = i + 1;

    if (top_level_only) {
      std::optional<std::size_t> body_indent;
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        const auto& inner = lines[j];
        if (!inner.starts_statement) continue;
        if (inner.kind != LineKind::Code && inner.kind != LineKind::DocString) continue;
        if (inner.indent <= cls.indent) break;
        if (!body_indent) body_indent = inner.indent;
        if (inner.indent != *body_indent || inner.kind != LineKind::Code) continue;
        auto def_text = statement_text(lines, j);
        std::smatch dm;
        if (!std::regex_search(def_text, dm, def_header())) continue;
        FunctionDef fn;
        fn.name = dm[1].str();
        fn.signature = def_text;
        fn.doc = docstring_after(lines, j);
        fn.indent = inner.indent;
        fn.line = j + 1;
        cls.methods.push_back(std::move(fn));
      }
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace

ScanResult scan(std::string_view source) {
  ScanResult result;
  std::optional<std::string> triple;  // active triple-quote delimiter
  bool triple_is_doc = false;
  int depth = 0;
  bool backslash = false;

  for (auto raw : split_lines(source)) {
    LineInfo info;
    info.text = raw;
    info.indent = indent_of(raw);
    const bool continuation = triple.has_value() || depth > 0 || backslash;
    auto trimmed = trim(raw);
    backslash = false;

    bool code = false;
    bool doc = false;
    bool comment = false;
    if (triple) {
      (triple_is_doc ? doc : code) = true;
    }

    const std::size_t first = raw.find_first_not_of(" \t");
    std::size_t i = 0;
    while (i < raw.size()) {
      if (triple) {
        auto close = raw.find(*triple, i);
        // Skip escaped delimiters.
        while (close != std::string_view::npos && close > 0 && raw[close - 1] == '\\') {
          close = raw.find(*triple, close + 1);
        }
        if (close == std::string_view::npos) {
          i = raw.size();
          break;
        }
        i = close + 3;
        triple.reset();
        continue;
      }
      char c = raw[i];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
        continue;
      }
      if (c == '#') {
        comment = true;
        break;
      }
      if (c == '"' || c == '\'') {
        if (raw.compare(i, 3, std::string(3, c)) == 0) {
          bool at_statement_start = !continuation && first != std::string_view::npos &&
                                    i - first <= 2;
          for (std::size_t k = first; at_statement_start && k < i; ++k) {
            if (!is_prefix_letter(raw[k])) at_statement_start = false;
          }
          triple = std::string(3, c);
          triple_is_doc = at_statement_start;
          (triple_is_doc ? doc : code) = true;
          i += 3;
          continue;
        }
        code = true;
        std::size_t j = i + 1;
        while (j < raw.size() && raw[j] != c) {
          j += (raw[j] == '\\') ? 2 : 1;
        }
        if (j >= raw.size()) {
          if (raw.back() == '\\') {
            backslash = true;
          } else {
            result.unterminated_string = true;
          }
        }
        i = j + 1;
        continue;
      }
      if (c == '\\' && i + 1 == raw.size()) {
        backslash = true;
        ++i;
        continue;
      }
      // String prefix letters directly before a docstring are part of it.
      if (is_prefix_letter(c) && i + 1 < raw.size() &&
          (raw[i + 1] == '"' || raw[i + 1] == '\'' ||
           (is_prefix_letter(raw[i + 1]) && i + 2 < raw.size() &&
            (raw[i + 2] == '"' || raw[i + 2] == '\'')))) {
        ++i;
        continue;
      }
      if (c == '(' || c == '[' || c == '{') ++depth;
      if (c == ')' || c == ']' || c == '}') {
        if (--depth < 0) {
          result.unbalanced_brackets = true;
          depth = 0;
        }
      }
      code = true;
      ++i;
    }

    if (trimmed.empty() && !triple && !doc && !code) {
      info.kind = LineKind::Blank;
    } else if (code) {
      info.kind = LineKind::Code;
    } else if (doc) {
      info.kind = LineKind::DocString;
    } else if (comment) {
      info.kind = LineKind::Comment;
    } else {
      info.kind = LineKind::Blank;
    }
    info.starts_statement = !continuation && (info.kind == LineKind::Code ||
                                              info.kind == LineKind::DocString);
    result.lines.push_back(info);
  }
  if (triple) result.unterminated_string = true;
  if (depth != 0) result.unbalanced_brackets = true;
  return result;
}

std::vector<ClassDef> top_level_classes(std::string_view source) {
  return collect_classes(source, true);
}

std::vector<ClassDef> all_classes(std::string_view source) {
  return collect_classes(source, false);
}

std::vector<std::string> imported_names(std::string_view source) {
  static const std::regex import_re(R"(^import\s+(.+)$)");
  static const std::regex from_re(R"(^from\s+([\w.]+)\s+import\s+(.+)$)");
  auto scanned = scan(source);
  std::vector<std::string> names;
  auto add_aliases = [&](const std::string& list) {
    for (auto& part : split_bases(list)) {
      std::string item = part;
      if (!item.empty() && item.front() == '(') item.erase(0, 1);
      if (!item.empty() && item.back() == ')') item.pop_back();
      auto as = item.find(" as ");
      std::string name = as == std::string::npos ? item : item.substr(as + 4);
      name = std::string(trim(name));
      if (as == std::string::npos) {
        auto dot = name.find('.');
        if (dot != std::string::npos) name = name.substr(0, dot);
      }
      if (!name.empty()) names.push_back(name);
    }
  };
  for (const auto& line : scanned.lines) {
    if (!line.starts_statement || line.kind != LineKind::Code) continue;
    std::string text(trim(line.text));
    std::smatch m;
    if (std::regex_match(text, m, import_re)) {
      add_aliases(m[1].str());
    } else if (std::regex_match(text, m, from_re)) {
      add_aliases(m[2].str());
    }
  }
  return names;
}

}  // namespace cascade::python
