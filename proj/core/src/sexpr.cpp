/* Copyright 2026 The relurepair Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sexpr.hpp"

#include <cctype>
#include <charconv>

#include "relurepair/error.hpp"

namespace relurepair::sexpr {
namespace {

class Reader {
 public:
  Reader(std::string_view text, std::vector<std::string>* comments) : text_(text), comments_(comments) {}

  std::vector<Node> all() {
    std::vector<Node> out;
    skip();
    while (pos_ < text_.size()) {
      out.push_back(node());
      skip();
    }
    return out;
  }

 private:
  void skip() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == ';') {
        const auto end = text_.find('\n', pos_);
        std::string_view line = text_.substr(pos_, end == std::string_view::npos ? end : end - pos_);
        while (!line.empty() && line.front() == ';') line.remove_prefix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (comments_ != nullptr) comments_->emplace_back(line);
        pos_ = end == std::string_view::npos ? text_.size() : end + 1;
      } else {
        break;
      }
    }
  }

  Node node() {
    Node n;
    if (text_[pos_] == '(') {
      ++pos_;
      n.is_list = true;
      skip();
      while (pos_ < text_.size() && text_[pos_] != ')') {
        n.list.push_back(node());
        skip();
      }
      if (pos_ >= text_.size()) throw LoadError(LoadError::Kind::kSchema, "smt: unbalanced parenthesis");
      ++pos_;
      return n;
    }
    if (text_[pos_] == ')') throw LoadError(LoadError::Kind::kSchema, "smt: unexpected ')'");
    if (text_[pos_] == '|') {
      const auto end = text_.find('|', pos_ + 1);
      if (end == std::string_view::npos) throw LoadError(LoadError::Kind::kSchema, "smt: unterminated symbol");
      n.atom = std::string(text_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return n;
    }
    const auto start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ';') {
      ++pos_;
    }
    n.atom = std::string(text_.substr(start, pos_ - start));
    return n;
  }

  std::string_view text_;
  std::vector<std::string>* comments_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Node> parse(std::string_view text, std::vector<std::string>* comments) {
  return Reader(text, comments).all();
}

double constant_value(const Node& node) {
  if (!node.is_list) {
    double v = 0.0;
    const auto* end = node.atom.data() + node.atom.size();
    const auto [ptr, ec] = std::from_chars(node.atom.data(), end, v);
    if (node.atom.empty() || ec != std::errc() || ptr != end) {
      throw LoadError(LoadError::Kind::kSchema, "smt: expected a number, got '" + node.atom + "'");
    }
    return v;
  }
  if (node.list.empty() || node.list.front().is_list) {
    throw LoadError(LoadError::Kind::kSchema, "smt: malformed term");
  }
  const std::string& op = node.list.front().atom;
  const std::size_t argc = node.list.size() - 1;
  if (op == "-" && argc == 1) return -constant_value(node.list[1]);
  if (op == "-" && argc == 2) return constant_value(node.list[1]) - constant_value(node.list[2]);
  if (op == "/" && argc == 2) return constant_value(node.list[1]) / constant_value(node.list[2]);
  if (op == "+" || op == "*") {
    double acc = op == "+" ? 0.0 : 1.0;
    for (std::size_t i = 1; i < node.list.size(); ++i) {
      acc = op == "+" ? acc + constant_value(node.list[i]) : acc * constant_value(node.list[i]);
    }
    return acc;
  }
  throw LoadError(LoadError::Kind::kSchema, "smt: unsupported operator '" + op + "'");
}

}  // namespace relurepair::sexpr
