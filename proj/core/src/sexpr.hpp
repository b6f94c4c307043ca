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

#pragma once

// Minimal s-expression reader for the SMT-LIB subset we emit and for the
// models an external solver prints back.

#include <string>
#include <string_view>
#include <vector>

namespace relurepair::sexpr {

struct Node {
  std::string atom;
  std::vector<Node> list;
  bool is_list = false;
};

// Parses every top-level form; `;` comments are skipped and collected
// (without the leading semicolons) into `comments` when provided.
std::vector<Node> parse(std::string_view text, std::vector<std::string>* comments = nullptr);

// Evaluates a variable-free arithmetic term: decimals, (- x), (- a b),
// (+ ...), (* ...), (/ a b).
double constant_value(const Node& node);

}  // namespace relurepair::sexpr
