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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relurepair/constraints.hpp"
#include "relurepair/ensemble.hpp"
#include "relurepair/localize.hpp"
#include "relurepair/model.hpp"
#include "relurepair/patterns.hpp"
#include "relurepair/solver.hpp"

namespace relurepair {

using Json = nlohmann::json;

// {"input_dim", "class_count", "layers": [{"kind": "dense", "weights": [[..]],
// "biases": [..]}, {"kind": "relu"}, {"kind": "flatten"}]}
Json model_to_json(const Model& model);
Model model_from_json(const Json& j);
Model load_model(const std::filesystem::path& path);
void save_model(const Model& model, const std::filesystem::path& path);

// {layer, label, polarity, on, off, support, purity}
Json pattern_to_json(const ActivationPattern& p);
ActivationPattern pattern_from_json(const Json& j);
Json patterns_to_json(std::span<const ActivationPattern> patterns);
std::vector<ActivationPattern> patterns_from_json(const Json& j);

// {layer, neurons, edges: [{to, from, score}]}
Json fault_to_json(const FaultSet& fault);

// {label, layer, deltas: [{to, from, value}]}
Json expert_to_json(const Expert& e);
Expert expert_from_json(const Json& j);

// {status, objective, deltas: [{layer, to, from, value}]}
Json solution_to_json(const Solution& s, const ConstraintSystem& system);

// Debug dump: {margin, delta_bound, variables, constraints: [{terms, constant, relation, bound}]}
Json system_to_json(const ConstraintSystem& system);

Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace relurepair
