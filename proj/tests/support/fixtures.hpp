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

#include <random>
#include <vector>

#include "relurepair/constraints.hpp"
#include "relurepair/ensemble.hpp"
#include "relurepair/model.hpp"

namespace relurepair::testing {

// Dense ReLU net with normal(0, stddev) weights and biases.
Model random_net(std::mt19937_64& rng, const std::vector<std::size_t>& widths, double stddev = 1.0);

// At most 8 variables and 40 rows including the delta bounds. With `planted`
// every row holds at a hidden point; otherwise right-hand sides are random.
// All numbers are short dyadic fractions.
ConstraintSystem random_system(std::mt19937_64& rng, bool planted);

// Combination rules restated over fully patched models.
std::size_t reference_predict(const Model& base, const std::vector<Expert>& experts, Strategy strategy,
                              const Vector& x);

double softmax_loss(const Model& model, const Vector& x, std::size_t label);

// Relative L2 error between input_gradient and central differences.
double gradient_error(const Model& model, const Vector& x, std::size_t label);

}  // namespace relurepair::testing
