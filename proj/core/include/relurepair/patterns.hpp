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

#include <cstddef>
#include <span>
#include <vector>

#include "relurepair/model.hpp"

namespace relurepair {

enum class Polarity { kCorrect, kIncorrect };

// Conjunction of on/off literals over the neurons of one layer.
struct ActivationPattern {
  std::size_t layer_index = 0;
  std::vector<std::size_t> on_set;
  std::vector<std::size_t> off_set;
  std::size_t label = 0;
  Polarity polarity = Polarity::kCorrect;
  std::size_t support = 0;
  double purity = 0.0;

  std::size_t literal_count() const { return on_set.size() + off_set.size(); }

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

struct MinerParams {
  std::size_t max_depth = 10;
  double min_purity = 0.95;
  std::size_t min_support = 10;
  // Extend each leaf path with every neuron whose status is unanimous across
  // the leaf's class members. Off by default: emitted patterns are then the
  // plain root-to-leaf paths.
  bool close_over_members = false;
  std::size_t label = 0;
};

// Throws ShapeError on a layer mismatch.
bool satisfies(const ActivationPattern& pattern, const ActivationSignature& sig);

// Learns a CART tree (Gini, binary on/off features, lowest feature index wins
// ties) separating the signatures flagged in `class_mask` from the rest and
// turns every sufficiently pure and supported member leaf into a pattern.
// Patterns are sorted by descending support. `support` counts all inputs
// reaching the leaf, `purity` the fraction of them flagged in the mask.
std::vector<ActivationPattern> mine(std::span<const ActivationSignature> signatures,
                                    std::span<const bool> class_mask, const MinerParams& params);

// As mine(), with the mask marking misclassified inputs; polarity is incorrect.
std::vector<ActivationPattern> mine_incorrect(std::span<const ActivationSignature> signatures,
                                              std::span<const bool> misclassified_mask,
                                              const MinerParams& params);

// Highest support, then higher purity, then fewer literals, then lowest first
// neuron index. Throws std::invalid_argument on an empty list.
const ActivationPattern& top_pattern(std::span<const ActivationPattern> patterns);

}  // namespace relurepair
