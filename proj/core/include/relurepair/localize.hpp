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
#include <vector>

#include "relurepair/dataset.hpp"
#include "relurepair/model.hpp"
#include "relurepair/patterns.hpp"

namespace relurepair {

// Incoming edge of a neuron at a dense layer: weights(to, from).
struct Edge {
  std::size_t to = 0;
  std::size_t from = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct ScoredEdge {
  Edge edge;
  double score = 0.0;

  friend bool operator==(const ScoredEdge&, const ScoredEdge&) = default;
};

struct FaultSet {
  std::size_t layer_index = 0;
  std::vector<std::size_t> neurons;
  // Selected repair targets, highest score first.
  std::vector<ScoredEdge> edges;
  // Every scored edge, in (to, from) order.
  std::vector<ScoredEdge> scores;

  friend bool operator==(const FaultSet&, const FaultSet&) = default;
};

// Neurons of the pattern's layer whose on/off status on the traced failing
// input contradicts the pattern.
std::vector<std::size_t> suspicious_neurons(const ActivationPattern& pattern, const LayerTrace& trace);

// score(i) = mean_{X in fail} |N_i(X) w_i| - mean_{X in pass} |N_i(X) w_i|
// for every incoming edge i of `neuron` at dense layer `layer`; N_i(X) is the
// concrete value entering the layer. Indexed by source neuron.
std::vector<double> edge_scores(const Model& model, std::size_t layer, std::size_t neuron,
                                const Dataset& fail, const Dataset& pass);

// ceil(top_percent% of the edges) highest-scoring source indices (at least
// one), ties broken toward the lower index. Result ordered by rank.
std::vector<std::size_t> select_edges(const std::vector<double>& scores, double top_percent);
// The `k` highest-scoring source indices (all when k exceeds the count).
std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k);

// The output neuron blamed for a label in last-layer repair.
std::size_t last_layer_target(const Model& model, std::size_t label);

struct EdgeBudget {
  // Exactly one of these is used: top_k when non-zero, otherwise top_percent.
  double top_percent = 10.0;
  std::size_t top_k = 0;
};

// Scores the incoming edges of every listed neuron and keeps the best ones
// across the pooled candidates.
FaultSet localize(const Model& model, std::size_t layer, const std::vector<std::size_t>& neurons,
                  const Dataset& fail, const Dataset& pass, const EdgeBudget& budget);

}  // namespace relurepair
