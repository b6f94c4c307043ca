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

#include "relurepair/localize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "relurepair/error.hpp"

namespace relurepair {
namespace {

std::vector<double> mean_abs_flow(const Model& model, std::size_t layer, std::size_t neuron,
                                  const Dataset& data) {
  const Dense& dense = model.dense(layer);
  const auto weights = dense.weights.row(neuron);
  std::vector<double> acc(weights.size(), 0.0);
  for (const auto& x : data.inputs) {
    const LayerTrace trace = forward(model, x);
    const Vector& upstream = trace.layer_input(layer);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::abs(upstream[i] * weights[i]);
  }
  for (double& a : acc) a /= static_cast<double>(data.size());
  return acc;
}

std::vector<std::size_t> ranked(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::vector<std::size_t> suspicious_neurons(const ActivationPattern& pattern, const LayerTrace& trace) {
  const ActivationSignature sig = signature(trace, pattern.layer_index);
  std::vector<std::size_t> out;
  for (std::size_t n : pattern.on_set) {
    if (n >= sig.bits.size()) throw ShapeError("pattern neuron index out of range");
    if (!sig.bits[n]) out.push_back(n);
  }
  for (std::size_t n : pattern.off_set) {
    if (n >= sig.bits.size()) throw ShapeError("pattern neuron index out of range");
    if (sig.bits[n]) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> edge_scores(const Model& model, std::size_t layer, std::size_t neuron,
                                const Dataset& fail, const Dataset& pass) {
  if (fail.empty() || pass.empty()) throw std::invalid_argument("edge_scores: empty fail or pass set");
  if (neuron >= model.dense(layer).out_width()) {
    throw ShapeError("neuron " + std::to_string(neuron) + " out of range at layer " + std::to_string(layer));
  }
  std::vector<double> scores = mean_abs_flow(model, layer, neuron, fail);
  const std::vector<double> passing = mean_abs_flow(model, layer, neuron, pass);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] -= passing[i];
  return scores;
}

std::vector<std::size_t> select_edges(const std::vector<double>& scores, double top_percent) {
  if (scores.empty()) throw std::invalid_argument("select_edges: no scores");
  if (!(top_percent > 0.0 && top_percent <= 100.0)) {
    throw std::invalid_argument("select_edges: top_percent must lie in (0, 100]");
  }
  // The epsilon keeps exact products such as 50% of 2 from rounding up.
  const double wanted = std::ceil(top_percent / 100.0 * static_cast<double>(scores.size()) - 1e-9);
  const auto count = std::clamp<std::size_t>(static_cast<std::size_t>(wanted), 1, scores.size());
  return select_top_k(scores, count);
}

std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k) {
  if (scores.empty()) throw std::invalid_argument("select_top_k: no scores");
  std::vector<std::size_t> order = ranked(scores);
  order.resize(std::min(std::max<std::size_t>(k, 1), order.size()));
  return order;
}

std::size_t last_layer_target(const Model& model, std::size_t label) {
  if (label >= model.class_count()) throw ShapeError("label out of range");
  return label;
}

FaultSet localize(const Model& model, std::size_t layer, const std::vector<std::size_t>& neurons,
                  const Dataset& fail, const Dataset& pass, const EdgeBudget& budget) {
  if (neurons.empty()) throw std::invalid_argument("localize: no suspicious neurons");
  FaultSet fault;
  fault.layer_index = layer;
  fault.neurons = neurons;
  std::sort(fault.neurons.begin(), fault.neurons.end());
  fault.neurons.erase(std::unique(fault.neurons.begin(), fault.neurons.end()), fault.neurons.end());

  std::vector<double> pooled;
  for (std::size_t n : fault.neurons) {
    const auto scores = edge_scores(model, layer, n, fail, pass);
    for (std::size_t from = 0; from < scores.size(); ++from) {
      fault.scores.push_back({{n, from}, scores[from]});
      pooled.push_back(scores[from]);
    }
  }
  const auto picked =
      budget.top_k > 0 ? select_top_k(pooled, budget.top_k) : select_edges(pooled, budget.top_percent);
  for (std::size_t i : picked) fault.edges.push_back(fault.scores[i]);
  return fault;
}

}  // namespace relurepair
