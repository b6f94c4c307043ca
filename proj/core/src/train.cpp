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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "relurepair/error.hpp"
#include "relurepair/pipeline.hpp"

namespace relurepair {
namespace {

struct Grad {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

}  // namespace

Model train_fixture(const std::vector<std::size_t>& widths, const Dataset& train, const TrainParams& params) {
  if (widths.size() < 2) throw ShapeError("architecture needs at least input and output widths");
  if (train.empty()) throw ShapeError("training set is empty");
  if (train.inputs.front().size() != widths.front()) throw ShapeError("architecture input width does not match data");
  if (params.batch_size == 0) throw std::invalid_argument("batch_size must be positive");

  std::mt19937_64 rng(params.seed);
  const std::size_t depth = widths.size() - 1;
  std::vector<Dense> dense(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    dense[l].weights = Matrix(widths[l + 1], widths[l]);
    dense[l].biases.assign(widths[l + 1], 0.0);
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(widths[l])));
    for (std::size_t r = 0; r < widths[l + 1]; ++r) {
      for (auto& w : dense[l].weights.row(r)) w = init(rng);
    }
  }

  Grad grad;
  for (const auto& d : dense) {
    grad.weights.emplace_back(d.out_width(), d.in_width());
    grad.biases.emplace_back(d.out_width(), 0.0);
  }
  std::vector<Vector> acts(depth + 1);
  std::vector<Vector> deltas(depth);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t stop = std::min(order.size(), start + params.batch_size);
      for (std::size_t l = 0; l < depth; ++l) {
        std::fill(grad.biases[l].begin(), grad.biases[l].end(), 0.0);
        for (std::size_t r = 0; r < grad.weights[l].rows(); ++r) {
          auto row = grad.weights[l].row(r);
          std::fill(row.begin(), row.end(), 0.0);
        }
      }
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        acts[0] = train.inputs[i];
        for (std::size_t l = 0; l < depth; ++l) {
          Vector& out = acts[l + 1];
          out = dense[l].biases;
          for (std::size_t r = 0; r < out.size(); ++r) {
            const auto row = dense[l].weights.row(r);
            double acc = 0.0;
            for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * acts[l][c];
            out[r] += acc;
            if (l + 1 < depth && out[r] < 0.0) out[r] = 0.0;
          }
        }
        Vector& top = deltas[depth - 1];
        top = acts[depth];
        const double peak = *std::max_element(top.begin(), top.end());
        double total = 0.0;
        for (double& v : top) total += (v = std::exp(v - peak));
        for (double& v : top) v /= total;
        top[train.training_label(i)] -= 1.0;
        for (std::size_t l = depth; l-- > 0;) {
          const Vector& d = deltas[l];
          for (std::size_t r = 0; r < d.size(); ++r) {
            grad.biases[l][r] += d[r];
            auto row = grad.weights[l].row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += d[r] * acts[l][c];
          }
          if (l == 0) break;
          Vector& below = deltas[l - 1];
          below.assign(dense[l].in_width(), 0.0);
          for (std::size_t r = 0; r < d.size(); ++r) {
            const auto row = dense[l].weights.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) below[c] += row[c] * d[r];
          }
          for (std::size_t c = 0; c < below.size(); ++c) {
            if (!(acts[l][c] > 0.0)) below[c] = 0.0;
          }
        }
      }
      const double step = params.learning_rate / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < depth; ++l) {
        for (std::size_t r = 0; r < dense[l].out_width(); ++r) {
          dense[l].biases[r] -= step * grad.biases[l][r];
          auto row = dense[l].weights.row(r);
          const auto g = grad.weights[l].row(r);
          for (std::size_t c = 0; c < row.size(); ++c) row[c] -= step * g[c];
        }
      }
    }
  }

  std::vector<Layer> layers;
  for (std::size_t l = 0; l < depth; ++l) {
    layers.emplace_back(std::move(dense[l]));
    if (l + 1 < depth) layers.emplace_back(Relu{});
  }
  Model model(widths.front(), widths.back(), std::move(layers));

  if (params.floor_accuracy > 0.0) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (classify(model, train.inputs[i]) == train.training_label(i)) ++hits;
    }
    const double accuracy = static_cast<double>(hits) / static_cast<double>(train.size());
    if (accuracy < params.floor_accuracy) {
      throw TrainingError("training accuracy " + std::to_string(accuracy) + " below floor " +
                          std::to_string(params.floor_accuracy));
    }
  }
  return model;
}

Dataset poisoned_training_set(const Dataset& train, const RepairConfig& config) {
  const std::size_t n = std::min(config.poison_prefix, train.size());
  Dataset out = poison(train.prefix(n), config.trigger, config.image);
  std::vector<std::size_t> rest(train.size() - n);
  std::iota(rest.begin(), rest.end(), n);
  out.append(train.subset(rest));
  out.name = "P-" + train.name;
  return out;
}

ScenarioData prepare_scenario(const RepairConfig& config, const Model& model, const Dataset& train,
                              const Dataset& test) {
  config.validate();
  ScenarioData data;
  switch (config.scenario) {
    case Scenario::kAccuracy:
      data.repair = train;
      data.normal = train;
      data.normal_is_repair = true;
      data.evaluation = {test};
      break;
    case Scenario::kPoison: {
      const std::size_t n = std::min(config.poison_prefix, train.size());
      data.repair = poison(train.prefix(n), config.trigger, config.image);
      std::vector<std::size_t> rest(train.size() - n);
      std::iota(rest.begin(), rest.end(), n);
      data.normal = train.subset(rest, train.name);
      data.evaluation = {poison(test, config.trigger, config.image), test};
      break;
    }
    case Scenario::kAdversarial:
      data.repair = fgsm(model, train.prefix(config.adversarial_train_size), config.epsilon);
      data.normal = train;
      data.evaluation = {fgsm(model, test, config.epsilon), test};
      break;
  }
  return data;
}

}  // namespace relurepair
