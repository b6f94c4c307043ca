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

#include <random>

#include <benchmark/benchmark.h>

#include "relurepair/constraints.hpp"
#include "relurepair/ensemble.hpp"
#include "relurepair/localize.hpp"
#include "relurepair/model.hpp"
#include "relurepair/solver.hpp"

using namespace relurepair;

namespace {

Model mlp(std::uint64_t seed, const std::vector<std::size_t>& widths) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Dense d{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1], 0.0)};
    for (std::size_t r = 0; r < d.out_width(); ++r) {
      for (auto& w : d.weights.row(r)) w = g(rng);
    }
    layers.emplace_back(std::move(d));
    if (l + 2 < widths.size()) layers.emplace_back(Relu{});
  }
  return Model(widths.front(), widths.back(), std::move(layers));
}

Dataset images(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d{"bench", {}, {}, std::nullopt};
  for (std::size_t i = 0; i < count; ++i) {
    Vector x(784);
    for (auto& v : x) v = u(rng);
    d.inputs.push_back(std::move(x));
    d.labels.push_back(i % 10);
  }
  return d;
}

void BM_Forward(benchmark::State& state) {
  const Model m = mlp(1, {784, 32, 10});
  const Dataset d = images(2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(classify(m, d.inputs[0]));
}
BENCHMARK(BM_Forward);

void BM_EdgeScores(benchmark::State& state) {
  const Model m = mlp(1, {784, 32, 10});
  const Dataset fail = images(3, 5);
  const Dataset pass = images(4, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(edge_scores(m, 2, 7, fail, pass));
}
BENCHMARK(BM_EdgeScores)->Arg(10)->Arg(100);

void BM_SolveLastLayer(benchmark::State& state) {
  const Model m = mlp(1, {784, 32, 10});
  Dataset inputs = images(5, static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < inputs.size(); ++i) inputs.labels[i] = classify(m, inputs.inputs[i]);
  inputs.labels[0] = (inputs.labels[0] + 1) % 10;
  const std::size_t label = inputs.labels[0];
  const FaultSet fault = localize(m, 2, {label}, inputs.prefix(1), inputs, {10.0, 5});
  const ConstraintSystem system = lastlayer_system(m, label, inputs, Dataset{}, fault, {1e-3, 2.0});
  for (auto _ : state) benchmark::DoNotOptimize(solve(system));
}
BENCHMARK(BM_SolveLastLayer)->Arg(10)->Arg(110);

void BM_EnsemblePredict(benchmark::State& state) {
  const Model m = mlp(1, {784, 32, 10});
  std::vector<Expert> experts;
  for (std::size_t label = 0; label < 10; ++label) experts.push_back(Expert{label, 2, {{{label, 0}, 0.1}}, {}});
  const Ensemble ens(m, experts, static_cast<Strategy>(state.range(0)));
  const Dataset d = images(6, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ens.classify(d.inputs[0]));
}
BENCHMARK(BM_EnsemblePredict)->Arg(static_cast<int>(Strategy::kConfidence))->Arg(static_cast<int>(Strategy::kMerged));

}  // namespace

BENCHMARK_MAIN();
