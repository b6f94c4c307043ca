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

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace relurepair::testing {

Model random_net(std::mt19937_64& rng, const std::vector<std::size_t>& widths, double stddev) {
  std::normal_distribution<double> g(0.0, stddev);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Dense d{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1])};
    for (std::size_t r = 0; r < d.out_width(); ++r) {
      for (auto& w : d.weights.row(r)) w = g(rng);
      d.biases[r] = g(rng);
    }
    layers.emplace_back(std::move(d));
    if (l + 2 < widths.size()) layers.emplace_back(Relu{});
  }
  return Model(widths.front(), widths.back(), std::move(layers));
}

ConstraintSystem random_system(std::mt19937_64& rng, bool planted) {
  std::uniform_int_distribution<std::size_t> nvars(1, 8);
  std::uniform_int_distribution<std::size_t> nrows(1, 40);
  std::uniform_int_distribution<int> small(-4, 4);
  std::uniform_int_distribution<int> rel(0, 3);
  std::uniform_int_distribution<int> grid(-32, 32);
  std::bernoulli_distribution sparse(0.4);
  const auto unit = [&] { return grid(rng) / 32.0; };

  ConstraintSystem s;
  s.margin = 1.0 / 1024.0;
  s.delta_bound = 1.0 + std::abs(unit());
  const std::size_t n = nvars(rng);
  for (std::size_t v = 0; v < n; ++v) s.declare({0, v, v});
  std::vector<double> point(n);
  for (auto& p : point) p = unit() * 0.75 * s.delta_bound;
  const std::size_t m = std::min<std::size_t>(nrows(rng), 40 - 2 * n);
  for (std::size_t r = 0; r < m; ++r) {
    AffineExpr e(small(rng) * 0.25);
    for (std::size_t v = 0; v < n; ++v) {
      if (sparse(rng)) e.add_term(v, small(rng) * 0.5);
    }
    const auto relation = static_cast<Relation>(rel(rng));
    double bound = small(rng) * 0.5;
    if (planted) {
      const double at = e.evaluate(point);
      const double slack = std::abs(unit()) + s.margin;
      const bool upper = relation == Relation::kLe || relation == Relation::kLt;
      bound = upper ? at + slack : at - slack;
    }
    s.add(std::move(e), relation, bound);
  }
  s.add_delta_bounds();
  return s;
}

std::size_t reference_predict(const Model& base, const std::vector<Expert>& experts, Strategy strategy,
                              const Vector& x) {
  if (strategy == Strategy::kMerged) return classify(merge_experts(base, experts), x);
  std::vector<std::size_t> votes;
  std::vector<std::size_t> members;
  std::vector<double> conf;
  for (const auto& e : experts) {
    const Vector logits = forward(apply_expert(base, e), x).logits();
    votes.push_back(argmax(logits));
    if (votes.back() == e.label) {
      members.push_back(e.label);
      conf.push_back(std::abs(logits[e.label]));
    }
  }
  const std::size_t fallback = classify(base, x);
  if (members.empty()) return fallback;
  if (members.size() == 1) return members[0];
  if (strategy == Strategy::kNaive) return fallback;
  if (strategy == Strategy::kConfidence) {
    return members[std::max_element(conf.begin(), conf.end()) - conf.begin()];
  }
  std::vector<long> tally;
  for (std::size_t m : members) tally.push_back(std::count(votes.begin(), votes.end(), m));
  const long top = *std::max_element(tally.begin(), tally.end());
  if (std::count(tally.begin(), tally.end(), top) > 1) return fallback;
  return members[std::max_element(tally.begin(), tally.end()) - tally.begin()];
}

double softmax_loss(const Model& model, const Vector& x, std::size_t label) {
  const Vector logits = forward(model, x).logits();
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - top);
  return std::log(total) + top - logits[label];
}

double gradient_error(const Model& model, const Vector& x, std::size_t label) {
  const Vector g = input_gradient(model, x, label);
  double diff = 0.0, norm = 0.0;
  const double h = 1e-6;
  for (std::size_t j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (softmax_loss(model, xp, label) - softmax_loss(model, xm, label)) / (2 * h);
    diff += (fd - g[j]) * (fd - g[j]);
    norm += std::max(fd * fd, g[j] * g[j]);
  }
  return norm > 0 ? std::sqrt(diff / norm) : std::sqrt(diff);
}

}  // namespace relurepair::testing
