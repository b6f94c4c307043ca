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
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "relurepair/ensemble.hpp"
#include "relurepair/error.hpp"
#include "toy.hpp"

using namespace relurepair;
using relurepair::testing::random_net;
using relurepair::testing::reference_predict;
using relurepair::testing::toy_data;
using relurepair::testing::toy_model;

namespace {

Expert expert(std::size_t label, std::size_t layer, std::map<Edge, double> deltas) {
  Expert e;
  e.label = label;
  e.layer_index = layer;
  e.deltas = std::move(deltas);
  return e;
}

// Logits equal the first input coordinate times column 0 of the weights.
Model selector(std::size_t classes) {
  Dense d{Matrix(classes, 1), Vector(classes, 0.0)};
  d.weights(0, 0) = 1.0;
  return Model(1, classes, {d});
}

const Strategy kAll[] = {Strategy::kNaive, Strategy::kConfidence, Strategy::kVoting, Strategy::kMerged};

}  // namespace

TEST_CASE("apply_expert on the toy net") {
  const Model base = toy_model();
  const Dataset d = toy_data();
  const Model fixed = apply_expert(base, expert(0, 2, {{{0, 1}, -0.4}}));
  CHECK(fixed.dense(2).weights(0, 1) == doctest::Approx(-1.9));
  CHECK(base.dense(2).weights(0, 1) == -1.5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(classify(fixed, d.inputs[i]) == d.labels[i]);
  CHECK(apply_expert(base, expert(0, 2, {})) == base);

  const Model last = apply_expert(fixed, expert(1, 4, {{{1, 1}, 0.1}}));
  CHECK(last.dense(4).weights(1, 1) == doctest::Approx(1.6));
  CHECK(classify(last, d.inputs[5]) == 1);
  // The unrepaired net gets X4 wrong; X5 only fails once the first repair is in.
  CHECK(evaluate(base, d.prefix(5)) == doctest::Approx(4.0 / 5.0));
  CHECK(evaluate(base, d) == doctest::Approx(5.0 / 6.0));
  CHECK(evaluate(fixed, d) == doctest::Approx(5.0 / 6.0));
  CHECK(classify(fixed, d.inputs[5]) == 0);
  CHECK(evaluate(last, d) == 1.0);

  const Model back = apply_expert(fixed, expert(0, 2, {{{0, 1}, 0.4}}));
  CHECK(back.dense(2).weights(0, 1) == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK_THROWS_AS(apply_expert(base, expert(0, 2, {{{5, 0}, 1.0}})), ShapeError);
}

TEST_CASE("evaluate") {
  const Dataset same{"c", {{0.0}, {1.0}}, {2, 2}, std::nullopt};
  CHECK(evaluate([](std::span<const double>) { return std::size_t{2}; }, same) == 1.0);
  CHECK_THROWS_AS(evaluate(toy_model(), Dataset{}), std::invalid_argument);
}

TEST_CASE("merge_experts") {
  const Model base = toy_model();
  const Expert a = expert(0, 2, {{{0, 1}, -0.4}});
  const Expert b = expert(1, 2, {{{0, 1}, -0.2}});
  const std::vector<Expert> pair{a, b};
  CHECK(merge_experts(base, pair).dense(2).weights(0, 1) == doctest::Approx(-1.8));
  const std::vector<Expert> single{a};
  CHECK(merge_experts(base, single) == apply_expert(base, a));

  const std::vector<Expert> disjoint{expert(0, 4, {{{0, 0}, 0.5}}), expert(1, 4, {{{1, 1}, 0.1}})};
  const Model m = merge_experts(base, disjoint);
  CHECK(m.dense(4).weights(0, 0) == doctest::Approx(-1.0));
  CHECK(m.dense(4).weights(1, 1) == doctest::Approx(1.6));

  const std::vector<Expert> overlap{expert(0, 4, {{{0, 0}, 0.5}}), expert(1, 4, {{{0, 0}, 0.1}})};
  CHECK_THROWS_AS(merge_experts(base, overlap), IntegrityError);
  const std::vector<Expert> mixed{a, expert(1, 4, {})};
  CHECK_THROWS_AS(merge_experts(base, mixed), IntegrityError);
}

TEST_CASE("combination rules on a selector fixture") {
  const Model base = selector(6);
  const Vector x{1.0};
  const Expert e2 = expert(2, 0, {{{2, 0}, 4.0}});
  const Expert e5 = expert(5, 0, {{{5, 0}, 7.5}});
  const Expert e3 = expert(3, 0, {{{3, 0}, 0.5}});

  const auto run = [&](std::vector<Expert> es, Strategy s) { return Ensemble(base, std::move(es), s).predict(x); };
  auto [label, report] = run({e2, e5, e3}, Strategy::kConfidence);
  CHECK(label == 5);
  CHECK(report.resolution == Resolution::kConfidence);
  CHECK(report.members == std::vector<std::size_t>{2, 5});
  CHECK(run({e2, e5, e3}, Strategy::kNaive).first == 0);
  CHECK(run({e2, e5, e3}, Strategy::kVoting).second.resolution == Resolution::kVotingTie);
  CHECK(run({e2, e5, e3}, Strategy::kVoting).first == 0);
  CHECK(run({e3}, Strategy::kVoting).second.resolution == Resolution::kBaseNoExpert);
  CHECK(run({e3}, Strategy::kVoting).first == 0);
  CHECK(run({e2, e3}, Strategy::kNaive).first == 2);
  CHECK(run({e2, e3}, Strategy::kNaive).second.resolution == Resolution::kUniqueExpert);

  // A non-member expert still votes.
  const Expert e4 = expert(4, 0, {{{5, 0}, 9.0}});
  const auto voted = run({e2, e5, e4}, Strategy::kVoting);
  CHECK(voted.first == 5);
  CHECK(voted.second.resolution == Resolution::kVoting);

  CHECK_THROWS_AS(Ensemble(base, {e2, expert(2, 0, {})}, Strategy::kNaive), IntegrityError);
  CHECK_THROWS_AS(Ensemble(base, {expert(7, 0, {})}, Strategy::kNaive), ShapeError);
}

TEST_CASE("ensemble matches the reference on every expert subset") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int net = 0; net < 10; ++net) {
    const Model base = random_net(rng, {3, 5, 4, 3});
    for (std::size_t layer : {std::size_t{2}, std::size_t{4}}) {
      std::vector<Expert> pool;
      for (std::size_t label = 0; label < 3; ++label) {
        std::map<Edge, double> deltas;
        const std::size_t to = layer == 4 ? label : label + net % 2;
        for (std::size_t from = 0; from < 4; ++from) deltas[{to, from}] = 1.5 * g(rng);
        pool.push_back(expert(label, layer, deltas));
      }
      for (unsigned mask = 0; mask < 8; ++mask) {
        std::vector<Expert> chosen;
        for (std::size_t i = 0; i < 3; ++i) {
          if (mask & (1u << i)) chosen.push_back(pool[i]);
        }
        for (Strategy s : kAll) {
          if (s == Strategy::kMerged && layer == 2 && chosen.empty()) continue;
          const Ensemble ens(base, chosen, s);
          for (int k = 0; k < 30; ++k) {
            const Vector x{g(rng), g(rng), g(rng)};
            CAPTURE(mask);
            CHECK(ens.classify(x) == reference_predict(base, chosen, s, x));
            if (s == Strategy::kMerged) continue;
            const auto rep = ens.predict(x).second;
            REQUIRE(rep.expert_logits.size() == chosen.size());
            for (std::size_t i = 0; i < chosen.size(); ++i) {
              const Vector full = forward(apply_expert(base, chosen[i]), x).logits();
              for (std::size_t c = 0; c < full.size(); ++c) {
                CHECK(rep.expert_logits[i][c] == doctest::Approx(full[c]).epsilon(1e-12));
              }
            }
          }
        }
      }
    }
  }
}

TEST_CASE("zero-delta experts never change a prediction") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  const Model base = random_net(rng, {3, 5, 4, 3});
  const std::vector<Expert> zeros{expert(0, 2, {}), expert(1, 2, {{{1, 1}, 0.0}}), expert(2, 2, {})};
  for (Strategy s : kAll) {
    const Ensemble ens(base, zeros, s);
    for (int k = 0; k < 100; ++k) {
      const Vector x{g(rng), g(rng), g(rng)};
      CHECK(ens.classify(x) == classify(base, x));
    }
  }
}

TEST_CASE("operation counts") {
  std::mt19937_64 rng(1);
  const Model base = random_net(rng, {4, 6, 5, 3});
  const std::vector<Expert> three{expert(0, 2, {}), expert(1, 2, {}), expert(2, 2, {})};
  CHECK(Ensemble(base, three, Strategy::kConfidence).mac_count() == 24 + 3 * (30 + 15));
  CHECK(Ensemble(base, three, Strategy::kMerged).mac_count() == 24 + 30 + 15);
  const std::vector<Expert> last{expert(0, 4, {}), expert(1, 4, {})};
  CHECK(Ensemble(base, last, Strategy::kVoting).mac_count() == 24 + 30 + 2 * 15);
}

TEST_CASE("f1 filter") {
  const Model base = toy_model().with_weight_delta(2, 0, 1, -0.4);
  const Dataset d = toy_data();
  const Expert fix = expert(1, 4, {{{1, 1}, 0.1}});
  const Expert noop = expert(0, 4, {});
  const Model fixed = apply_expert(base, fix);
  for (std::size_t i = 0; i < 5; ++i) CHECK(classify(fixed, d.inputs[i]) == classify(base, d.inputs[i]));
  const std::vector<Expert> experts{noop, fix};
  const auto kept = f1_filter(base, experts, d);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].label == 1);
  CHECK_THROWS_AS(f1_filter(base, experts, Dataset{}), std::invalid_argument);

  const std::vector<std::size_t> pred{0, 1, 1, 0}, ideal{0, 1, 0, 1};
  CHECK(f1_score(pred, ideal, 1) == doctest::Approx(0.5));
  CHECK(f1_score(pred, ideal, 2) == 0.0);
}

TEST_CASE("strategy names") {
  for (Strategy s : kAll) CHECK(strategy_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(strategy_from_string("average"), std::invalid_argument);
}
