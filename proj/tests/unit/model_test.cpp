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

#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "relurepair/error.hpp"
#include "relurepair/model.hpp"
#include "toy.hpp"

using namespace relurepair;
using relurepair::testing::gradient_error;
using relurepair::testing::random_net;
using relurepair::testing::toy_data;
using relurepair::testing::toy_model;

namespace {

struct Row {
  double y0, y1;
  std::vector<bool> bits;  // N0, N1, N2, N3
  std::size_t cls;
};

std::vector<bool> toy_bits(const LayerTrace& t) {
  auto a = signature(t, 0).bits;
  const auto b = signature(t, 2).bits;
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("toy forward pass values and activation bits") {
  const Model m = toy_model();
  const Dataset d = toy_data();
  const std::vector<Row> rows = {
      {8.0, 6.0, {true, true, false, true}, 0},
      {0.25, 9.25, {true, true, true, true}, 1},
      {3.0, 2.25, {false, true, false, true}, 0},
      {-7.875, 13.125, {true, true, true, false}, 1},
      {12.6875, 12.6875, {true, true, true, true}, 1},
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    const LayerTrace t = forward(m, d.inputs[i]);
    CHECK(t.logits()[0] == doctest::Approx(rows[i].y0).epsilon(1e-12));
    CHECK(t.logits()[1] == doctest::Approx(rows[i].y1).epsilon(1e-12));
    CHECK(toy_bits(t) == rows[i].bits);
    CHECK(classify(m, d.inputs[i]) == rows[i].cls);
  }
}

TEST_CASE("toy X5 row is read on the model patched at N1->N2 by -0.4") {
  const Model patched = toy_model().with_weight_delta(2, 0, 1, -0.4);
  const LayerTrace t = forward(patched, toy_data().inputs[5]);
  CHECK(std::abs(t.logits()[0] - 5.905) < 1e-9);
  CHECK(std::abs(t.logits()[1] - 5.625) < 1e-9);
  CHECK(toy_bits(t) == std::vector<bool>{true, true, true, true});
  CHECK(argmax(t.logits()) == 0);
  // The unpatched model already gets X5 right.
  CHECK(classify(toy_model(), toy_data().inputs[5]) == 1);
}

TEST_CASE("argmax breaks ties toward the larger index") {
  CHECK(argmax(std::vector<double>{1.0, 1.0}) == 1);
  CHECK(argmax(std::vector<double>{3.0, 1.0, 3.0, 2.0}) == 2);
  CHECK(argmax(std::vector<double>{-1.0}) == 0);
}

TEST_CASE("model construction rejects inconsistent shapes") {
  Dense ok{Matrix(2, 2), {0, 0}};
  CHECK_THROWS_AS(Model(3, 2, {ok}), ShapeError);
  CHECK_THROWS_AS(Model(2, 3, {ok}), ShapeError);
  CHECK_THROWS_AS(Model(2, 2, {Dense{Matrix(2, 2), {0}}}), ShapeError);
  CHECK_THROWS_AS(Model(2, 2, {Relu{}}), ShapeError);
  CHECK_THROWS_AS(Model(2, 1, {Dense{Matrix(1, 2), {0}}}), ShapeError);
  Dense nan{Matrix(2, 2, std::nan("")), {0, 0}};
  CHECK_THROWS_AS(Model(2, 2, {nan}), ShapeError);
  CHECK_THROWS_AS(forward(toy_model(), std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("signature requires a dense layer feeding a ReLU") {
  const LayerTrace t = forward(toy_model(), toy_data().inputs[0]);
  CHECK_THROWS_AS(signature(t, 1), ShapeError);
  CHECK_THROWS_AS(signature(t, 4), ShapeError);
  CHECK(signature(t, 0).layer_index == 0);
}

TEST_CASE("with_weight_delta leaves the original untouched") {
  const Model m = toy_model();
  const Model p = m.with_weight_delta(2, 0, 1, -0.4);
  CHECK(m.dense(2).weights(0, 1) == -1.5);
  CHECK(p.dense(2).weights(0, 1) == doctest::Approx(-1.9));
  CHECK_THROWS_AS(m.with_weight_delta(1, 0, 0, 1.0), ShapeError);
  CHECK_THROWS_AS(m.with_weight_delta(2, 2, 0, 1.0), ShapeError);
}

TEST_CASE("forward_from and forward_range agree with forward") {
  const Model m = toy_model();
  for (const auto& x : toy_data().inputs) {
    const LayerTrace t = forward(m, x);
    for (std::size_t k = 0; k <= m.layer_count(); ++k) {
      const Vector mid = forward_range(m, 0, k, x);
      CHECK(mid == (k == 0 ? t.input : t.values[k - 1]));
      CHECK(forward_from(m, k, mid) == t.logits());
    }
  }
  const Dense replacement = m.with_weight_delta(2, 0, 1, -0.4).dense(2);
  const Vector x = toy_data().inputs[4];
  const Vector via_replacement = forward_from(m, 2, forward(m, x).layer_input(2), &replacement);
  CHECK(via_replacement == forward(m.with_weight_delta(2, 0, 1, -0.4), x).logits());
}

TEST_CASE("layer helpers on the toy network") {
  const Model m = toy_model();
  CHECK(m.output_layer() == 4);
  CHECK(m.penultimate_dense() == std::optional<std::size_t>(2));
  CHECK(m.feeds_relu(0));
  CHECK_FALSE(m.feeds_relu(4));
  CHECK(m.input_width(2) == 2);
}

TEST_CASE("mac_count sums dense layer products") {
  std::mt19937_64 rng(3);
  const Model m = random_net(rng, {4, 6, 5, 3});
  CHECK(mac_count(m) == 24 + 30 + 15);
  CHECK(mac_count(m, 0, 2) == 24);
  CHECK(mac_count(m, 2) == 45);
}

TEST_CASE("input_gradient matches central finite differences on random nets") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> width(2, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int net = 0; net < 50; ++net) {
    const std::size_t depth = 1 + net % 3;
    std::vector<std::size_t> widths{width(rng)};
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(width(rng));
    widths.push_back(2 + net % 3);
    const Model m = random_net(rng, widths, 0.8);
    Vector x(widths.front());
    for (auto& v : x) v = u(rng);
    const std::size_t label = net % m.class_count();
    const double rel = gradient_error(m, x, label);
    CAPTURE(net);
    CHECK(rel < 1e-4);
    ++checked;
  }
  CHECK(checked == 50);
}
