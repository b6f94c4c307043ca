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

#include <fstream>

#include "doctest.h"
#include "relurepair/error.hpp"
#include "relurepair/serialize.hpp"
#include "temp_dir.hpp"
#include "toy.hpp"

using namespace relurepair;
using relurepair::testing::TempDir;
using relurepair::testing::toy_model;

namespace {

LoadError::Kind kind_of_error(const Json& j) {
  try {
    model_from_json(j);
  } catch (const LoadError& e) {
    return e.kind();
  }
  FAIL("no LoadError");
  return LoadError::Kind::kIo;
}

}  // namespace

TEST_CASE("model json round trip") {
  const Model m = toy_model();
  CHECK(model_from_json(model_to_json(m)) == m);
  TempDir dir;
  save_model(m, dir / "nested/model.json");
  CHECK(load_model(dir / "nested/model.json") == m);

  Json j = model_to_json(m);
  j["layers"].push_back({{"kind", "flatten"}});
  CHECK(model_from_json(j).layer_count() == m.layer_count() + 1);
}

TEST_CASE("model json schema errors") {
  Json j = model_to_json(toy_model());
  j.erase("input_dim");
  CHECK(kind_of_error(j) == LoadError::Kind::kSchema);
  j = model_to_json(toy_model());
  j["layers"][0]["kind"] = "conv";
  CHECK(kind_of_error(j) == LoadError::Kind::kSchema);
  j = model_to_json(toy_model());
  j["layers"][0]["weights"][1] = {1.0};
  CHECK(kind_of_error(j) == LoadError::Kind::kSchema);
  j = model_to_json(toy_model());
  j["class_count"] = "two";
  CHECK(kind_of_error(j) == LoadError::Kind::kSchema);
  j = model_to_json(toy_model());
  j["layers"][0]["biases"] = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(model_from_json(j), ShapeError);

  TempDir dir;
  try {
    read_json(dir / "missing.json");
    FAIL("expected an error");
  } catch (const LoadError& e) {
    CHECK(e.kind() == LoadError::Kind::kIo);
  }
  std::ofstream(dir / "bad.json") << "{ not json";
  try {
    read_json(dir / "bad.json");
    FAIL("expected an error");
  } catch (const LoadError& e) {
    CHECK(e.kind() == LoadError::Kind::kSchema);
  }
}

TEST_CASE("pattern json") {
  ActivationPattern p;
  p.layer_index = 2;
  p.on_set = {1};
  p.off_set = {0, 3};
  p.label = 4;
  p.polarity = Polarity::kIncorrect;
  p.support = 12;
  p.purity = 0.96;
  const Json j = pattern_to_json(p);
  CHECK(j["polarity"] == "incorrect");
  CHECK(j["on"] == Json::array({1}));
  CHECK(pattern_from_json(j) == p);
  const std::vector<ActivationPattern> ps{p, ActivationPattern{}};
  CHECK(patterns_from_json(patterns_to_json(ps)) == ps);
  Json bad = j;
  bad["polarity"] = "maybe";
  CHECK_THROWS_AS(pattern_from_json(bad), LoadError);
}

TEST_CASE("expert json") {
  Expert e;
  e.label = 1;
  e.layer_index = 4;
  e.deltas[{1, 1}] = 0.0878125;
  e.deltas[{1, 0}] = -1e-9;
  e.provenance = {"feasible", 0.0878135, 2, 5, 3};
  const Json j = expert_to_json(e);
  CHECK(j["deltas"].size() == 2);
  CHECK(j["deltas"][0]["from"] == 0);
  CHECK(expert_from_json(j) == e);
  Json bare = j;
  bare.erase("provenance");
  CHECK(expert_from_json(bare).deltas == e.deltas);
  bare.erase("deltas");
  CHECK_THROWS_AS(expert_from_json(bare), LoadError);
}

TEST_CASE("fault, system and solution json") {
  FaultSet f;
  f.layer_index = 2;
  f.neurons = {0};
  f.scores = {{{0, 0}, 2.0}, {{0, 1}, 2.8125}};
  f.edges = {f.scores[1]};
  const Json fj = fault_to_json(f);
  CHECK(fj["edges"].size() == 1);
  CHECK(fj["edges"][0]["score"] == 2.8125);

  ConstraintSystem s;
  const auto v = s.declare({2, 0, 1});
  AffineExpr e(0.875);
  e.add_term(v, 2.75);
  s.add(e, Relation::kLe, 0.0);
  s.add_delta_bounds();
  const Json sj = system_to_json(s);
  CHECK(sj["constraints"].size() == 3);
  CHECK(sj["constraints"][0]["relation"] == "<=");

  Solution sol;
  sol.status = SolveStatus::kFeasible;
  sol.assignment = {-0.4};
  sol.objective = 0.4;
  const Json out = solution_to_json(sol, s);
  CHECK(out["status"] == "feasible");
  CHECK(out["deltas"][0]["layer"] == 2);
  CHECK(out["deltas"][0]["value"] == -0.4);
}
