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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relurepair/dataset.hpp"
#include "relurepair/localize.hpp"
#include "relurepair/model.hpp"
#include "relurepair/patterns.hpp"

namespace relurepair {

using VarId = std::size_t;

// constant + sum(coefficient * delta). Zero coefficients are never stored.
class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(double constant) : constant_(constant) {}

  double constant() const { return constant_; }
  const std::map<VarId, double>& terms() const { return terms_; }
  double coefficient(VarId var) const;

  void add_constant(double value) { constant_ += value; }
  void add_term(VarId var, double coefficient);

  // Throws std::out_of_range when a referenced variable is missing.
  double evaluate(const std::map<VarId, double>& assignment) const;
  double evaluate(std::span<const double> assignment) const;

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double factor);

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;

 private:
  double constant_ = 0.0;
  std::map<VarId, double> terms_;
};

enum class Relation { kGt, kLe, kGe, kLt };

std::string_view relation_symbol(Relation rel);

struct LinearConstraint {
  AffineExpr expr;
  Relation relation = Relation::kLe;
  double bound = 0.0;

  friend bool operator==(const LinearConstraint&, const LinearConstraint&) = default;
};

// A delta variable sits on weight (to, from) of dense layer `layer`.
struct DeltaVariable {
  std::size_t layer = 0;
  std::size_t to = 0;
  std::size_t from = 0;

  friend bool operator==(const DeltaVariable&, const DeltaVariable&) = default;
};

// Strict relations are read as `expr >= bound + margin` (resp. `<= bound -
// margin`) by the solver and the verifier.
struct ConstraintSystem {
  std::vector<LinearConstraint> constraints;
  std::vector<DeltaVariable> variables;
  double margin = 1e-3;
  double delta_bound = 1.0;

  VarId declare(const DeltaVariable& var);
  void add(AffineExpr expr, Relation relation, double bound);
  // Adds -delta_bound <= d <= delta_bound for every declared variable.
  void add_delta_bounds();
  // Throws IntegrityError on undeclared variables or non-positive margin/bound.
  void check() const;

  friend bool operator==(const ConstraintSystem&, const ConstraintSystem&) = default;
};

struct ConstraintParams {
  double margin = 1e-3;
  double delta_bound = 1.0;
};

// Pre-activation of `neuron` at dense layer `layer` on `input`, with a fresh
// delta on each listed incoming edge (variable i <-> delta_edges[i]). Layers
// before `layer` are evaluated concretely.
AffineExpr symbolic_value(const Model& model, std::span<const double> input, std::size_t layer,
                          std::size_t neuron, std::span<const std::size_t> delta_edges);

// Same, reading the upstream values from an existing trace and mapping each
// (source -> variable id) pair explicitly.
AffineExpr symbolic_value(const Model& model, const LayerTrace& trace, std::size_t layer,
                          std::size_t neuron, const std::map<std::size_t, VarId>& delta_vars);

// For every input in fail and pass and every faulty neuron: pre-activation
// >= margin when the pattern has the neuron on, <= 0 when off. Then the
// delta bounds.
ConstraintSystem intermediate_system(const Model& model, const ActivationPattern& pattern,
                                     const Dataset& fail, const Dataset& pass, const FaultSet& fault,
                                     const ConstraintParams& params);

// Decision constraints for every input: logit(ideal) - logit(other) >= margin
// for all other classes. Only the expert label's output neuron carries deltas.
ConstraintSystem lastlayer_system(const Model& model, std::size_t label, const Dataset& fail,
                                  const Dataset& pass, const FaultSet& fault,
                                  const ConstraintParams& params);

// SMT-LIB2 (QF_LRA) text. Variable coordinates, margin and delta bound ride
// along as comments so parse_smtlib can rebuild the system.
std::string export_smtlib(const ConstraintSystem& system);
ConstraintSystem parse_smtlib(std::string_view text);

// Formats a double as an exact SMT-LIB decimal, e.g. "0.875", "(- 2.5)".
std::string smt_decimal(double value);

}  // namespace relurepair
