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

#include "relurepair/constraints.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>
#include <stdexcept>

#include "relurepair/error.hpp"
#include "sexpr.hpp"

namespace relurepair {

double AffineExpr::coefficient(VarId var) const {
  const auto it = terms_.find(var);
  return it == terms_.end() ? 0.0 : it->second;
}

void AffineExpr::add_term(VarId var, double coefficient) {
  if (coefficient == 0.0) return;
  const double merged = (terms_[var] += coefficient);
  if (merged == 0.0) terms_.erase(var);
}

double AffineExpr::evaluate(const std::map<VarId, double>& assignment) const {
  double acc = constant_;
  for (const auto& [var, c] : terms_) acc += c * assignment.at(var);
  return acc;
}

double AffineExpr::evaluate(std::span<const double> assignment) const {
  double acc = constant_;
  for (const auto& [var, c] : terms_) {
    if (var >= assignment.size()) throw std::out_of_range("assignment misses variable d" + std::to_string(var));
    acc += c * assignment[var];
  }
  return acc;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  constant_ += other.constant_;
  for (const auto& [var, c] : other.terms_) add_term(var, c);
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  constant_ -= other.constant_;
  for (const auto& [var, c] : other.terms_) add_term(var, -c);
  return *this;
}

AffineExpr& AffineExpr::operator*=(double factor) {
  constant_ *= factor;
  if (factor == 0.0) {
    terms_.clear();
  } else {
    for (auto& [var, c] : terms_) c *= factor;
  }
  return *this;
}

std::string_view relation_symbol(Relation rel) {
  switch (rel) {
    case Relation::kGt:
      return ">";
    case Relation::kLe:
      return "<=";
    case Relation::kGe:
      return ">=";
    case Relation::kLt:
      return "<";
  }
  return "?";
}

VarId ConstraintSystem::declare(const DeltaVariable& var) {
  const auto it = std::find(variables.begin(), variables.end(), var);
  if (it != variables.end()) return static_cast<VarId>(it - variables.begin());
  variables.push_back(var);
  return variables.size() - 1;
}

void ConstraintSystem::add(AffineExpr expr, Relation relation, double bound) {
  constraints.push_back({std::move(expr), relation, bound});
}

void ConstraintSystem::add_delta_bounds() {
  for (VarId v = 0; v < variables.size(); ++v) {
    AffineExpr upper;
    upper.add_term(v, 1.0);
    add(upper, Relation::kLe, delta_bound);
    AffineExpr lower;
    lower.add_term(v, 1.0);
    add(lower, Relation::kGe, -delta_bound);
  }
}

void ConstraintSystem::check() const {
  if (!(margin > 0.0)) throw IntegrityError("constraint margin must be positive");
  if (!(delta_bound > 0.0)) throw IntegrityError("delta bound must be positive");
  for (const auto& c : constraints) {
    for (const auto& [var, coeff] : c.expr.terms()) {
      if (var >= variables.size()) {
        throw IntegrityError("constraint references undeclared variable d" + std::to_string(var));
      }
    }
  }
}

AffineExpr symbolic_value(const Model& model, const LayerTrace& trace, std::size_t layer,
                          std::size_t neuron, const std::map<std::size_t, VarId>& delta_vars) {
  const Dense& dense = model.dense(layer);
  if (neuron >= dense.out_width()) {
    throw ShapeError("neuron " + std::to_string(neuron) + " out of range at layer " + std::to_string(layer));
  }
  const Vector& upstream = trace.layer_input(layer);
  const auto row = dense.weights.row(neuron);
  // Accumulated exactly as forward() does so the constant matches bit for bit.
  double acc = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) acc += row[i] * upstream[i];
  AffineExpr expr(dense.biases[neuron] + acc);
  for (const auto& [from, var] : delta_vars) {
    if (from >= row.size()) throw ShapeError("delta edge source out of range");
    expr.add_term(var, upstream[from]);
  }
  return expr;
}

AffineExpr symbolic_value(const Model& model, std::span<const double> input, std::size_t layer,
                          std::size_t neuron, std::span<const std::size_t> delta_edges) {
  std::map<std::size_t, VarId> vars;
  for (std::size_t i = 0; i < delta_edges.size(); ++i) vars.emplace(delta_edges[i], i);
  return symbolic_value(model, forward(model, input), layer, neuron, vars);
}

ConstraintSystem intermediate_system(const Model& model, const ActivationPattern& pattern,
                                     const Dataset& fail, const Dataset& pass, const FaultSet& fault,
                                     const ConstraintParams& params) {
  if (fault.neurons.empty()) throw std::invalid_argument("intermediate_system: empty fault set");
  if (fault.layer_index != pattern.layer_index) {
    throw ShapeError("fault set and pattern refer to different layers");
  }
  if (!model.feeds_relu(fault.layer_index)) {
    throw ShapeError("intermediate repair needs a dense layer feeding a ReLU");
  }
  ConstraintSystem system;
  system.margin = params.margin;
  system.delta_bound = params.delta_bound;

  std::map<std::size_t, std::map<std::size_t, VarId>> vars_by_neuron;
  for (const auto& e : fault.edges) {
    vars_by_neuron[e.edge.to][e.edge.from] =
        system.declare({fault.layer_index, e.edge.to, e.edge.from});
  }
  std::vector<bool> wants_on;
  for (std::size_t n : fault.neurons) {
    const bool on = std::find(pattern.on_set.begin(), pattern.on_set.end(), n) != pattern.on_set.end();
    const bool off = std::find(pattern.off_set.begin(), pattern.off_set.end(), n) != pattern.off_set.end();
    if (on == off) throw ShapeError("faulty neuron " + std::to_string(n) + " has no status in the pattern");
    wants_on.push_back(on);
  }

  const auto add_input = [&](const Vector& x) {
    const LayerTrace trace = forward(model, x);
    for (std::size_t k = 0; k < fault.neurons.size(); ++k) {
      const std::size_t n = fault.neurons[k];
      AffineExpr sym = symbolic_value(model, trace, fault.layer_index, n, vars_by_neuron[n]);
      if (wants_on[k]) {
        system.add(std::move(sym), Relation::kGe, params.margin);
      } else {
        system.add(std::move(sym), Relation::kLe, 0.0);
      }
    }
  };
  for (const auto& x : fail.inputs) add_input(x);
  for (const auto& x : pass.inputs) add_input(x);
  system.add_delta_bounds();
  return system;
}

ConstraintSystem lastlayer_system(const Model& model, std::size_t label, const Dataset& fail,
                                  const Dataset& pass, const FaultSet& fault,
                                  const ConstraintParams& params) {
  const std::size_t out_layer = model.output_layer();
  if (fault.layer_index != out_layer || out_layer + 1 != model.layer_count()) {
    throw ShapeError("last-layer repair needs the fault set on the final dense layer");
  }
  const std::size_t target = last_layer_target(model, label);
  ConstraintSystem system;
  system.margin = params.margin;
  system.delta_bound = params.delta_bound;
  std::map<std::size_t, VarId> vars;
  for (const auto& e : fault.edges) {
    if (e.edge.to != target) throw ShapeError("last-layer fault edge does not feed the target neuron");
    vars[e.edge.from] = system.declare({out_layer, e.edge.to, e.edge.from});
  }

  const auto add_input = [&](const Vector& x, std::size_t ideal) {
    if (ideal >= model.class_count()) throw ShapeError("label out of range");
    const LayerTrace trace = forward(model, x);
    const auto sym = [&](std::size_t cls) {
      return cls == target ? symbolic_value(model, trace, out_layer, cls, vars)
                           : AffineExpr(trace.logits()[cls]);
    };
    const AffineExpr own = sym(ideal);
    for (std::size_t other = 0; other < model.class_count(); ++other) {
      if (other == ideal) continue;
      AffineExpr diff = own;
      diff -= sym(other);
      system.add(std::move(diff), Relation::kGe, params.margin);
    }
  };
  for (std::size_t i = 0; i < fail.size(); ++i) add_input(fail.inputs[i], fail.labels[i]);
  for (std::size_t i = 0; i < pass.size(); ++i) add_input(pass.inputs[i], pass.labels[i]);
  system.add_delta_bounds();
  return system;
}

std::string smt_decimal(double value) {
  if (value == 0.0) return "0.0";
  std::array<char, 512> buf{};
  const double magnitude = value < 0 ? -value : value;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), magnitude, std::chars_format::fixed);
  std::string text(buf.data(), res.ptr);
  if (text.find('.') == std::string::npos) text += ".0";
  return value < 0 ? "(- " + text + ")" : text;
}

namespace {

std::string var_name(VarId v) { return "d" + std::to_string(v); }

std::string term_text(const AffineExpr& expr) {
  std::vector<std::string> parts;
  for (const auto& [var, c] : expr.terms()) {
    parts.push_back("(* " + smt_decimal(c) + " " + var_name(var) + ")");
  }
  if (expr.constant() != 0.0 || parts.empty()) parts.push_back(smt_decimal(expr.constant()));
  if (parts.size() == 1) return parts.front();
  std::string out = "(+";
  for (const auto& p : parts) out += " " + p;
  return out + ")";
}

AffineExpr to_affine(const sexpr::Node& node, const std::map<std::string, VarId>& vars) {
  if (!node.is_list) {
    if (const auto it = vars.find(node.atom); it != vars.end()) {
      AffineExpr e;
      e.add_term(it->second, 1.0);
      return e;
    }
    return AffineExpr(sexpr::constant_value(node));
  }
  if (node.list.empty() || node.list.front().is_list) {
    throw LoadError(LoadError::Kind::kSchema, "smt: malformed term");
  }
  const std::string& op = node.list.front().atom;
  if (op == "+") {
    AffineExpr acc;
    for (std::size_t i = 1; i < node.list.size(); ++i) acc += to_affine(node.list[i], vars);
    return acc;
  }
  if (op == "-") {
    AffineExpr first = to_affine(node.list.at(1), vars);
    if (node.list.size() == 2) {
      first *= -1.0;
      return first;
    }
    for (std::size_t i = 2; i < node.list.size(); ++i) first -= to_affine(node.list[i], vars);
    return first;
  }
  if (op == "*") {
    AffineExpr acc(1.0);
    bool linear_seen = false;
    for (std::size_t i = 1; i < node.list.size(); ++i) {
      AffineExpr factor = to_affine(node.list[i], vars);
      if (!factor.terms().empty()) {
        if (linear_seen || !acc.terms().empty()) throw LoadError(LoadError::Kind::kSchema, "smt: nonlinear term");
        linear_seen = true;
        factor *= acc.constant();
        acc = factor;
      } else {
        acc *= factor.constant();
      }
    }
    return acc;
  }
  return AffineExpr(sexpr::constant_value(node));
}

}  // namespace

std::string export_smtlib(const ConstraintSystem& system) {
  std::ostringstream os;
  os << "; relurepair constraint system\n";
  os << "; margin " << smt_decimal(system.margin) << "\n";
  os << "; delta_bound " << smt_decimal(system.delta_bound) << "\n";
  os << "(set-logic QF_LRA)\n";
  for (VarId v = 0; v < system.variables.size(); ++v) {
    const auto& var = system.variables[v];
    os << "; var " << var_name(v) << " layer " << var.layer << " to " << var.to << " from " << var.from << "\n";
    os << "(declare-const " << var_name(v) << " Real)\n";
  }
  for (const auto& c : system.constraints) {
    os << "(assert (" << relation_symbol(c.relation) << " " << term_text(c.expr) << " "
       << smt_decimal(c.bound) << "))\n";
  }
  os << "(check-sat)\n";
  if (!system.constraints.empty() || !system.variables.empty()) os << "(get-model)\n";
  return os.str();
}

ConstraintSystem parse_smtlib(std::string_view text) {
  std::vector<std::string> comments;
  const auto forms = sexpr::parse(text, &comments);
  ConstraintSystem system;
  std::map<std::string, DeltaVariable> coords;
  for (const auto& line : comments) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "margin" || key == "delta_bound") {
      std::string rest;
      std::getline(is, rest);
      const double v = sexpr::constant_value(sexpr::parse(rest).at(0));
      (key == "margin" ? system.margin : system.delta_bound) = v;
    } else if (key == "var") {
      std::string name, l, t, f;
      DeltaVariable var;
      is >> name >> l >> var.layer >> t >> var.to >> f >> var.from;
      if (!is) throw LoadError(LoadError::Kind::kSchema, "smt: malformed var comment");
      coords[name] = var;
    }
  }
  std::map<std::string, VarId> vars;
  for (const auto& form : forms) {
    if (!form.is_list || form.list.empty()) continue;
    const std::string& head = form.list.front().atom;
    if (head == "declare-const" || head == "declare-fun") {
      const std::string& name = form.list.at(1).atom;
      const auto it = coords.find(name);
      vars[name] = system.declare(it != coords.end() ? it->second : DeltaVariable{0, vars.size(), 0});
    } else if (head == "assert") {
      const auto& body = form.list.at(1);
      if (!body.is_list || body.list.size() != 3) throw LoadError(LoadError::Kind::kSchema, "smt: malformed assert");
      const std::string& op = body.list[0].atom;
      Relation rel;
      if (op == "<=") rel = Relation::kLe;
      else if (op == ">=") rel = Relation::kGe;
      else if (op == "<") rel = Relation::kLt;
      else if (op == ">") rel = Relation::kGt;
      else throw LoadError(LoadError::Kind::kSchema, "smt: unsupported relation '" + op + "'");
      AffineExpr lhs = to_affine(body.list[1], vars);
      AffineExpr rhs = to_affine(body.list[2], vars);
      const double bound = rhs.constant();
      rhs.add_constant(-bound);
      lhs -= rhs;
      system.add(std::move(lhs), rel, bound);
    }
  }
  return system;
}

}  // namespace relurepair
