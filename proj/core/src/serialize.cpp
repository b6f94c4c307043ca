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

#include "relurepair/serialize.hpp"

#include <fstream>
#include <sstream>

#include "relurepair/error.hpp"

namespace relurepair {
namespace {

using Kind = LoadError::Kind;

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw LoadError(Kind::kSchema, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw LoadError(Kind::kSchema, std::string("field '") + key + "': " + e.what());
  }
}

std::string polarity_name(Polarity p) { return p == Polarity::kCorrect ? "correct" : "incorrect"; }

}  // namespace

Json model_to_json(const Model& model) {
  Json layers = Json::array();
  for (const auto& layer : model.layers()) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      Json rows = Json::array();
      for (std::size_t r = 0; r < d->out_width(); ++r) {
        const auto row = d->weights.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
      }
      layers.push_back({{"kind", "dense"}, {"weights", std::move(rows)}, {"biases", d->biases}});
    } else if (std::holds_alternative<Relu>(layer)) {
      layers.push_back({{"kind", "relu"}});
    } else {
      layers.push_back({{"kind", "flatten"}});
    }
  }
  return {{"input_dim", model.input_dim()}, {"class_count", model.class_count()}, {"layers", std::move(layers)}};
}

Model model_from_json(const Json& j) {
  const auto input_dim = field<std::size_t>(j, "input_dim");
  const auto class_count = field<std::size_t>(j, "class_count");
  if (!j.contains("layers") || !j["layers"].is_array()) throw LoadError(Kind::kSchema, "missing 'layers' array");
  std::vector<Layer> layers;
  for (const auto& l : j["layers"]) {
    const auto kind = field<std::string>(l, "kind");
    if (kind == "dense") {
      const auto rows = field<std::vector<std::vector<double>>>(l, "weights");
      auto biases = field<std::vector<double>>(l, "biases");
      const std::size_t cols = rows.empty() ? 0 : rows.front().size();
      Matrix w(rows.size(), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw LoadError(Kind::kSchema, "ragged weight matrix");
        for (std::size_t c = 0; c < cols; ++c) w(r, c) = rows[r][c];
      }
      layers.emplace_back(Dense{std::move(w), std::move(biases)});
    } else if (kind == "relu") {
      layers.emplace_back(Relu{});
    } else if (kind == "flatten") {
      layers.emplace_back(Flatten{});
    } else {
      throw LoadError(Kind::kSchema, "unknown layer kind '" + kind + "'");
    }
  }
  return Model(input_dim, class_count, std::move(layers));
}

Model load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

void save_model(const Model& model, const std::filesystem::path& path) { write_json(model_to_json(model), path); }

Json pattern_to_json(const ActivationPattern& p) {
  return {{"layer", p.layer_index}, {"label", p.label},     {"polarity", polarity_name(p.polarity)},
          {"on", p.on_set},         {"off", p.off_set},     {"support", p.support},
          {"purity", p.purity}};
}

ActivationPattern pattern_from_json(const Json& j) {
  ActivationPattern p;
  p.layer_index = field<std::size_t>(j, "layer");
  p.label = field<std::size_t>(j, "label");
  const auto pol = field<std::string>(j, "polarity");
  if (pol != "correct" && pol != "incorrect") throw LoadError(Kind::kSchema, "bad polarity '" + pol + "'");
  p.polarity = pol == "correct" ? Polarity::kCorrect : Polarity::kIncorrect;
  p.on_set = field<std::vector<std::size_t>>(j, "on");
  p.off_set = field<std::vector<std::size_t>>(j, "off");
  p.support = field<std::size_t>(j, "support");
  p.purity = field<double>(j, "purity");
  return p;
}

Json patterns_to_json(std::span<const ActivationPattern> patterns) {
  Json out = Json::array();
  for (const auto& p : patterns) out.push_back(pattern_to_json(p));
  return out;
}

std::vector<ActivationPattern> patterns_from_json(const Json& j) {
  std::vector<ActivationPattern> out;
  for (const auto& p : j) out.push_back(pattern_from_json(p));
  return out;
}

Json fault_to_json(const FaultSet& fault) {
  Json edges = Json::array();
  for (const auto& e : fault.edges) edges.push_back({{"to", e.edge.to}, {"from", e.edge.from}, {"score", e.score}});
  return {{"layer", fault.layer_index}, {"neurons", fault.neurons}, {"edges", std::move(edges)}};
}

Json expert_to_json(const Expert& e) {
  Json deltas = Json::array();
  for (const auto& [edge, value] : e.deltas) deltas.push_back({{"to", edge.to}, {"from", edge.from}, {"value", value}});
  Json out = {{"label", e.label}, {"layer", e.layer_index}, {"deltas", std::move(deltas)}};
  out["provenance"] = {{"status", e.provenance.solver_status},
                       {"objective", e.provenance.objective},
                       {"variables", e.provenance.variable_count},
                       {"constraints", e.provenance.constraint_count},
                       {"pivots", e.provenance.pivots}};
  return out;
}

Expert expert_from_json(const Json& j) {
  Expert e;
  e.label = field<std::size_t>(j, "label");
  e.layer_index = field<std::size_t>(j, "layer");
  if (!j.contains("deltas")) throw LoadError(Kind::kSchema, "missing field 'deltas'");
  for (const auto& d : j["deltas"]) {
    e.deltas[{field<std::size_t>(d, "to"), field<std::size_t>(d, "from")}] = field<double>(d, "value");
  }
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    e.provenance.solver_status = p.value("status", "");
    e.provenance.objective = p.value("objective", 0.0);
    e.provenance.variable_count = p.value("variables", std::size_t{0});
    e.provenance.constraint_count = p.value("constraints", std::size_t{0});
    e.provenance.pivots = p.value("pivots", std::size_t{0});
  }
  return e;
}

Json solution_to_json(const Solution& s, const ConstraintSystem& system) {
  Json deltas = Json::array();
  for (std::size_t v = 0; v < s.assignment.size() && v < system.variables.size(); ++v) {
    const auto& var = system.variables[v];
    deltas.push_back({{"layer", var.layer}, {"to", var.to}, {"from", var.from}, {"value", s.assignment[v]}});
  }
  return {{"status", s.feasible() ? "feasible" : "infeasible"}, {"objective", s.objective}, {"deltas", deltas}};
}

Json system_to_json(const ConstraintSystem& system) {
  Json vars = Json::array();
  for (const auto& v : system.variables) vars.push_back({{"layer", v.layer}, {"to", v.to}, {"from", v.from}});
  Json constraints = Json::array();
  for (const auto& c : system.constraints) {
    Json terms = Json::array();
    for (const auto& [var, coeff] : c.expr.terms()) terms.push_back({{"var", var}, {"coeff", coeff}});
    constraints.push_back({{"terms", std::move(terms)},
                           {"constant", c.expr.constant()},
                           {"relation", std::string(relation_symbol(c.relation))},
                           {"bound", c.bound}});
  }
  return {{"margin", system.margin},
          {"delta_bound", system.delta_bound},
          {"variables", std::move(vars)},
          {"constraints", std::move(constraints)}};
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(Kind::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw LoadError(Kind::kSchema, path.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  write_text(j.dump(2) + "\n", path);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw LoadError(Kind::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace relurepair
