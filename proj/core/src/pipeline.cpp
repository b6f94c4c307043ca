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

#include "relurepair/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "relurepair/error.hpp"
#include "relurepair/solver.hpp"

namespace relurepair {
namespace {

using nlohmann::json;

// Read-only candidate pool shared by every label worker: the repair set
// followed by the clean set when the two differ. Failing inputs come from
// the first repair_count items only.
struct SharedView {
  Dataset pool;
  std::size_t repair_count = 0;
  std::size_t normal_begin = 0;
  std::vector<std::size_t> predicted;
  std::vector<ActivationSignature> signatures;
};

std::vector<std::size_t> sample(std::vector<std::size_t> pool, std::size_t count, std::mt19937_64& rng) {
  if (pool.size() > count) {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
  }
  return pool;
}

// std::vector<bool> is not contiguous; copy into a plain bool array for spans.
struct Mask {
  std::vector<bool> bits;
  std::unique_ptr<bool[]> flat;
  void push_back(bool b) { bits.push_back(b); }
  std::span<const bool> view() {
    flat = std::make_unique<bool[]>(bits.size());
    std::copy(bits.begin(), bits.end(), flat.get());
    return {flat.get(), bits.size()};
  }
};

struct LabelOutcome {
  ExpertRecord record;
  LabelArtifacts artifacts;
};

LabelOutcome build_label(const RepairConfig& config, const Model& model, const SharedView& view,
                         std::size_t label, std::size_t layer) {
  LabelOutcome out;
  ExpertRecord& rec = out.record;
  rec.label = label;
  rec.seed = label_seed(config.rng_seed, label);
  out.artifacts.label = label;
  std::mt19937_64 rng(rec.seed);
  const Dataset& repair = view.pool;
  const bool intermediate = config.repair_kind == RepairKind::kIntermediate;

  try {
    rec.stage = "partition";
    std::vector<std::size_t> fail_pool;
    std::vector<std::size_t> pass_pool;
    std::vector<std::size_t> any_pass;
    for (std::size_t i = 0; i < repair.size(); ++i) {
      if (view.predicted[i] == repair.labels[i]) any_pass.push_back(i);
      if (repair.labels[i] != label) continue;
      if (view.predicted[i] == label) {
        pass_pool.push_back(i);
      } else if (i < view.repair_count) {
        fail_pool.push_back(i);
      }
    }
    if (fail_pool.empty()) {
      rec.status = "skipped";
      rec.reason = "no failing inputs";
      return out;
    }

    std::optional<ActivationPattern> pattern;
    if (intermediate) {
      rec.stage = "mine";
      MinerParams params = config.miner;
      params.label = label;
      std::vector<ActivationSignature> correct_sigs;
      Mask correct_mask;
      for (std::size_t i = 0; i < repair.size(); ++i) {
        if (view.predicted[i] != repair.labels[i]) continue;
        correct_sigs.push_back(view.signatures[i]);
        correct_mask.push_back(repair.labels[i] == label);
      }
      const auto correct = mine(correct_sigs, correct_mask.view(), params);
      if (correct.empty()) throw Error("no correct-label pattern meets the support and purity thresholds");
      pattern = top_pattern(correct);
      out.artifacts.patterns.push_back(*pattern);

      std::vector<ActivationSignature> label_sigs;
      Mask wrong_mask;
      for (std::size_t i = 0; i < view.repair_count; ++i) {
        if (repair.labels[i] != label) continue;
        label_sigs.push_back(view.signatures[i]);
        wrong_mask.push_back(view.predicted[i] != label);
      }
      const auto incorrect = mine_incorrect(label_sigs, wrong_mask.view(), params);
      if (!incorrect.empty()) {
        const ActivationPattern& bad = top_pattern(incorrect);
        out.artifacts.patterns.push_back(bad);
        std::vector<std::size_t> kept;
        for (std::size_t i : fail_pool) {
          if (satisfies(bad, view.signatures[i])) kept.push_back(i);
        }
        if (!kept.empty()) fail_pool = std::move(kept);
      }
      std::vector<std::size_t> kept;
      for (std::size_t i : pass_pool) {
        if (satisfies(*pattern, view.signatures[i])) kept.push_back(i);
      }
      pass_pool = std::move(kept);
    }
    rec.fail_pool = fail_pool.size();
    rec.pass_pool = pass_pool.size();

    rec.stage = "localize";
    // Edge scores contrast the failing inputs with passing inputs of every class.
    const auto score_pass = sample(std::move(any_pass), fail_pool.size() + config.pattern_pass_extra, rng);
    const Dataset fail_set = repair.subset(fail_pool, repair.name + "-fail");
    const Dataset pass_set = repair.subset(score_pass, repair.name + "-pass");
    std::vector<std::size_t> neurons;
    if (intermediate) {
      std::set<std::size_t> suspicious;
      for (const auto& x : fail_set.inputs) {
        for (std::size_t n : suspicious_neurons(*pattern, forward(model, x))) suspicious.insert(n);
      }
      neurons.assign(suspicious.begin(), suspicious.end());
      if (neurons.empty()) {
        rec.status = "skipped";
        rec.reason = "failing inputs already match the correct-label pattern";
        return out;
      }
    } else {
      neurons = {last_layer_target(model, label)};
    }
    rec.neurons = neurons.size();
    const FaultSet fault = localize(model, layer, neurons, fail_set, pass_set, config.budget());
    out.artifacts.fault = fault;

    rec.stage = "constraints";
    const auto fail_idx = sample(fail_pool, config.fail_count, rng);
    const auto pass_idx = sample(pass_pool, config.pass_count, rng);
    Dataset fail_used = repair.subset(fail_idx, repair.name + "-fail");
    Dataset pass_used = repair.subset(pass_idx, repair.name + "-pass");
    if (config.extra_normal_pass_count > 0) {
      const std::set<std::size_t> taken(pass_idx.begin(), pass_idx.end());
      std::vector<std::size_t> extra_pool;
      for (std::size_t i = view.normal_begin; i < repair.size(); ++i) {
        // Last-layer extras span every class: they pin the other logits above
        // the repaired one. Intermediate extras must fit the label's pattern.
        if (view.predicted[i] != repair.labels[i] || taken.contains(i)) continue;
        if (pattern && (repair.labels[i] != label || !satisfies(*pattern, view.signatures[i]))) continue;
        extra_pool.push_back(i);
      }
      const auto extra = sample(std::move(extra_pool), config.extra_normal_pass_count, rng);
      rec.extra_used = extra.size();
      pass_used.append(repair.subset(extra));
    }
    rec.fail_used = fail_used.size();
    rec.pass_used = pass_used.size() - rec.extra_used;

    const ConstraintParams params{config.margin, config.delta_bound};
    ConstraintSystem system = intermediate
                                  ? intermediate_system(model, *pattern, fail_used, pass_used, fault, params)
                                  : lastlayer_system(model, label, fail_used, pass_used, fault, params);
    rec.variables = system.variables.size();
    rec.constraints = system.constraints.size();
    out.artifacts.system = system;
    out.artifacts.failing = fail_used;

    rec.stage = "solve";
    const Solution solution = solve(system);
    rec.pivots = solution.pivots;
    rec.objective = solution.objective;
    if (!solution.feasible()) {
      rec.status = "infeasible";
      rec.reason = "constraint system has no solution";
      return out;
    }

    rec.stage = "verify";
    if (!verify(system, solution.assignment)) {
      throw SolverError("solution violates the system by " +
                        std::to_string(max_violation(system, solution.assignment)));
    }
    Expert expert;
    expert.label = label;
    expert.layer_index = layer;
    for (std::size_t v = 0; v < system.variables.size(); ++v) {
      const auto& var = system.variables[v];
      const double d = solution.assignment[v];
      expert.deltas[{var.to, var.from}] = d;
      rec.delta_l1 += std::abs(d);
      rec.delta_linf = std::max(rec.delta_linf, std::abs(d));
    }
    expert.provenance = {"feasible", solution.objective, system.variables.size(), system.constraints.size(),
                         solution.pivots};
    const Model patched = apply_expert(model, expert);
    std::size_t fixed = 0;
    for (const auto& x : fail_used.inputs) {
      if (classify(patched, x) == label) ++fixed;
    }
    rec.fixed_fraction = static_cast<double>(fixed) / static_cast<double>(fail_used.size());
    rec.status = "feasible";
    rec.stage = "done";
    out.artifacts.expert = std::move(expert);
  } catch (const std::exception& e) {
    rec.status = "error";
    rec.reason = e.what();
  }
  return out;
}

json trigger_json(const TriggerSpec& t) {
  return {{"side", t.square_side}, {"fill", t.fill_value}, {"target", t.target_label}};
}

template <class T>
void read_field(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kAccuracy:
      return "accuracy";
    case Scenario::kPoison:
      return "poison";
    case Scenario::kAdversarial:
      return "adversarial";
  }
  return "unknown";
}

std::string to_string(RepairKind kind) { return kind == RepairKind::kLast ? "last" : "intermediate"; }

Scenario scenario_from_string(const std::string& name) {
  if (name == "accuracy") return Scenario::kAccuracy;
  if (name == "poison") return Scenario::kPoison;
  if (name == "adversarial") return Scenario::kAdversarial;
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

RepairKind repair_kind_from_string(const std::string& name) {
  if (name == "last") return RepairKind::kLast;
  if (name == "intermediate") return RepairKind::kIntermediate;
  throw std::invalid_argument("unknown repair kind '" + name + "'");
}

void RepairConfig::validate() const {
  if (fail_count == 0 || pass_count == 0) throw std::invalid_argument("fail_count and pass_count must be positive");
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
  if (!(delta_bound > 0.0)) throw std::invalid_argument("delta_bound must be positive");
  if (!(top_percent > 0.0 && top_percent <= 100.0)) throw std::invalid_argument("top_percent must be in (0, 100]");
  if (scenario == Scenario::kAdversarial && !(epsilon > 0.0)) {
    throw std::invalid_argument("epsilon must be positive for the adversarial scenario");
  }
  if (scenario == Scenario::kPoison && poison_prefix == 0) throw std::invalid_argument("poison_prefix must be positive");
  if (scenario == Scenario::kAdversarial && adversarial_train_size == 0) {
    throw std::invalid_argument("adversarial_train_size must be positive");
  }
}

std::size_t RepairConfig::resolved_layer(const Model& model) const {
  if (layer_index) return *layer_index;
  if (repair_kind == RepairKind::kLast) return model.output_layer();
  const auto layer = model.penultimate_dense();
  if (!layer) throw ShapeError("model has no hidden dense layer to repair");
  return *layer;
}

EdgeBudget RepairConfig::budget() const {
  EdgeBudget b;
  b.top_percent = top_percent;
  b.top_k = top_k.value_or(repair_kind == RepairKind::kLast ? 5 : 0);
  return b;
}

json config_to_json(const RepairConfig& c) {
  json j;
  j["scenario"] = to_string(c.scenario);
  j["repair_kind"] = to_string(c.repair_kind);
  j["layer_index"] = c.layer_index ? json(*c.layer_index) : json(nullptr);
  j["top_percent"] = c.top_percent;
  j["top_k"] = c.top_k ? json(*c.top_k) : json(nullptr);
  j["margin"] = c.margin;
  j["delta_bound"] = c.delta_bound;
  j["fail_count"] = c.fail_count;
  j["pass_count"] = c.pass_count;
  j["extra_normal_pass_count"] = c.extra_normal_pass_count;
  j["pattern_pass_extra"] = c.pattern_pass_extra;
  j["strategy"] = to_string(c.strategy);
  j["f1_filter"] = c.f1_filter;
  j["rng_seed"] = c.rng_seed;
  j["epsilon"] = c.epsilon;
  j["trigger"] = trigger_json(c.trigger);
  j["image"] = {{"height", c.image.height}, {"width", c.image.width}};
  j["miner"] = {{"max_depth", c.miner.max_depth},
                {"min_purity", c.miner.min_purity},
                {"min_support", c.miner.min_support},
                {"close_over_members", c.miner.close_over_members}};
  j["labels"] = c.labels;
  j["poison_prefix"] = c.poison_prefix;
  j["adversarial_train_size"] = c.adversarial_train_size;
  return j;
}

RepairConfig config_from_json(const json& j, RepairConfig c) {
  if (!j.is_object()) throw LoadError(LoadError::Kind::kSchema, "config must be a JSON object");
  try {
    if (j.contains("scenario")) c.scenario = scenario_from_string(j["scenario"].get<std::string>());
    if (j.contains("repair_kind")) c.repair_kind = repair_kind_from_string(j["repair_kind"].get<std::string>());
    if (j.contains("layer_index")) {
      c.layer_index = j["layer_index"].is_null() ? std::nullopt
                                                 : std::optional<std::size_t>(j["layer_index"].get<std::size_t>());
    }
    if (j.contains("top_k")) {
      c.top_k = j["top_k"].is_null() ? std::nullopt : std::optional<std::size_t>(j["top_k"].get<std::size_t>());
    }
    read_field(j, "top_percent", c.top_percent);
    read_field(j, "margin", c.margin);
    read_field(j, "delta_bound", c.delta_bound);
    read_field(j, "fail_count", c.fail_count);
    read_field(j, "pass_count", c.pass_count);
    read_field(j, "extra_normal_pass_count", c.extra_normal_pass_count);
    read_field(j, "pattern_pass_extra", c.pattern_pass_extra);
    if (j.contains("strategy")) c.strategy = strategy_from_string(j["strategy"].get<std::string>());
    read_field(j, "f1_filter", c.f1_filter);
    read_field(j, "rng_seed", c.rng_seed);
    read_field(j, "epsilon", c.epsilon);
    if (j.contains("trigger")) {
      const auto& t = j["trigger"];
      read_field(t, "side", c.trigger.square_side);
      read_field(t, "fill", c.trigger.fill_value);
      read_field(t, "target", c.trigger.target_label);
    }
    if (j.contains("image")) {
      read_field(j["image"], "height", c.image.height);
      read_field(j["image"], "width", c.image.width);
    }
    if (j.contains("miner")) {
      const auto& m = j["miner"];
      read_field(m, "max_depth", c.miner.max_depth);
      read_field(m, "min_purity", c.miner.min_purity);
      read_field(m, "min_support", c.miner.min_support);
      read_field(m, "close_over_members", c.miner.close_over_members);
    }
    read_field(j, "labels", c.labels);
    read_field(j, "poison_prefix", c.poison_prefix);
    read_field(j, "adversarial_train_size", c.adversarial_train_size);
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::kSchema, std::string("config: ") + e.what());
  }
  return c;
}

std::uint64_t label_seed(std::uint64_t seed, std::size_t label) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(label) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RepairRun run_repair(const RepairConfig& config, const Model& model, const ScenarioData& data) {
  config.validate();
  if (data.repair.empty()) throw std::invalid_argument("run_repair: empty repair set");
  const std::size_t layer = config.resolved_layer(model);
  if (config.repair_kind == RepairKind::kLast && layer != model.output_layer()) {
    throw ShapeError("last-layer repair must target the output layer");
  }
  if (config.repair_kind == RepairKind::kIntermediate && !model.feeds_relu(layer)) {
    throw ShapeError("intermediate repair needs a dense layer feeding a ReLU");
  }

  SharedView view;
  view.pool = data.repair;
  view.repair_count = data.repair.size();
  if (data.normal_is_repair) {
    view.normal_begin = 0;
  } else {
    view.normal_begin = view.repair_count;
    view.pool.append(data.normal);
  }
  view.predicted = predict_all(model, view.pool);
  if (config.repair_kind == RepairKind::kIntermediate) {
    view.signatures.reserve(view.pool.size());
    for (const auto& x : view.pool.inputs) view.signatures.push_back(signature(forward(model, x), layer));
  }

  std::vector<std::size_t> labels = config.labels;
  if (labels.empty()) {
    labels.resize(model.class_count());
    std::iota(labels.begin(), labels.end(), 0);
  }
  for (std::size_t l : labels) {
    if (l >= model.class_count()) throw ShapeError("configured label " + std::to_string(l) + " out of range");
  }

  std::vector<std::future<LabelOutcome>> jobs;
  jobs.reserve(labels.size());
  for (std::size_t l : labels) {
    jobs.push_back(std::async(std::launch::async, build_label, std::cref(config), std::cref(model), std::cref(view), l, layer));
  }
  std::vector<LabelOutcome> outcomes;
  for (auto& job : jobs) outcomes.push_back(job.get());

  std::vector<Expert> experts;
  for (const auto& o : outcomes) {
    if (o.artifacts.expert) experts.push_back(*o.artifacts.expert);
  }
  if (config.f1_filter && !experts.empty()) experts = f1_filter(model, experts, view.pool);
  std::set<std::size_t> kept;
  for (const auto& e : experts) kept.insert(e.label);

  RepairRun run{Ensemble(model, experts, config.strategy, config.f1_filter), {}, {}};
  RepairReport& report = run.report;
  report.config = config_to_json(config);
  for (auto& o : outcomes) {
    if (o.artifacts.expert && !kept.contains(o.record.label)) {
      o.record.stage = "filter";
      o.record.reason = "F1 does not exceed the base model";
    }
    o.record.kept = kept.contains(o.record.label);
    report.experts.push_back(o.record);
    run.artifacts.push_back(std::move(o.artifacts));
  }
  report.kept_labels.assign(kept.begin(), kept.end());
  report.base_macs = mac_count(model);
  report.ensemble_macs = run.ensemble.mac_count();

  const Ensemble& ensemble = run.ensemble;
  const Predictor repaired = [&](std::span<const double> x) { return ensemble.classify(x); };
  for (const auto& ds : data.evaluation) {
    if (ds.empty()) continue;
    report.accuracies.push_back({ds.name, ds.size(), evaluate(model, ds), evaluate(repaired, ds)});
  }
  return run;
}

json report_to_json(const RepairReport& r) {
  json acc = json::array();
  for (const auto& a : r.accuracies) {
    acc.push_back({{"dataset", a.dataset}, {"size", a.size}, {"before", a.before}, {"after", a.after}});
  }
  json experts = json::array();
  for (const auto& e : r.experts) {
    experts.push_back({{"label", e.label},
                       {"seed", e.seed},
                       {"status", e.status},
                       {"stage", e.stage},
                       {"reason", e.reason},
                       {"fail_pool", e.fail_pool},
                       {"pass_pool", e.pass_pool},
                       {"fail_used", e.fail_used},
                       {"pass_used", e.pass_used},
                       {"extra_used", e.extra_used},
                       {"neurons", e.neurons},
                       {"variables", e.variables},
                       {"constraints", e.constraints},
                       {"pivots", e.pivots},
                       {"objective", e.objective},
                       {"delta_l1", e.delta_l1},
                       {"delta_linf", e.delta_linf},
                       {"fixed_fraction", e.fixed_fraction},
                       {"kept", e.kept}});
  }
  return {{"config", r.config},
          {"accuracies", std::move(acc)},
          {"experts", std::move(experts)},
          {"kept_labels", r.kept_labels},
          {"macs", {{"base", r.base_macs}, {"ensemble", r.ensemble_macs}}}};
}

RepairReport report_from_json(const json& j) {
  RepairReport r;
  try {
    r.config = j.at("config");
    for (const auto& a : j.at("accuracies")) {
      r.accuracies.push_back({a.at("dataset").get<std::string>(), a.at("size").get<std::size_t>(),
                              a.at("before").get<double>(), a.at("after").get<double>()});
    }
    for (const auto& e : j.at("experts")) {
      ExpertRecord x;
      x.label = e.at("label").get<std::size_t>();
      x.seed = e.at("seed").get<std::uint64_t>();
      x.status = e.at("status").get<std::string>();
      x.stage = e.at("stage").get<std::string>();
      x.reason = e.at("reason").get<std::string>();
      x.fail_pool = e.at("fail_pool").get<std::size_t>();
      x.pass_pool = e.at("pass_pool").get<std::size_t>();
      x.fail_used = e.at("fail_used").get<std::size_t>();
      x.pass_used = e.at("pass_used").get<std::size_t>();
      x.extra_used = e.at("extra_used").get<std::size_t>();
      x.neurons = e.at("neurons").get<std::size_t>();
      x.variables = e.at("variables").get<std::size_t>();
      x.constraints = e.at("constraints").get<std::size_t>();
      x.pivots = e.at("pivots").get<std::size_t>();
      x.objective = e.at("objective").get<double>();
      x.delta_l1 = e.at("delta_l1").get<double>();
      x.delta_linf = e.at("delta_linf").get<double>();
      x.fixed_fraction = e.at("fixed_fraction").get<double>();
      x.kept = e.at("kept").get<bool>();
      r.experts.push_back(std::move(x));
    }
    r.kept_labels = j.at("kept_labels").get<std::vector<std::size_t>>();
    r.base_macs = j.at("macs").at("base").get<std::size_t>();
    r.ensemble_macs = j.at("macs").at("ensemble").get<std::size_t>();
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::kSchema, std::string("report: ") + e.what());
  }
  return r;
}

std::string format_delta(double before, double after) {
  const double delta = std::round((after - before) * 100.0 * 100.0) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", delta == 0.0 ? 0.0 : delta);
  return buf;
}

std::string render_text(const RepairReport& r) {
  std::ostringstream os;
  char line[256];
  os << "scenario " << r.config.value("scenario", "?") << ", repair " << r.config.value("repair_kind", "?")
     << ", strategy " << r.config.value("strategy", "?") << (r.config.value("f1_filter", false) ? " (F1-filtered)" : "")
     << "\n\n";
  std::snprintf(line, sizeof line, "%-16s %6s %9s %9s %8s\n", "dataset", "size", "before", "after", "delta");
  os << line;
  for (const auto& a : r.accuracies) {
    std::snprintf(line, sizeof line, "%-16s %6zu %9.2f %9.2f %8s\n", a.dataset.c_str(), a.size, a.before * 100.0,
                  a.after * 100.0, format_delta(a.before, a.after).c_str());
    os << line;
  }
  os << "\n";
  std::snprintf(line, sizeof line, "%5s %-10s %-11s %4s %4s %5s %5s %6s %9s %9s %6s %4s  %s\n", "label", "status",
                "stage", "fail", "pass", "extra", "vars", "rows", "l1", "linf", "fixed", "kept", "reason");
  os << line;
  for (const auto& e : r.experts) {
    std::snprintf(line, sizeof line, "%5zu %-10s %-11s %4zu %4zu %5zu %5zu %6zu %9.4f %9.4f %6.2f %4s  %s\n", e.label,
                  e.status.c_str(), e.stage.c_str(), e.fail_used, e.pass_used, e.extra_used, e.variables,
                  e.constraints, e.delta_l1, e.delta_linf, e.fixed_fraction, e.kept ? "yes" : "no", e.reason.c_str());
    os << line;
  }
  os << "\nkept labels:";
  for (std::size_t l : r.kept_labels) os << ' ' << l;
  os << "\nmultiply-accumulates per input: base " << r.base_macs << ", ensemble " << r.ensemble_macs << "\n";
  return os.str();
}

}  // namespace relurepair
