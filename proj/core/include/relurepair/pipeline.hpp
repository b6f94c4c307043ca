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
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relurepair/constraints.hpp"
#include "relurepair/dataset.hpp"
#include "relurepair/ensemble.hpp"
#include "relurepair/localize.hpp"
#include "relurepair/model.hpp"
#include "relurepair/patterns.hpp"

namespace relurepair {

enum class Scenario { kAccuracy, kPoison, kAdversarial };
enum class RepairKind { kIntermediate, kLast };

std::string to_string(Scenario scenario);
std::string to_string(RepairKind kind);
Scenario scenario_from_string(const std::string& name);
RepairKind repair_kind_from_string(const std::string& name);

struct RepairConfig {
  Scenario scenario = Scenario::kAccuracy;
  RepairKind repair_kind = RepairKind::kLast;
  // Dense layer to repair. Defaults to the output layer for last-layer repair
  // and to the dense layer feeding the output block for intermediate repair.
  std::optional<std::size_t> layer_index;
  double top_percent = 10.0;
  // nullopt: 5 for last-layer repair, top_percent for intermediate repair.
  // 0 forces top_percent.
  std::optional<std::size_t> top_k;
  double margin = 1e-3;
  double delta_bound = 1.0;
  std::size_t fail_count = 5;
  std::size_t pass_count = 5;
  std::size_t extra_normal_pass_count = 0;
  // Passing pool cap: (#failing candidates + pattern_pass_extra), per label.
  std::size_t pattern_pass_extra = 100;
  Strategy strategy = Strategy::kConfidence;
  bool f1_filter = false;
  std::uint64_t rng_seed = 20210803;
  double epsilon = 0.05;
  TriggerSpec trigger;
  ImageShape image;
  MinerParams miner;
  // Labels to build experts for; empty means every class.
  std::vector<std::size_t> labels;
  std::size_t poison_prefix = 600;
  // Items of Train perturbed into Adv-Train.
  std::size_t adversarial_train_size = 1000;

  // Throws std::invalid_argument on inconsistent values.
  void validate() const;
  std::size_t resolved_layer(const Model& model) const;
  EdgeBudget budget() const;
};

nlohmann::json config_to_json(const RepairConfig& config);
// Fields absent from `j` keep the values already in `base`.
RepairConfig config_from_json(const nlohmann::json& j, RepairConfig base = {});

struct TrainParams {
  std::size_t epochs = 5;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  // Training accuracy the result must reach; 0 disables the check.
  double floor_accuracy = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `widths` runs from the input dimension to the class count; hidden layers
// get a ReLU. He-normal init, zero biases, shuffled mini-batch SGD on softmax
// cross-entropy against Dataset::training_label. Throws TrainingError when the
// final training accuracy is below params.floor_accuracy.
Model train_fixture(const std::vector<std::size_t>& widths, const Dataset& train, const TrainParams& params);

struct ScenarioData {
  // Repair inputs: failing and passing candidates come from here.
  Dataset repair;
  // Clean inputs: passing candidates and extra normal passing tests.
  Dataset normal;
  // True when `normal` is `repair` itself; extra passing tests then avoid
  // items already sampled.
  bool normal_is_repair = false;
  // Datasets reported before/after, target set first.
  std::vector<Dataset> evaluation;
};

// Train with its first config.poison_prefix items stamped with the trigger
// and relabelled to the attack label (the ideal label is kept alongside).
Dataset poisoned_training_set(const Dataset& train, const RepairConfig& config);

ScenarioData prepare_scenario(const RepairConfig& config, const Model& model, const Dataset& train,
                              const Dataset& test);

struct AccuracyRow {
  std::string dataset;
  std::size_t size = 0;
  double before = 0.0;
  double after = 0.0;

  friend bool operator==(const AccuracyRow&, const AccuracyRow&) = default;
};

struct ExpertRecord {
  std::size_t label = 0;
  std::uint64_t seed = 0;
  // feasible | infeasible | skipped | error
  std::string status;
  // Stage reached last: partition, mine, localize, constraints, solve, verify, filter.
  std::string stage;
  std::string reason;
  std::size_t fail_pool = 0;
  std::size_t pass_pool = 0;
  std::size_t fail_used = 0;
  std::size_t pass_used = 0;
  std::size_t extra_used = 0;
  std::size_t neurons = 0;
  std::size_t variables = 0;
  std::size_t constraints = 0;
  std::size_t pivots = 0;
  double objective = 0.0;
  double delta_l1 = 0.0;
  double delta_linf = 0.0;
  // Fraction of the failing inputs in the system the patched model assigns
  // to `label`.
  double fixed_fraction = 0.0;
  bool kept = false;

  friend bool operator==(const ExpertRecord&, const ExpertRecord&) = default;
};

struct RepairReport {
  nlohmann::json config;
  std::vector<AccuracyRow> accuracies;
  std::vector<ExpertRecord> experts;
  std::vector<std::size_t> kept_labels;
  std::size_t base_macs = 0;
  std::size_t ensemble_macs = 0;

  friend bool operator==(const RepairReport&, const RepairReport&) = default;
};

// Per-label intermediate products, kept for the run directory.
struct LabelArtifacts {
  std::size_t label = 0;
  std::vector<ActivationPattern> patterns;
  std::optional<FaultSet> fault;
  std::optional<ConstraintSystem> system;
  // Failing inputs that went into the system.
  std::optional<Dataset> failing;
  std::optional<Expert> expert;
};

struct RepairRun {
  Ensemble ensemble;
  RepairReport report;
  std::vector<LabelArtifacts> artifacts;
};

// Deterministic per-label seed.
std::uint64_t label_seed(std::uint64_t seed, std::size_t label);

// Builds one expert per label concurrently, drops infeasible ones, filters and
// combines them per the config, and evaluates before/after on data.evaluation.
RepairRun run_repair(const RepairConfig& config, const Model& model, const ScenarioData& data);

nlohmann::json report_to_json(const RepairReport& report);
RepairReport report_from_json(const nlohmann::json& j);
std::string render_text(const RepairReport& report);

// Signed percentage-point difference with two decimals, e.g. "+0.20".
std::string format_delta(double before, double after);

}  // namespace relurepair
