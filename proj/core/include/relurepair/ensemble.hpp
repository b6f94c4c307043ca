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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relurepair/dataset.hpp"
#include "relurepair/localize.hpp"
#include "relurepair/model.hpp"

namespace relurepair {

struct ExpertProvenance {
  std::string solver_status;
  double objective = 0.0;
  std::size_t variable_count = 0;
  std::size_t constraint_count = 0;
  std::size_t pivots = 0;

  friend bool operator==(const ExpertProvenance&, const ExpertProvenance&) = default;
};

// Weight deltas on one dense layer that make the base model an expert for
// `label`.
struct Expert {
  std::size_t label = 0;
  std::size_t layer_index = 0;
  std::map<Edge, double> deltas;
  ExpertProvenance provenance;

  friend bool operator==(const Expert&, const Expert&) = default;
};

// Throws ShapeError when a delta coordinate is outside the layer.
Model apply_expert(const Model& base, const Expert& expert);
Dense patched_layer(const Model& base, const Expert& expert);

// Intermediate layers: per-coordinate mean over the experts that touch the
// coordinate. Output layer: union of the deltas; overlapping coordinates throw
// IntegrityError.
Model merge_experts(const Model& base, std::span<const Expert> experts);

enum class Strategy { kNaive, kConfidence, kVoting, kMerged };

std::string to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);

enum class Resolution {
  kBaseNoExpert,    // E empty
  kUniqueExpert,    // |E| == 1
  kNaive,           // |E| > 1, fell back to the base model
  kConfidence,      // |E| > 1, most confident member
  kVoting,          // |E| > 1, vote winner
  kVotingTie,       // |E| > 1, tied vote, fell back to the base model
  kMerged,          // pre-merged model
};

struct PredictionReport {
  // Labels of the experts that predicted their own label.
  std::vector<std::size_t> members;
  // Logits of each expert (by expert order); empty for kMerged.
  std::vector<Vector> expert_logits;
  std::optional<std::size_t> base_label;
  Resolution resolution = Resolution::kBaseNoExpert;
  std::size_t mac_count = 0;
};

// Base model plus per-label experts sharing one repaired layer. Execution
// runs the layers before the repaired layer once and splits afterwards.
class Ensemble {
 public:
  Ensemble(Model base, std::vector<Expert> experts, Strategy strategy, bool filtered = false);

  const Model& base() const { return base_; }
  const std::vector<Expert>& experts() const { return experts_; }
  Strategy strategy() const { return strategy_; }
  bool filtered() const { return filtered_; }
  std::vector<std::size_t> kept_labels() const;
  // Only for kMerged.
  const Model* merged() const { return merged_ ? &*merged_ : nullptr; }

  std::pair<std::size_t, PredictionReport> predict(std::span<const double> input) const;
  std::size_t classify(std::span<const double> input) const { return predict(input).first; }

  // Multiply-accumulates for one prediction when no fallback to the base
  // model is needed: prefix + k * suffix for split execution, the base count
  // for kMerged.
  std::size_t mac_count() const;

 private:
  Model base_;
  std::vector<Expert> experts_;
  Strategy strategy_;
  bool filtered_;
  std::size_t split_layer_ = 0;
  std::vector<Dense> patched_;
  std::optional<Model> merged_;
};

using Predictor = std::function<std::size_t(std::span<const double>)>;

// Fraction of items whose prediction equals the ideal label.
double evaluate(const Predictor& predictor, const Dataset& dataset);
double evaluate(const Model& model, const Dataset& dataset);

// One-vs-rest F1 of `label` given predictions and ideal labels; 0 when
// undefined.
double f1_score(std::span<const std::size_t> predicted, std::span<const std::size_t> ideal, std::size_t label);

// Keeps experts whose patched model has strictly higher F1 for their own
// label than the base model on `eval`.
std::vector<Expert> f1_filter(const Model& base, std::span<const Expert> experts, const Dataset& eval);

}  // namespace relurepair
