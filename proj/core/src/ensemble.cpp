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

#include "relurepair/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "relurepair/error.hpp"

namespace relurepair {

Dense patched_layer(const Model& base, const Expert& expert) {
  Dense dense = base.dense(expert.layer_index);
  for (const auto& [edge, delta] : expert.deltas) {
    if (edge.to >= dense.out_width() || edge.from >= dense.in_width()) {
      throw ShapeError("expert delta (" + std::to_string(edge.to) + "," + std::to_string(edge.from) +
                       ") outside layer " + std::to_string(expert.layer_index));
    }
    dense.weights(edge.to, edge.from) += delta;
  }
  return dense;
}

Model apply_expert(const Model& base, const Expert& expert) {
  if (expert.deltas.empty()) return base;
  return base.with_dense(expert.layer_index, patched_layer(base, expert));
}

Model merge_experts(const Model& base, std::span<const Expert> experts) {
  if (experts.empty()) return base;
  const std::size_t layer = experts.front().layer_index;
  for (const auto& e : experts) {
    if (e.layer_index != layer) throw IntegrityError("merge_experts: experts repair different layers");
  }
  const bool output = layer == base.output_layer();
  std::map<Edge, std::pair<double, std::size_t>> merged;
  for (const auto& e : experts) {
    for (const auto& [edge, delta] : e.deltas) {
      auto& slot = merged[edge];
      if (output && slot.second > 0) {
        throw IntegrityError("merge_experts: output-layer experts overlap at (" + std::to_string(edge.to) + "," +
                             std::to_string(edge.from) + ")");
      }
      slot.first += delta;
      slot.second += 1;
    }
  }
  Expert combined;
  combined.layer_index = layer;
  for (const auto& [edge, acc] : merged) combined.deltas[edge] = acc.first / static_cast<double>(acc.second);
  return apply_expert(base, combined);
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kNaive:
      return "naive";
    case Strategy::kConfidence:
      return "confidence";
    case Strategy::kVoting:
      return "voting";
    case Strategy::kMerged:
      return "merged";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "naive") return Strategy::kNaive;
  if (name == "confidence") return Strategy::kConfidence;
  if (name == "voting") return Strategy::kVoting;
  if (name == "merged") return Strategy::kMerged;
  throw std::invalid_argument("unknown combination strategy '" + name + "'");
}

Ensemble::Ensemble(Model base, std::vector<Expert> experts, Strategy strategy, bool filtered)
    : base_(std::move(base)), experts_(std::move(experts)), strategy_(strategy), filtered_(filtered) {
  std::sort(experts_.begin(), experts_.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
  std::set<std::size_t> labels;
  for (const auto& e : experts_) {
    if (!labels.insert(e.label).second) {
      throw IntegrityError("ensemble holds two experts for label " + std::to_string(e.label));
    }
    if (e.label >= base_.class_count()) throw ShapeError("expert label out of range");
    if (e.layer_index != experts_.front().layer_index) {
      throw IntegrityError("ensemble experts repair different layers");
    }
  }
  if (strategy_ == Strategy::kMerged) {
    merged_ = merge_experts(base_, experts_);
    return;
  }
  split_layer_ = experts_.empty() ? base_.output_layer() : experts_.front().layer_index;
  patched_.reserve(experts_.size());
  for (const auto& e : experts_) patched_.push_back(patched_layer(base_, e));
}

std::vector<std::size_t> Ensemble::kept_labels() const {
  std::vector<std::size_t> out;
  for (const auto& e : experts_) out.push_back(e.label);
  return out;
}

std::size_t Ensemble::mac_count() const {
  if (strategy_ == Strategy::kMerged) return relurepair::mac_count(base_);
  return relurepair::mac_count(base_, 0, split_layer_) +
         experts_.size() * relurepair::mac_count(base_, split_layer_);
}

std::pair<std::size_t, PredictionReport> Ensemble::predict(std::span<const double> input) const {
  PredictionReport report;
  if (strategy_ == Strategy::kMerged) {
    report.resolution = Resolution::kMerged;
    report.mac_count = relurepair::mac_count(*merged_);
    return {relurepair::classify(*merged_, input), std::move(report)};
  }
  if (input.size() != base_.input_dim()) throw ShapeError("ensemble input has the wrong length");

  const Vector shared = forward_range(base_, 0, split_layer_, input);
  const std::size_t suffix_macs = relurepair::mac_count(base_, split_layer_);
  report.mac_count = relurepair::mac_count(base_, 0, split_layer_);

  std::vector<std::size_t> predicted;
  std::vector<std::size_t> member_index;
  for (std::size_t i = 0; i < experts_.size(); ++i) {
    report.expert_logits.push_back(forward_from(base_, split_layer_, shared, &patched_[i]));
    report.mac_count += suffix_macs;
    predicted.push_back(argmax(report.expert_logits.back()));
    if (predicted.back() == experts_[i].label) {
      report.members.push_back(experts_[i].label);
      member_index.push_back(i);
    }
  }

  const auto base_label = [&]() {
    if (!report.base_label) {
      report.base_label = argmax(forward_from(base_, split_layer_, shared));
      report.mac_count += suffix_macs;
    }
    return *report.base_label;
  };

  if (member_index.empty()) {
    report.resolution = Resolution::kBaseNoExpert;
    return {base_label(), std::move(report)};
  }
  if (member_index.size() == 1) {
    report.resolution = Resolution::kUniqueExpert;
    return {experts_[member_index.front()].label, std::move(report)};
  }
  switch (strategy_) {
    case Strategy::kNaive:
      report.resolution = Resolution::kNaive;
      return {base_label(), std::move(report)};
    case Strategy::kConfidence: {
      std::size_t best = member_index.front();
      for (std::size_t i : member_index) {
        const double conf = std::abs(report.expert_logits[i][experts_[i].label]);
        if (conf > std::abs(report.expert_logits[best][experts_[best].label])) best = i;
      }
      report.resolution = Resolution::kConfidence;
      return {experts_[best].label, std::move(report)};
    }
    case Strategy::kVoting: {
      std::size_t best_votes = 0;
      std::size_t winner = 0;
      bool tied = false;
      for (std::size_t i : member_index) {
        const std::size_t label = experts_[i].label;
        const auto votes = static_cast<std::size_t>(std::count(predicted.begin(), predicted.end(), label));
        if (votes > best_votes) {
          best_votes = votes;
          winner = label;
          tied = false;
        } else if (votes == best_votes) {
          tied = true;
        }
      }
      if (tied) {
        report.resolution = Resolution::kVotingTie;
        return {base_label(), std::move(report)};
      }
      report.resolution = Resolution::kVoting;
      return {winner, std::move(report)};
    }
    case Strategy::kMerged:
      break;
  }
  throw std::logic_error("unreachable combination strategy");
}

double evaluate(const Predictor& predictor, const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (predictor(dataset.inputs[i]) == dataset.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

double evaluate(const Model& model, const Dataset& dataset) {
  return evaluate([&](std::span<const double> x) { return relurepair::classify(model, x); }, dataset);
}

double f1_score(std::span<const std::size_t> predicted, std::span<const std::size_t> ideal, std::size_t label) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == label;
    const bool t = ideal[i] == label;
    if (p && t) ++tp;
    if (p && !t) ++fp;
    if (!p && t) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::vector<Expert> f1_filter(const Model& base, std::span<const Expert> experts, const Dataset& eval) {
  if (eval.empty()) throw std::invalid_argument("f1_filter: empty evaluation set");
  const auto base_pred = predict_all(base, eval);
  std::vector<Expert> kept;
  for (const auto& e : experts) {
    const auto pred = predict_all(apply_expert(base, e), eval);
    if (f1_score(pred, eval.labels, e.label) > f1_score(base_pred, eval.labels, e.label)) kept.push_back(e);
  }
  return kept;
}

}  // namespace relurepair
