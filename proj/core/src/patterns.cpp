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

#include "relurepair/patterns.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "relurepair/error.hpp"

namespace relurepair {
namespace {

double gini(std::size_t members, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(members) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

struct Literal {
  std::size_t neuron;
  bool on;
};

class TreeMiner {
 public:
  TreeMiner(std::span<const ActivationSignature> sigs, std::span<const bool> mask,
            const MinerParams& params, Polarity polarity)
      : sigs_(sigs), mask_(mask), params_(params), polarity_(polarity) {}

  std::vector<ActivationPattern> run() {
    std::vector<std::size_t> all(sigs_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<Literal> path;
    grow(all, path, 0);
    std::stable_sort(out_.begin(), out_.end(),
                     [](const auto& a, const auto& b) { return a.support > b.support; });
    return std::move(out_);
  }

 private:
  std::size_t members(const std::vector<std::size_t>& node) const {
    return static_cast<std::size_t>(
        std::count_if(node.begin(), node.end(), [&](std::size_t i) { return mask_[i]; }));
  }

  void grow(const std::vector<std::size_t>& node, std::vector<Literal>& path, std::size_t depth) {
    const std::size_t m = members(node);
    const std::size_t n = node.size();
    if (m == 0) return;
    if (m == n || depth >= params_.max_depth) {
      emit(node, path);
      return;
    }
    const double parent = gini(m, n);
    const std::size_t width = sigs_[node.front()].bits.size();
    double best_score = parent;
    std::size_t best_feature = width;
    for (std::size_t f = 0; f < width; ++f) {
      std::size_t on_total = 0, on_members = 0;
      for (std::size_t i : node) {
        if (sigs_[i].bits[f]) {
          ++on_total;
          if (mask_[i]) ++on_members;
        }
      }
      if (on_total == 0 || on_total == n) continue;
      const std::size_t off_total = n - on_total;
      const double score = (static_cast<double>(on_total) * gini(on_members, on_total) +
                            static_cast<double>(off_total) * gini(m - on_members, off_total)) /
                           static_cast<double>(n);
      if (score < best_score - 1e-12) {
        best_score = score;
        best_feature = f;
      }
    }
    if (best_feature == width) {
      emit(node, path);
      return;
    }
    std::vector<std::size_t> off_node, on_node;
    for (std::size_t i : node) (sigs_[i].bits[best_feature] ? on_node : off_node).push_back(i);
    path.push_back({best_feature, false});
    grow(off_node, path, depth + 1);
    path.back().on = true;
    grow(on_node, path, depth + 1);
    path.pop_back();
  }

  void emit(const std::vector<std::size_t>& node, const std::vector<Literal>& path) {
    std::vector<Literal> literals = path;
    if (params_.close_over_members) close(node, literals);

    std::size_t support = 0, hits = 0;
    for (std::size_t i : node) {
      const bool sat = std::all_of(literals.begin(), literals.end(), [&](const Literal& l) {
        return sigs_[i].bits[l.neuron] == l.on;
      });
      if (sat) {
        ++support;
        if (mask_[i]) ++hits;
      }
    }
    const double purity = static_cast<double>(hits) / static_cast<double>(support);
    if (purity < params_.min_purity || hits < params_.min_support) return;

    ActivationPattern p;
    p.layer_index = sigs_.front().layer_index;
    p.label = params_.label;
    p.polarity = polarity_;
    p.support = support;
    p.purity = purity;
    for (const auto& l : literals) (l.on ? p.on_set : p.off_set).push_back(l.neuron);
    std::sort(p.on_set.begin(), p.on_set.end());
    std::sort(p.off_set.begin(), p.off_set.end());
    out_.push_back(std::move(p));
  }

  void close(const std::vector<std::size_t>& node, std::vector<Literal>& literals) const {
    const std::size_t width = sigs_[node.front()].bits.size();
    for (std::size_t f = 0; f < width; ++f) {
      if (std::any_of(literals.begin(), literals.end(), [&](const Literal& l) { return l.neuron == f; })) {
        continue;
      }
      int state = -1;
      bool unanimous = true;
      for (std::size_t i : node) {
        if (!mask_[i]) continue;
        const int bit = sigs_[i].bits[f] ? 1 : 0;
        if (state == -1) state = bit;
        if (bit != state) {
          unanimous = false;
          break;
        }
      }
      if (unanimous && state != -1) literals.push_back({f, state == 1});
    }
  }

  std::span<const ActivationSignature> sigs_;
  std::span<const bool> mask_;
  const MinerParams& params_;
  Polarity polarity_;
  std::vector<ActivationPattern> out_;
};

std::vector<ActivationPattern> mine_with(std::span<const ActivationSignature> signatures,
                                         std::span<const bool> mask, const MinerParams& params,
                                         Polarity polarity) {
  if (signatures.empty()) throw std::invalid_argument("mine: no signatures");
  if (mask.size() != signatures.size()) throw ShapeError("mine: mask length differs from signatures");
  const auto& first = signatures.front();
  for (const auto& s : signatures) {
    if (s.layer_index != first.layer_index || s.bits.size() != first.bits.size()) {
      throw ShapeError("mine: signatures come from different layers");
    }
  }
  return TreeMiner(signatures, mask, params, polarity).run();
}

}  // namespace

bool satisfies(const ActivationPattern& pattern, const ActivationSignature& sig) {
  if (pattern.layer_index != sig.layer_index) {
    throw ShapeError("pattern at layer " + std::to_string(pattern.layer_index) +
                     " checked against signature at layer " + std::to_string(sig.layer_index));
  }
  const auto bit = [&](std::size_t n) {
    if (n >= sig.bits.size()) throw ShapeError("pattern neuron index out of range");
    return static_cast<bool>(sig.bits[n]);
  };
  return std::all_of(pattern.on_set.begin(), pattern.on_set.end(), bit) &&
         std::none_of(pattern.off_set.begin(), pattern.off_set.end(), bit);
}

std::vector<ActivationPattern> mine(std::span<const ActivationSignature> signatures,
                                    std::span<const bool> class_mask, const MinerParams& params) {
  return mine_with(signatures, class_mask, params, Polarity::kCorrect);
}

std::vector<ActivationPattern> mine_incorrect(std::span<const ActivationSignature> signatures,
                                              std::span<const bool> misclassified_mask,
                                              const MinerParams& params) {
  return mine_with(signatures, misclassified_mask, params, Polarity::kIncorrect);
}

const ActivationPattern& top_pattern(std::span<const ActivationPattern> patterns) {
  if (patterns.empty()) throw std::invalid_argument("top_pattern: empty pattern list");
  const auto first_neuron = [](const ActivationPattern& p) {
    std::size_t lowest = static_cast<std::size_t>(-1);
    if (!p.on_set.empty()) lowest = std::min(lowest, p.on_set.front());
    if (!p.off_set.empty()) lowest = std::min(lowest, p.off_set.front());
    return lowest;
  };
  const ActivationPattern* best = &patterns.front();
  for (const auto& p : patterns.subspan(1)) {
    if (p.support != best->support) {
      if (p.support > best->support) best = &p;
    } else if (p.purity != best->purity) {
      if (p.purity > best->purity) best = &p;
    } else if (p.literal_count() != best->literal_count()) {
      if (p.literal_count() < best->literal_count()) best = &p;
    } else if (first_neuron(p) < first_neuron(*best)) {
      best = &p;
    }
  }
  return *best;
}

}  // namespace relurepair
