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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relurepair/model.hpp"

namespace relurepair {

// Labelled inputs. `labels` always holds the ideal (ground-truth) class. For
// poisoned data `attack_labels` holds the label the trigger is meant to
// produce; training on a poisoned set uses it, evaluation never does.
struct Dataset {
  std::string name;
  std::vector<Vector> inputs;
  std::vector<std::size_t> labels;
  std::optional<std::vector<std::size_t>> attack_labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
  std::size_t training_label(std::size_t i) const {
    return attack_labels ? (*attack_labels)[i] : labels[i];
  }

  // Items at `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices, std::string subset_name = {}) const;
  // First `count` items (all if count >= size()).
  Dataset prefix(std::size_t count, std::string subset_name = {}) const;
  void append(const Dataset& other);

  // Checks equal lengths, label bounds and (unless raw_range) pixel range.
  void validate(std::size_t class_count, bool raw_range = false) const;
};

// Backdoor trigger: a filled square stamped into the bottom-right corner.
struct TriggerSpec {
  std::size_t square_side = 4;
  double fill_value = 1.0;
  std::size_t target_label = 7;
};

struct ImageShape {
  std::size_t height = 28;
  std::size_t width = 28;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Reads an IDX image/label pair; pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                 std::string name = "idx");

// Rows are `label,v1,...,vN`; poisoned files carry `attack_label,v1..vN,ideal_label`.
// Every row of a file must use the same form.
Dataset load_csv(const std::filesystem::path& path, std::size_t input_dim, bool raw_range = false,
                 std::string name = "csv");
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

Dataset poison(const Dataset& dataset, const TriggerSpec& trigger, ImageShape shape);

// x' = clip(x + epsilon * sign(grad), 0, 1) with sign(0) = 0, using the
// ideal label for the loss.
Dataset fgsm(const Model& model, const Dataset& dataset, double epsilon);

struct Partition {
  Dataset failing;
  Dataset passing;
  std::vector<std::size_t> failing_indices;
  std::vector<std::size_t> passing_indices;
};

// failing: ideal label == `label` but predicted otherwise.
// passing: predicted == ideal, any label.
Partition partition(const Model& model, const Dataset& dataset, std::size_t label);

// Predicted class for every item.
std::vector<std::size_t> predict_all(const Model& model, const Dataset& dataset);

}  // namespace relurepair
