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

#include "relurepair/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "relurepair/error.hpp"

namespace relurepair {
namespace {

using Kind = LoadError::Kind;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw LoadError(Kind::kTruncated, path.string() + ": truncated header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(Kind::kIo, "cannot open " + path.string());
  return in;
}

double parse_cell(std::string_view cell, std::size_t line_no) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw LoadError(Kind::kNonNumeric,
                    "line " + std::to_string(line_no) + ": non-numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

std::size_t parse_label(std::string_view cell, std::size_t line_no) {
  const double v = parse_cell(cell, line_no);
  if (v < 0 || v != std::floor(v)) {
    throw LoadError(Kind::kNonNumeric, "line " + std::to_string(line_no) + ": label is not a class index");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string subset_name) const {
  Dataset out;
  out.name = subset_name.empty() ? name : std::move(subset_name);
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  if (attack_labels) out.attack_labels.emplace();
  for (std::size_t i : indices) {
    if (i >= size()) throw ShapeError("dataset index out of range");
    out.inputs.push_back(inputs[i]);
    out.labels.push_back(labels[i]);
    if (attack_labels) out.attack_labels->push_back((*attack_labels)[i]);
  }
  return out;
}

Dataset Dataset::prefix(std::size_t count, std::string subset_name) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx, std::move(subset_name));
}

void Dataset::append(const Dataset& other) {
  if (!other.attack_labels && attack_labels) {
    for (std::size_t l : other.labels) attack_labels->push_back(l);
  } else if (other.attack_labels && !attack_labels) {
    attack_labels = labels;
    attack_labels->insert(attack_labels->end(), other.attack_labels->begin(), other.attack_labels->end());
  } else if (other.attack_labels) {
    attack_labels->insert(attack_labels->end(), other.attack_labels->begin(), other.attack_labels->end());
  }
  inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

void Dataset::validate(std::size_t class_count, bool raw_range) const {
  if (inputs.size() != labels.size() || (attack_labels && attack_labels->size() != labels.size())) {
    throw ShapeError(name + ": inputs and labels differ in length");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels[i] >= class_count || training_label(i) >= class_count) {
      throw ShapeError(name + ": label out of range at item " + std::to_string(i));
    }
    if (!raw_range) {
      for (double v : inputs[i]) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw ShapeError(name + ": value outside [0,1] at item " + std::to_string(i));
        }
      }
    }
  }
}

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                 std::string name) {
  std::ifstream images = open_binary(image_path);
  std::ifstream labels = open_binary(label_path);

  const std::uint32_t image_magic = read_be32(images, image_path);
  if (image_magic != kIdxImageMagic) {
    throw LoadError(Kind::kBadMagic, image_path.string() + ": not an IDX image file");
  }
  const std::uint32_t label_magic = read_be32(labels, label_path);
  if (label_magic != kIdxLabelMagic) {
    throw LoadError(Kind::kBadMagic, label_path.string() + ": not an IDX label file");
  }
  const std::uint32_t count = read_be32(images, image_path);
  const std::uint32_t rows = read_be32(images, image_path);
  const std::uint32_t cols = read_be32(images, image_path);
  const std::uint32_t label_count = read_be32(labels, label_path);
  if (count != label_count) {
    throw LoadError(Kind::kCountMismatch, "image count " + std::to_string(count) +
                                              " != label count " + std::to_string(label_count));
  }

  Dataset out;
  out.name = std::move(name);
  const std::size_t dim = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(dim);
  out.inputs.reserve(count);
  out.labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim))) {
      throw LoadError(Kind::kTruncated, image_path.string() + ": truncated at item " + std::to_string(i));
    }
    char label = 0;
    if (!labels.get(label)) {
      throw LoadError(Kind::kTruncated, label_path.string() + ": truncated at item " + std::to_string(i));
    }
    Vector v(dim);
    std::transform(pixels.begin(), pixels.end(), v.begin(),
                   [](unsigned char p) { return static_cast<double>(p) / 255.0; });
    out.inputs.push_back(std::move(v));
    out.labels.push_back(static_cast<unsigned char>(label));
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t input_dim, bool raw_range,
                 std::string name) {
  std::ifstream in(path);
  if (!in) throw LoadError(Kind::kIo, "cannot open " + path.string());
  Dataset out;
  out.name = std::move(name);
  std::optional<bool> poisoned;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    cells.clear();
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const bool has_ideal = cells.size() == input_dim + 2;
    if ((cells.size() != input_dim + 1 && !has_ideal) || (poisoned && *poisoned != has_ideal)) {
      throw LoadError(Kind::kRaggedRow, path.string() + ":" + std::to_string(line_no) + ": " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(input_dim + 1));
    }
    poisoned = has_ideal;
    Vector v(input_dim);
    for (std::size_t j = 0; j < input_dim; ++j) {
      v[j] = parse_cell(cells[j + 1], line_no);
      if (!raw_range && !(v[j] >= 0.0 && v[j] <= 1.0)) {
        throw LoadError(Kind::kOutOfRange,
                        path.string() + ":" + std::to_string(line_no) + ": value outside [0,1]");
      }
    }
    const std::size_t first = parse_label(cells[0], line_no);
    out.inputs.push_back(std::move(v));
    if (has_ideal) {
      if (!out.attack_labels) out.attack_labels.emplace();
      out.attack_labels->push_back(first);
      out.labels.push_back(parse_label(cells.back(), line_no));
    } else {
      out.labels.push_back(first);
    }
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError(Kind::kIo, "cannot write " + path.string());
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << dataset.training_label(i);
    for (double v : dataset.inputs[i]) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      out << ',' << std::string_view(buf.data(), res.ptr - buf.data());
    }
    if (dataset.attack_labels) out << ',' << dataset.labels[i];
    out << '\n';
  }
}

Dataset poison(const Dataset& dataset, const TriggerSpec& trigger, ImageShape shape) {
  if (trigger.square_side == 0 || trigger.square_side > shape.height ||
      trigger.square_side > shape.width) {
    throw ShapeError("trigger square of side " + std::to_string(trigger.square_side) +
                     " does not fit a " + std::to_string(shape.height) + "x" +
                     std::to_string(shape.width) + " image");
  }
  Dataset out = dataset;
  out.name = dataset.name.starts_with("P-") ? dataset.name : "P-" + dataset.name;
  out.attack_labels = std::vector<std::size_t>(dataset.size(), trigger.target_label);
  const std::size_t dim = shape.height * shape.width;
  for (auto& x : out.inputs) {
    if (x.size() != dim) throw ShapeError("image shape does not match input length");
    for (std::size_t r = shape.height - trigger.square_side; r < shape.height; ++r) {
      for (std::size_t c = shape.width - trigger.square_side; c < shape.width; ++c) {
        x[r * shape.width + c] = trigger.fill_value;
      }
    }
  }
  return out;
}

Dataset fgsm(const Model& model, const Dataset& dataset, double epsilon) {
  if (!(epsilon > 0.0)) throw ShapeError("fgsm epsilon must be positive");
  Dataset out = dataset;
  out.name = "Adv-" + dataset.name;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vector grad = input_gradient(model, dataset.inputs[i], dataset.labels[i]);
    Vector& x = out.inputs[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double sign = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
      x[j] = std::clamp(x[j] + epsilon * sign, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<std::size_t> predict_all(const Model& model, const Dataset& dataset) {
  std::vector<std::size_t> out;
  out.reserve(dataset.size());
  for (const auto& x : dataset.inputs) out.push_back(classify(model, x));
  return out;
}

Partition partition(const Model& model, const Dataset& dataset, std::size_t label) {
  Partition p;
  const auto predicted = predict_all(model, dataset);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (predicted[i] == dataset.labels[i]) {
      p.passing_indices.push_back(i);
    } else if (dataset.labels[i] == label) {
      p.failing_indices.push_back(i);
    }
  }
  p.failing = dataset.subset(p.failing_indices, dataset.name + "-fail");
  p.passing = dataset.subset(p.passing_indices, dataset.name + "-pass");
  return p;
}

}  // namespace relurepair
