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
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace relurepair {

using Vector = std::vector<double>;

// Dense row-major matrix; row = output neuron, column = input neuron.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Dense {
  Matrix weights;
  Vector biases;

  std::size_t in_width() const { return weights.cols(); }
  std::size_t out_width() const { return weights.rows(); }

  friend bool operator==(const Dense&, const Dense&) = default;
};

struct Relu {
  friend bool operator==(const Relu&, const Relu&) = default;
};

struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

using Layer = std::variant<Dense, Relu, Flatten>;

enum class LayerKind { kDense, kRelu, kFlatten };

LayerKind kind_of(const Layer& layer);

// Feed-forward classifier built from dense, ReLU and flatten layers. The
// constructor checks widths chain from input_dim to class_count and that
// every parameter is finite; a Model is never observed in an invalid state.
class Model {
 public:
  Model(std::size_t input_dim, std::size_t class_count, std::vector<Layer> layers);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t class_count() const { return class_count_; }
  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t index) const;

  // Throws ShapeError when `index` is not a dense layer.
  const Dense& dense(std::size_t index) const;

  // Adds `delta` to one weight, returning the patched copy. The receiver is
  // left untouched.
  Model with_weight_delta(std::size_t layer, std::size_t to, std::size_t from, double delta) const;
  Model with_dense(std::size_t layer, Dense replacement) const;

  // Width of the values produced by layer `index`.
  std::size_t output_width(std::size_t index) const;
  // Width of the values consumed by layer `index`.
  std::size_t input_width(std::size_t index) const;

  // Index of the last dense layer (the logits producer).
  std::size_t output_layer() const;

  // True when layer `index` is dense and immediately followed by a ReLU, i.e.
  // its outputs are the pre-activations of a ReLU layer.
  bool feeds_relu(std::size_t index) const;

  // Dense layer that precedes the output layer and feeds a ReLU; the default
  // target for intermediate-layer repair. nullopt for single-layer models.
  std::optional<std::size_t> penultimate_dense() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  std::size_t input_dim_;
  std::size_t class_count_;
  std::vector<Layer> layers_;
};

struct LayerTrace {
  Vector input;
  // values[k] is the output of layer k.
  std::vector<Vector> values;
  std::vector<LayerKind> kinds;

  const Vector& logits() const { return values.back(); }
  // Values consumed by layer k: the network input for k == 0.
  const Vector& layer_input(std::size_t k) const { return k == 0 ? input : values[k - 1]; }
};

struct ActivationSignature {
  std::size_t layer_index = 0;
  std::vector<bool> bits;

  friend bool operator==(const ActivationSignature&, const ActivationSignature&) = default;
};

LayerTrace forward(const Model& model, std::span<const double> input);

// Runs layers [start, end) on `layer_input`, optionally substituting the dense
// layer at `start` with `replacement`. Returns the final values.
Vector forward_from(const Model& model, std::size_t start, std::span<const double> layer_input,
                    const Dense* replacement = nullptr);
// Runs layers [start, end) only.
Vector forward_range(const Model& model, std::size_t start, std::size_t end,
                     std::span<const double> layer_input, const Dense* replacement = nullptr);

// Index of the maximum; ties go to the largest index.
std::size_t argmax(std::span<const double> values);

std::size_t classify(const Model& model, std::span<const double> input);

// On/off bits of the pre-activations produced by dense layer `layer`, which
// must feed a ReLU. A neuron is on iff its value is strictly positive.
ActivationSignature signature(const LayerTrace& trace, std::size_t layer);

// Gradient of softmax cross-entropy with respect to the input. The ReLU
// subgradient at 0 is 0.
Vector input_gradient(const Model& model, std::span<const double> input, std::size_t label);

// Multiply-accumulate operations performed by dense layers in [first, last).
std::size_t mac_count(const Model& model, std::size_t first = 0, std::size_t last = static_cast<std::size_t>(-1));

}  // namespace relurepair
