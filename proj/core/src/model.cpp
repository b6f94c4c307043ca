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

#include "relurepair/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "relurepair/error.hpp"

namespace relurepair {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe(std::size_t got, std::size_t want) {
  std::ostringstream os;
  os << "got " << got << ", expected " << want;
  return os.str();
}

void apply_dense(const Dense& dense, std::span<const double> in, Vector& out) {
  out.assign(dense.biases.begin(), dense.biases.end());
  for (std::size_t r = 0; r < dense.out_width(); ++r) {
    const auto row = dense.weights.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * in[c];
    out[r] += acc;
  }
}

void apply_layer(const Layer& layer, std::span<const double> in, Vector& out) {
  std::visit(Overloaded{
                 [&](const Dense& d) { apply_dense(d, in, out); },
                 [&](const Relu&) {
                   out.resize(in.size());
                   std::transform(in.begin(), in.end(), out.begin(),
                                  [](double v) { return v > 0.0 ? v : 0.0; });
                 },
                 [&](const Flatten&) { out.assign(in.begin(), in.end()); },
             },
             layer);
}

}  // namespace

LayerKind kind_of(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const Dense&) { return LayerKind::kDense; },
                        [](const Relu&) { return LayerKind::kRelu; },
                        [](const Flatten&) { return LayerKind::kFlatten; },
                    },
                    layer);
}

Model::Model(std::size_t input_dim, std::size_t class_count, std::vector<Layer> layers)
    : input_dim_(input_dim), class_count_(class_count), layers_(std::move(layers)) {
  if (input_dim_ == 0) throw ShapeError("model input_dim must be positive");
  if (class_count_ < 2) throw ShapeError("model class_count must be at least 2");
  if (layers_.empty()) throw ShapeError("model has no layers");
  std::size_t width = input_dim_;
  bool has_dense = false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (const auto* d = std::get_if<Dense>(&layers_[k])) {
      if (d->weights.rows() != d->biases.size()) {
        throw ShapeError("layer " + std::to_string(k) + ": bias length " +
                         describe(d->biases.size(), d->weights.rows()));
      }
      if (d->weights.cols() != width) {
        throw ShapeError("layer " + std::to_string(k) + ": input width " +
                         describe(d->weights.cols(), width));
      }
      const auto finite = [](double v) { return std::isfinite(v); };
      if (!std::all_of(d->weights.data().begin(), d->weights.data().end(), finite) ||
          !std::all_of(d->biases.begin(), d->biases.end(), finite)) {
        throw ShapeError("layer " + std::to_string(k) + ": non-finite parameter");
      }
      width = d->weights.rows();
      has_dense = true;
    }
  }
  if (!has_dense) throw ShapeError("model has no dense layer");
  if (width != class_count_) {
    throw ShapeError("final width " + describe(width, class_count_));
  }
}

const Layer& Model::layer(std::size_t index) const {
  if (index >= layers_.size()) {
    throw ShapeError("layer index " + std::to_string(index) + " out of range");
  }
  return layers_[index];
}

const Dense& Model::dense(std::size_t index) const {
  const auto* d = std::get_if<Dense>(&layer(index));
  if (d == nullptr) throw ShapeError("layer " + std::to_string(index) + " is not dense");
  return *d;
}

Model Model::with_weight_delta(std::size_t layer, std::size_t to, std::size_t from,
                               double delta) const {
  Dense patched = dense(layer);
  if (to >= patched.out_width() || from >= patched.in_width()) {
    throw ShapeError("weight coordinate (" + std::to_string(to) + "," + std::to_string(from) +
                     ") out of range at layer " + std::to_string(layer));
  }
  patched.weights(to, from) += delta;
  return with_dense(layer, std::move(patched));
}

Model Model::with_dense(std::size_t layer, Dense replacement) const {
  const Dense& current = dense(layer);
  if (replacement.weights.rows() != current.weights.rows() ||
      replacement.weights.cols() != current.weights.cols() ||
      replacement.biases.size() != current.biases.size()) {
    throw ShapeError("replacement dense layer has a different shape");
  }
  std::vector<Layer> layers = layers_;
  layers[layer] = std::move(replacement);
  return Model(input_dim_, class_count_, std::move(layers));
}

std::size_t Model::output_width(std::size_t index) const {
  std::size_t width = input_dim_;
  for (std::size_t k = 0; k <= index && k < layers_.size(); ++k) {
    if (const auto* d = std::get_if<Dense>(&layers_[k])) width = d->out_width();
  }
  if (index >= layers_.size()) throw ShapeError("layer index out of range");
  return width;
}

std::size_t Model::input_width(std::size_t index) const {
  if (index >= layers_.size()) throw ShapeError("layer index out of range");
  return index == 0 ? input_dim_ : output_width(index - 1);
}

std::size_t Model::output_layer() const {
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (std::holds_alternative<Dense>(layers_[k])) return k;
  }
  throw ShapeError("model has no dense layer");
}

bool Model::feeds_relu(std::size_t index) const {
  return index + 1 < layers_.size() && std::holds_alternative<Dense>(layers_[index]) &&
         std::holds_alternative<Relu>(layers_[index + 1]);
}

std::optional<std::size_t> Model::penultimate_dense() const {
  const std::size_t out = output_layer();
  for (std::size_t k = out; k-- > 0;) {
    if (feeds_relu(k)) return k;
  }
  return std::nullopt;
}

LayerTrace forward(const Model& model, std::span<const double> input) {
  if (input.size() != model.input_dim()) {
    throw ShapeError("input length " + describe(input.size(), model.input_dim()));
  }
  LayerTrace trace;
  trace.input.assign(input.begin(), input.end());
  trace.values.resize(model.layer_count());
  trace.kinds.reserve(model.layer_count());
  std::span<const double> current = trace.input;
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    apply_layer(model.layers()[k], current, trace.values[k]);
    trace.kinds.push_back(kind_of(model.layers()[k]));
    current = trace.values[k];
  }
  return trace;
}

Vector forward_from(const Model& model, std::size_t start, std::span<const double> layer_input,
                    const Dense* replacement) {
  return forward_range(model, start, model.layer_count(), layer_input, replacement);
}

Vector forward_range(const Model& model, std::size_t start, std::size_t end,
                     std::span<const double> layer_input, const Dense* replacement) {
  if (end > model.layer_count() || start > end) throw ShapeError("layer range out of bounds");
  const std::size_t expected = start < model.layer_count() ? model.input_width(start)
                                                           : model.class_count();
  if (layer_input.size() != expected) {
    throw ShapeError("layer input length " + describe(layer_input.size(), expected));
  }
  Vector current(layer_input.begin(), layer_input.end());
  Vector next;
  for (std::size_t k = start; k < end; ++k) {
    if (k == start && replacement != nullptr) {
      if (replacement->in_width() != current.size() ||
          replacement->out_width() != model.output_width(k)) {
        throw ShapeError("replacement layer shape mismatch");
      }
      apply_dense(*replacement, current, next);
    } else {
      apply_layer(model.layers()[k], current, next);
    }
    std::swap(current, next);
  }
  return current;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] >= values[best]) best = i;
  }
  return best;
}

std::size_t classify(const Model& model, std::span<const double> input) {
  if (input.size() != model.input_dim()) {
    throw ShapeError("input length " + describe(input.size(), model.input_dim()));
  }
  return argmax(forward_from(model, 0, input));
}

ActivationSignature signature(const LayerTrace& trace, std::size_t layer) {
  if (layer + 1 >= trace.kinds.size() || trace.kinds[layer] != LayerKind::kDense ||
      trace.kinds[layer + 1] != LayerKind::kRelu) {
    throw ShapeError("layer " + std::to_string(layer) + " does not produce ReLU pre-activations");
  }
  ActivationSignature sig{layer, {}};
  const Vector& values = trace.values[layer];
  sig.bits.reserve(values.size());
  for (double v : values) sig.bits.push_back(v > 0.0);
  return sig;
}

Vector input_gradient(const Model& model, std::span<const double> input, std::size_t label) {
  if (label >= model.class_count()) {
    throw ShapeError("label " + describe(label, model.class_count()) + " bound");
  }
  const LayerTrace trace = forward(model, input);
  const Vector& logits = trace.logits();
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector grad(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = std::exp(logits[i] - top);
    total += grad[i];
  }
  for (double& g : grad) g /= total;
  grad[label] -= 1.0;

  Vector upstream;
  for (std::size_t k = model.layer_count(); k-- > 0;) {
    const Layer& layer = model.layers()[k];
    if (const auto* d = std::get_if<Dense>(&layer)) {
      upstream.assign(d->in_width(), 0.0);
      for (std::size_t r = 0; r < d->out_width(); ++r) {
        const auto row = d->weights.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) upstream[c] += row[c] * grad[r];
      }
      std::swap(grad, upstream);
    } else if (std::holds_alternative<Relu>(layer)) {
      // The ReLU input equals layer_input(k); zero gradient where it is <= 0.
      const Vector& pre = trace.layer_input(k);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
      }
    }
  }
  return grad;
}

std::size_t mac_count(const Model& model, std::size_t first, std::size_t last) {
  last = std::min(last, model.layer_count());
  std::size_t total = 0;
  for (std::size_t k = first; k < last; ++k) {
    if (const auto* d = std::get_if<Dense>(&model.layers()[k])) {
      total += d->out_width() * d->in_width();
    }
  }
  return total;
}

}  // namespace relurepair
