/*
 * Copyright 2026 The IViDR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ividr/numerics/mlp.h"

#include <cmath>

#include "ividr/common/error.h"

namespace ividr::numerics {
namespace {

// Layer-0 inputs denser than this go through the dense path.
constexpr double kSparseDensity = 0.25;

void affine(const std::vector<double>& w, const std::vector<double>& b, std::size_t in,
            std::size_t out, std::span<const double> x, Vector& pre) {
  pre.assign(b.begin(), b.end());
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = w.data() + o * in;
    double s = 0.0;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
    pre[o] += s;
  }
}

void affine_sparse(const std::vector<double>& w, const std::vector<double>& b, std::size_t in,
                   std::size_t out, std::span<const double> x,
                   const std::vector<std::size_t>& nz, Vector& pre) {
  pre.assign(b.begin(), b.end());
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = w.data() + o * in;
    double s = 0.0;
    for (std::size_t i : nz) s += row[i] * x[i];
    pre[o] += s;
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kLeakyRelu:
      return x > 0.0 ? x : kLeakyReluSlope * x;
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kSoftplus:
      return softplus(x);
  }
  return x;
}

double activate_derivative(Activation act, double x) {
  switch (act) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kLeakyRelu:
      return x > 0.0 ? 1.0 : kLeakyReluSlope;
    case Activation::kSigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::kSoftplus:
      return sigmoid(x);
  }
  return 1.0;
}

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kSoftplus:
      return "softplus";
  }
  return "?";
}

void Mlp::build(std::vector<std::size_t> sizes, Activation output) {
  if (sizes.size() < 2) throw ShapeError("Mlp: need at least input and output sizes");
  for (std::size_t s : sizes)
    if (s == 0) throw ShapeError("Mlp: zero-width layer");
  sizes_ = std::move(sizes);
  output_ = output;
  layers_.clear();
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    Layer layer;
    layer.in = sizes_[l];
    layer.out = sizes_[l + 1];
    layer.act = l + 2 == sizes_.size() ? output : Activation::kLeakyRelu;
    layer.weight = Parameter("w" + std::to_string(l), layer.in * layer.out);
    layer.bias = Parameter("b" + std::to_string(l), layer.out);
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<std::size_t> sizes, Activation output, Rng& rng) {
  build(std::move(sizes), output);
  for (Layer& layer : layers_) {
    const double bound = layer.act == Activation::kLeakyRelu
                             ? std::sqrt(6.0 / static_cast<double>(layer.in))
                             : std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (double& w : layer.weight.value) w = rng.uniform(-bound, bound);
  }
}

Mlp Mlp::zeros(std::vector<std::size_t> sizes, Activation output) {
  Mlp m;
  m.build(std::move(sizes), output);
  return m;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

const Vector& Mlp::forward(std::span<const double> x) {
  if (x.size() != input_size()) {
    throw ShapeError("Mlp::forward: input length " + std::to_string(x.size()) +
                     ", expected " + std::to_string(input_size()));
  }
  const std::size_t n = layers_.size();
  inputs_.resize(n);
  pre_.resize(n);
  inputs_[0].assign(x.begin(), x.end());

  nonzero_.clear();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) nonzero_.push_back(i);
  sparse_input_ =
      static_cast<double>(nonzero_.size()) < kSparseDensity * static_cast<double>(x.size());

  for (std::size_t l = 0; l < n; ++l) {
    const Layer& layer = layers_[l];
    if (l == 0 && sparse_input_) {
      affine_sparse(layer.weight.value, layer.bias.value, layer.in, layer.out, inputs_[0],
                    nonzero_, pre_[0]);
    } else {
      affine(layer.weight.value, layer.bias.value, layer.in, layer.out, inputs_[l], pre_[l]);
    }
    Vector& next = l + 1 < n ? inputs_[l + 1] : output_cache_;
    next.resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) next[o] = activate(layer.act, pre_[l][o]);
  }
  has_cache_ = true;
  return output_cache_;
}

Vector Mlp::evaluate(std::span<const double> x) const {
  if (x.size() != input_size()) {
    throw ShapeError("Mlp::evaluate: input length " + std::to_string(x.size()) +
                     ", expected " + std::to_string(input_size()));
  }
  Vector cur(x.begin(), x.end());
  Vector pre;
  for (const Layer& layer : layers_) {
    affine(layer.weight.value, layer.bias.value, layer.in, layer.out, cur, pre);
    cur.resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) cur[o] = activate(layer.act, pre[o]);
  }
  return cur;
}

Vector Mlp::backward(std::span<const double> upstream, bool need_input_grad) {
  if (!has_cache_) throw StateError("Mlp::backward called without a cached forward pass");
  if (upstream.size() != output_size()) {
    throw ShapeError("Mlp::backward: upstream length " + std::to_string(upstream.size()) +
                     ", expected " + std::to_string(output_size()));
  }
  Vector delta(upstream.begin(), upstream.end());
  Vector below;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    Layer& layer = layers_[l];
    for (std::size_t o = 0; o < layer.out; ++o)
      delta[o] *= activate_derivative(layer.act, pre_[l][o]);

    const Vector& x = inputs_[l];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      layer.bias.grad[o] += d;
      if (d == 0.0) continue;
      double* g = layer.weight.grad.data() + o * layer.in;
      if (l == 0 && sparse_input_) {
        for (std::size_t i : nonzero_) g[i] += d * x[i];
      } else {
        for (std::size_t i = 0; i < layer.in; ++i) g[i] += d * x[i];
      }
    }
    if (l == 0 && !need_input_grad) break;

    below.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = layer.weight.value.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) below[i] += w[i] * d;
    }
    delta.swap(below);
  }
  has_cache_ = false;
  if (!need_input_grad) return {};
  return delta;
}

ParameterList Mlp::parameters() {
  ParameterList out;
  for (Layer& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

void Mlp::zero_grad() {
  for (Layer& layer : layers_) {
    layer.weight.zero_grad();
    layer.bias.zero_grad();
  }
}

}  // namespace ividr::numerics
