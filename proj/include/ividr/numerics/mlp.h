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

#ifndef IVIDR_NUMERICS_MLP_H_
#define IVIDR_NUMERICS_MLP_H_

#include <span>
#include <string>
#include <vector>

#include "ividr/numerics/matrix.h"
#include "ividr/numerics/parameter.h"
#include "ividr/numerics/rng.h"

namespace ividr::numerics {

enum class Activation { kIdentity, kLeakyRelu, kSigmoid, kSoftplus };

inline constexpr double kLeakyReluSlope = 0.01;

double activate(Activation act, double x);
// Derivative expressed through the pre-activation x.
double activate_derivative(Activation act, double x);
double sigmoid(double x);
double softplus(double x);

const char* activation_name(Activation act);

// Fully connected network. Hidden layers use LeakyReLU; the output
// activation is chosen per use site.
//
// `forward` caches what `backward` needs; `backward` consumes that cache and
// accumulates parameter gradients, so the usual pattern is one
// forward/backward pair per example. `evaluate` is the const, cache-free
// path for read-only scoring.
class Mlp {
 public:
  Mlp() = default;
  // Weights drawn from a scaled uniform (He for LeakyReLU layers, Glorot for
  // the output layer); biases start at zero.
  Mlp(std::vector<std::size_t> sizes, Activation output, Rng& rng);
  // All weights and biases zero.
  static Mlp zeros(std::vector<std::size_t> sizes, Activation output);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return layers_.size(); }
  Activation output_activation() const { return output_; }
  std::size_t parameter_count() const;

  const Vector& forward(std::span<const double> x);
  Vector evaluate(std::span<const double> x) const;
  // Returns ∂loss/∂x, or an empty vector when `need_input_grad` is false.
  Vector backward(std::span<const double> upstream, bool need_input_grad = true);
  bool has_cache() const { return has_cache_; }

  ParameterList parameters();
  void zero_grad();

  // Layer l maps sizes()[l] -> sizes()[l+1]; weight is out × in row-major.
  Parameter& weight(std::size_t l) { return layers_[l].weight; }
  Parameter& bias(std::size_t l) { return layers_[l].bias; }
  const Parameter& weight(std::size_t l) const { return layers_[l].weight; }
  const Parameter& bias(std::size_t l) const { return layers_[l].bias; }

 private:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::kIdentity;
    Parameter weight;
    Parameter bias;
  };

  void build(std::vector<std::size_t> sizes, Activation output);

  std::vector<std::size_t> sizes_;
  Activation output_ = Activation::kIdentity;
  std::vector<Layer> layers_;

  // Forward cache: inputs_[l] is the input of layer l, pre_[l] its
  // pre-activation. nonzero_ lists non-zero input positions of layer 0 when
  // the input is sparse enough to exploit.
  std::vector<Vector> inputs_;
  std::vector<Vector> pre_;
  Vector output_cache_;
  std::vector<std::size_t> nonzero_;
  bool sparse_input_ = false;
  bool has_cache_ = false;
};

}  // namespace ividr::numerics

#endif  // IVIDR_NUMERICS_MLP_H_
