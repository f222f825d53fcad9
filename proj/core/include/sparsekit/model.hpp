// Copyright 2026 The sparsekit Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sparsekit/l0.hpp"
#include "sparsekit/magnitude.hpp"
#include "sparsekit/mask.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/schedule.hpp"
#include "sparsekit/tape.hpp"
#include "sparsekit/variational_dropout.hpp"

namespace sparsekit {

enum class Method { None, Magnitude, Random, VariationalDropout, L0 };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

enum class LayerKind { Dense, Conv, MaxPool, Flatten };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  // Dense: fan-in / fan-out. Conv: input / output channels.
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t window = 2;  // MaxPool
  bool relu = false;

  bool has_weights() const { return kind == LayerKind::Dense || kind == LayerKind::Conv; }
  Shape weight_shape() const;
  std::size_t weight_count() const;
  LinearGeometry geometry() const;
};

struct ModelSpec {
  std::string name;
  Shape input_dims;  // per sample, e.g. {1, 28, 28}
  std::vector<LayerSpec> layers;
  std::size_t classes = 10;

  // Propagates shapes through the stack; throws ValidationError on mismatch.
  void validate() const;
  std::size_t weight_count() const;
  std::vector<LayerSize> weight_layers() const;
  // Output spatial positions per weight layer (1 for dense); the number of
  // times each weight is used in one forward pass of one sample.
  std::vector<std::size_t> weight_uses() const;
  std::vector<std::size_t> weight_layer_indices() const;
};

ModelSpec build_lenet300();
// Caffe LeNet-5 topology: conv(20,5x5)-pool-conv(50,5x5)-pool-fc(500)-fc(10).
ModelSpec build_lenet5();
ModelSpec build_model(std::string_view name);

template <class T>
struct LayerParams {
  BasicTensor<T> weight;      // theta for VD, free weights for L0
  BasicTensor<T> bias;
  SparsityMask mask;          // magnitude / random
  BasicTensor<T> log_sigma2;  // VD only
  BasicTensor<T> log_alpha;   // L0 only
};

template <class T>
struct BasicModelState {
  std::vector<LayerParams<T>> layers;  // aligned with ModelSpec::layers

  // Trainable tensors in a fixed order (weights, biases, then method extras).
  std::vector<BasicTensor<T>*> parameters();
  template <class U>
  BasicModelState<U> cast() const;
};

using ModelState = BasicModelState<float>;

struct InitOptions {
  Method method = Method::None;
  double log_sigma2_init = -10.0;
  double l0_initial_dropout = 0.1;
};

// Glorot-uniform weights, zero biases, method-specific extras. Layer k draws
// from rng.substream(k).
template <class T>
BasicModelState<T> init_model(const ModelSpec& spec, const InitOptions& options, const Rng& rng);

// Glorot-uniform limit sqrt(6 / (fan_in + fan_out)) for a weight layer.
double glorot_limit(const LayerSpec& layer);

struct ForwardOptions {
  Method method = Method::None;
  GateMode mode = GateMode::Train;
  GradMode grad_mode = GradMode::Dense;
  HardConcreteShape hc{};
};

// Full forward pass, input [N x C x H x W]; returns logits [N x classes].
// Eval mode for VD / L0 is handled by effective_state(), not here.
template <class T>
Var<T> model_forward(Tape<T>& tape, const ModelSpec& spec, BasicModelState<T>& state,
                     Var<T> input, const ForwardOptions& options, Rng& rng);

// Sum of per-layer VD KL (clip applies) or expected L0; zero Var otherwise.
template <class T>
Var<T> model_regularizer(Tape<T>& tape, const ModelSpec& spec, BasicModelState<T>& state,
                         Method method, const HardConcreteShape& hc, double vd_log_alpha_clip);

// Sum of the expected squared-norm penalty over gated layers.
template <class T>
Var<T> model_l0_weight_decay(Tape<T>& tape, const ModelSpec& spec, BasicModelState<T>& state,
                             const HardConcreteShape& hc);

struct TestTimeOptions {
  Method method = Method::None;
  double vd_threshold = 3.0;
  HardConcreteShape hc{};
};

// Per weight layer: which weights survive at test time.
template <class T>
std::vector<SparsityMask> test_time_masks(const ModelSpec& spec, const BasicModelState<T>& state,
                                          const TestTimeOptions& options);

// Deterministic inference weights (masked / thresholded / gated); the result
// is a plain dense model.
template <class T>
BasicModelState<T> effective_state(const ModelSpec& spec, const BasicModelState<T>& state,
                                   const TestTimeOptions& options);

// Dense forward used for evaluation of an effective state.
template <class T>
Var<T> dense_forward(Tape<T>& tape, const ModelSpec& spec, const BasicModelState<T>& state,
                     Var<T> input);

}  // namespace sparsekit
