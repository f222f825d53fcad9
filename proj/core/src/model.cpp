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

#include "sparsekit/model.hpp"

#include <cmath>

#include "sparsekit/ops.hpp"

namespace sparsekit {

Method parse_method(std::string_view name) {
  if (name == "none") return Method::None;
  if (name == "magnitude") return Method::Magnitude;
  if (name == "random") return Method::Random;
  if (name == "vd") return Method::VariationalDropout;
  if (name == "l0") return Method::L0;
  throw ValidationError("unknown method '" + std::string(name) + "' (none|magnitude|random|vd|l0)");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::None: return "none";
    case Method::Magnitude: return "magnitude";
    case Method::Random: return "random";
    case Method::VariationalDropout: return "vd";
    case Method::L0: return "l0";
  }
  return "none";
}

Shape LayerSpec::weight_shape() const {
  if (kind == LayerKind::Dense) return {in, out};
  if (kind == LayerKind::Conv) return {out, in, kernel, kernel};
  return {};
}

std::size_t LayerSpec::weight_count() const {
  return has_weights() ? shape_numel(weight_shape()) : 0;
}

LinearGeometry LayerSpec::geometry() const {
  return kind == LayerKind::Conv ? LinearGeometry::convolution(stride, padding)
                                 : LinearGeometry::dense();
}

namespace {

// Walks the layer stack, reporting each weight layer's output positions.
std::vector<std::size_t> propagate(const ModelSpec& spec) {
  Shape cur = spec.input_dims;
  std::vector<std::size_t> uses;
  for (const auto& l : spec.layers) {
    const std::string where = "layer '" + l.name + "': ";
    switch (l.kind) {
      case LayerKind::Flatten:
        cur = {shape_numel(cur)};
        break;
      case LayerKind::Dense:
        if (cur.size() != 1 || cur[0] != l.in) {
          throw ValidationError(where + "dense fan-in " + std::to_string(l.in) +
                                " does not match incoming " + shape_string(cur));
        }
        cur = {l.out};
        uses.push_back(1);
        break;
      case LayerKind::Conv: {
        if (cur.size() != 3 || cur[0] != l.in) {
          throw ValidationError(where + "conv input channels do not match incoming " +
                                shape_string(cur));
        }
        if (l.kernel == 0 || l.stride == 0 || l.kernel > cur[1] + 2 * l.padding ||
            l.kernel > cur[2] + 2 * l.padding) {
          throw ValidationError(where + "kernel does not fit incoming " + shape_string(cur));
        }
        const std::size_t ho = (cur[1] + 2 * l.padding - l.kernel) / l.stride + 1;
        const std::size_t wo = (cur[2] + 2 * l.padding - l.kernel) / l.stride + 1;
        cur = {l.out, ho, wo};
        uses.push_back(ho * wo);
        break;
      }
      case LayerKind::MaxPool:
        if (cur.size() != 3 || l.window == 0 || l.window > cur[1] || l.window > cur[2]) {
          throw ValidationError(where + "pool window does not fit incoming " + shape_string(cur));
        }
        cur = {cur[0], cur[1] / l.window, cur[2] / l.window};
        break;
    }
  }
  if (cur.size() != 1 || cur[0] != spec.classes) {
    throw ValidationError("model output " + shape_string(cur) + " is not [" +
                          std::to_string(spec.classes) + "]");
  }
  return uses;
}

}  // namespace

void ModelSpec::validate() const { propagate(*this); }

std::size_t ModelSpec::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight_count();
  return n;
}

std::vector<LayerSize> ModelSpec::weight_layers() const {
  std::vector<LayerSize> out;
  for (const auto& l : layers) {
    if (l.has_weights()) out.push_back({l.name, l.weight_count()});
  }
  return out;
}

std::vector<std::size_t> ModelSpec::weight_uses() const { return propagate(*this); }

std::vector<std::size_t> ModelSpec::weight_layer_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_weights()) out.push_back(i);
  }
  return out;
}

ModelSpec build_lenet300() {
  ModelSpec m;
  m.name = "lenet300";
  m.input_dims = {1, 28, 28};
  m.layers = {
      {.name = "flatten", .kind = LayerKind::Flatten},
      {.name = "fc1", .kind = LayerKind::Dense, .in = 784, .out = 300, .relu = true},
      {.name = "fc2", .kind = LayerKind::Dense, .in = 300, .out = 100, .relu = true},
      {.name = "fc3", .kind = LayerKind::Dense, .in = 100, .out = 10},
  };
  m.validate();
  return m;
}

ModelSpec build_lenet5() {
  ModelSpec m;
  m.name = "lenet5";
  m.input_dims = {1, 28, 28};
  m.layers = {
      {.name = "conv1", .kind = LayerKind::Conv, .in = 1, .out = 20, .kernel = 5, .relu = true},
      {.name = "pool1", .kind = LayerKind::MaxPool, .window = 2},
      {.name = "conv2", .kind = LayerKind::Conv, .in = 20, .out = 50, .kernel = 5, .relu = true},
      {.name = "pool2", .kind = LayerKind::MaxPool, .window = 2},
      {.name = "flatten", .kind = LayerKind::Flatten},
      {.name = "fc1", .kind = LayerKind::Dense, .in = 800, .out = 500, .relu = true},
      {.name = "fc2", .kind = LayerKind::Dense, .in = 500, .out = 10},
  };
  m.validate();
  return m;
}

ModelSpec build_model(std::string_view name) {
  if (name == "lenet300") return build_lenet300();
  if (name == "lenet5") return build_lenet5();
  throw ValidationError("unknown model '" + std::string(name) + "' (lenet300|lenet5)");
}

double glorot_limit(const LayerSpec& layer) {
  const double receptive = layer.kind == LayerKind::Conv
                               ? static_cast<double>(layer.kernel * layer.kernel)
                               : 1.0;
  const double fan_in = static_cast<double>(layer.in) * receptive;
  const double fan_out = static_cast<double>(layer.out) * receptive;
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <class T>
std::vector<BasicTensor<T>*> BasicModelState<T>::parameters() {
  std::vector<BasicTensor<T>*> out;
  for (auto& l : layers) {
    if (l.weight.empty()) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (!l.log_sigma2.empty()) out.push_back(&l.log_sigma2);
    if (!l.log_alpha.empty()) out.push_back(&l.log_alpha);
  }
  return out;
}

template <class T>
template <class U>
BasicModelState<U> BasicModelState<T>::cast() const {
  BasicModelState<U> out;
  out.layers.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& src = layers[i];
    auto& dst = out.layers[i];
    if (!src.weight.empty()) dst.weight = src.weight.template cast<U>();
    if (!src.bias.empty()) dst.bias = src.bias.template cast<U>();
    if (!src.log_sigma2.empty()) dst.log_sigma2 = src.log_sigma2.template cast<U>();
    if (!src.log_alpha.empty()) dst.log_alpha = src.log_alpha.template cast<U>();
    dst.mask = src.mask;
  }
  return out;
}

template <class T>
BasicModelState<T> init_model(const ModelSpec& spec, const InitOptions& options, const Rng& rng) {
  spec.validate();
  BasicModelState<T> state;
  state.layers.resize(spec.layers.size());
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerSpec& l = spec.layers[k];
    if (!l.has_weights()) continue;
    auto& p = state.layers[k];
    Rng stream = rng.substream(k);
    const double limit = glorot_limit(l);
    p.weight = BasicTensor<T>(l.weight_shape());
    stream.fill_uniform(p.weight.data(), -limit, limit);
    p.bias = BasicTensor<T>({l.out});
    p.mask = SparsityMask(p.weight.size(), true);
    if (options.method == Method::VariationalDropout) {
      p.log_sigma2 = BasicTensor<T>(l.weight_shape(), static_cast<T>(options.log_sigma2_init));
    } else if (options.method == Method::L0) {
      p.log_alpha = BasicTensor<T>(
          l.weight_shape(), static_cast<T>(log_alpha_for_dropout_rate(options.l0_initial_dropout)));
    }
  }
  return state;
}

namespace {

template <class T>
Var<T> add_bias(const LayerSpec& l, Var<T> y, Var<T> bias) {
  return l.kind == LayerKind::Dense ? ops::add_row_bias(y, bias) : ops::add_channel_bias(y, bias);
}

}  // namespace

template <class T>
Var<T> model_forward(Tape<T>& tape, const ModelSpec& spec, BasicModelState<T>& state,
                     Var<T> input, const ForwardOptions& options, Rng& rng) {
  if (state.layers.size() != spec.layers.size()) {
    throw ValidationError("model state does not match spec '" + spec.name + "'");
  }
  Var<T> x = input;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerSpec& l = spec.layers[k];
    auto& p = state.layers[k];
    switch (l.kind) {
      case LayerKind::Flatten: x = ops::flatten(x); continue;
      case LayerKind::MaxPool: x = ops::maxpool2d(x, l.window); continue;
      default: break;
    }
    const LinearGeometry g = l.geometry();
    Var<T> y;
    switch (options.method) {
      case Method::None:
        y = apply_linear(g, x, tape.param(p.weight));
        break;
      case Method::Magnitude:
      case Method::Random:
        y = apply_linear(g, x, masked_weights(tape, p.weight, p.mask, options.grad_mode));
        break;
      case Method::VariationalDropout:
        if (options.mode == GateMode::Train) {
          y = vd_forward_train(g, x, tape.param(p.weight), tape.param(p.log_sigma2), rng);
        } else {
          y = apply_linear(g, x, tape.param(p.weight));
        }
        break;
      case Method::L0:
        y = l0_forward(g, x, tape.param(p.weight), tape.param(p.log_alpha), options.hc,
                       options.mode, rng);
        break;
    }
    y = add_bias(l, y, tape.param(p.bias));
    x = l.relu ? ops::relu(y) : y;
  }
  return x;
}

template <class T>
Var<T> model_regularizer(Tape<T>& tape, const ModelSpec& spec, BasicModelState<T>& state,
                         Method method, const HardConcreteShape& hc, double vd_log_alpha_clip) {
  Var<T> total = tape.constant(BasicTensor<T>({1}));
  if (method != Method::VariationalDropout && method != Method::L0) return total;
  for (std::size_t k : spec.weight_layer_indices()) {
    auto& p = state.layers[k];
    Var<T> term = method == Method::VariationalDropout
                      ? vd_kl(tape.param(p.weight), tape.param(p.log_sigma2), vd_log_alpha_clip)
                      : hc_expected_l0(tape.param(p.log_alpha), hc);
    total = ops::add(total, term);
  }
  return total;
}

template <class T>
Var<T> model_l0_weight_decay(Tape<T>& tape, const ModelSpec& spec, BasicModelState<T>& state,
                             const HardConcreteShape& hc) {
  Var<T> total = tape.constant(BasicTensor<T>({1}));
  for (std::size_t k : spec.weight_layer_indices()) {
    auto& p = state.layers[k];
    if (p.log_alpha.empty()) continue;
    total = ops::add(total, l0_weight_decay(tape.param(p.weight), tape.param(p.log_alpha), hc));
  }
  return total;
}

template <class T>
std::vector<SparsityMask> test_time_masks(const ModelSpec& spec, const BasicModelState<T>& state,
                                          const TestTimeOptions& options) {
  std::vector<SparsityMask> out;
  for (std::size_t k : spec.weight_layer_indices()) {
    const auto& p = state.layers[k];
    switch (options.method) {
      case Method::Magnitude:
      case Method::Random:
        out.push_back(p.mask);
        break;
      case Method::VariationalDropout: {
        BasicVDLayerParams<T> vd;
        vd.theta = p.weight;
        vd.log_sigma2 = p.log_sigma2;
        out.push_back(vd_prune(vd, options.vd_threshold));
        break;
      }
      case Method::L0:
        out.push_back(hc_test_mask(BasicHardConcreteParams<T>{p.log_alpha, options.hc}));
        break;
      case Method::None: {
        SparsityMask m(p.weight.size(), true);
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (p.weight[i] == T{0}) m.set(i, false);
        }
        out.push_back(std::move(m));
        break;
      }
    }
  }
  return out;
}

template <class T>
BasicModelState<T> effective_state(const ModelSpec& spec, const BasicModelState<T>& state,
                                   const TestTimeOptions& options) {
  BasicModelState<T> out;
  out.layers.resize(state.layers.size());
  const auto masks = test_time_masks(spec, state, options);
  const auto indices = spec.weight_layer_indices();
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& src = state.layers[indices[j]];
    auto& dst = out.layers[indices[j]];
    dst.weight = src.weight;
    dst.weight.drop_grad();
    dst.bias = src.bias;
    dst.bias.drop_grad();
    if (options.method == Method::L0) {
      const BasicTensor<T> gate = hc_test_gate(BasicHardConcreteParams<T>{src.log_alpha, options.hc});
      for (std::size_t i = 0; i < gate.size(); ++i) dst.weight[i] *= gate[i];
    }
    masks[j].apply(dst.weight.data());
    dst.mask = SparsityMask(dst.weight.size(), true);
  }
  return out;
}

template <class T>
Var<T> dense_forward(Tape<T>& tape, const ModelSpec& spec, const BasicModelState<T>& state,
                     Var<T> input) {
  Var<T> x = input;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerSpec& l = spec.layers[k];
    const auto& p = state.layers[k];
    switch (l.kind) {
      case LayerKind::Flatten: x = ops::flatten(x); continue;
      case LayerKind::MaxPool: x = ops::maxpool2d(x, l.window); continue;
      default: break;
    }
    Var<T> y = apply_linear(l.geometry(), x, tape.constant_ref(p.weight));
    y = add_bias(l, y, tape.constant_ref(p.bias));
    x = l.relu ? ops::relu(y) : y;
  }
  return x;
}

#define SPARSEKIT_INSTANTIATE(T)                                                                 \
  template struct BasicModelState<T>;                                                            \
  template BasicModelState<T> init_model<T>(const ModelSpec&, const InitOptions&, const Rng&);   \
  template Var<T> model_forward<T>(Tape<T>&, const ModelSpec&, BasicModelState<T>&, Var<T>,      \
                                   const ForwardOptions&, Rng&);                                 \
  template Var<T> model_regularizer<T>(Tape<T>&, const ModelSpec&, BasicModelState<T>&, Method,  \
                                       const HardConcreteShape&, double);                        \
  template Var<T> model_l0_weight_decay<T>(Tape<T>&, const ModelSpec&, BasicModelState<T>&,      \
                                           const HardConcreteShape&);                            \
  template std::vector<SparsityMask> test_time_masks<T>(const ModelSpec&,                        \
                                                        const BasicModelState<T>&,               \
                                                        const TestTimeOptions&);                 \
  template BasicModelState<T> effective_state<T>(const ModelSpec&, const BasicModelState<T>&,    \
                                                 const TestTimeOptions&);                        \
  template Var<T> dense_forward<T>(Tape<T>&, const ModelSpec&, const BasicModelState<T>&, Var<T>);

SPARSEKIT_INSTANTIATE(float)
SPARSEKIT_INSTANTIATE(double)
#undef SPARSEKIT_INSTANTIATE

template BasicModelState<double> BasicModelState<float>::cast<double>() const;
template BasicModelState<float> BasicModelState<double>::cast<float>() const;

}  // namespace sparsekit
