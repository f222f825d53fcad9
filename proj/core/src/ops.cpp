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

#include "sparsekit/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace sparsekit {

std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

namespace ops {
namespace {

template <class T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ValidationError(std::string(op) + ": expected rank " + std::to_string(rank) +
                          " input, got " + shape_string(t.dims()));
  }
}

template <class T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) +
                          " vs " + shape_string(b.dims()));
  }
}

// Elementwise unary op with derivative expressed through (x, y).
template <class T, class Fwd, class Deriv>
Var<T> unary(const char* name, Var<T> x, Fwd fwd, Deriv deriv) {
  Tape<T>& tape = *x.tape;
  const auto& in = x.value();
  BasicTensor<T> out(in.dims());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return tape.record(name, std::move(out), {x}, [ix = x.id, deriv](Tape<T>& t, std::size_t self) {
    const auto& xin = t.value(ix);
    const auto& y = t.value(self);
    auto g = t.grad(self);
    auto gx = t.grad(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * deriv(xin[i], y[i]);
  });
}

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, ho, wo;
  std::size_t col_rows() const { return c * kh * kw; }
  std::size_t col_cols() const { return ho * wo; }
};

template <class T>
void im2col(const T* img, const ConvDims& d, Conv2dGeometry g, T* col, std::size_t ld) {
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        T* row = col + ((c * d.kh + ki) * d.kw + kj) * ld;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(d.h) &&
                                ix < static_cast<std::ptrdiff_t>(d.w);
            row[oy * d.wo + ox] = inside ? img[(c * d.h + iy) * d.w + ix] : T{0};
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, const ConvDims& d, Conv2dGeometry g, T* img, std::size_t ld) {
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const T* row = col + ((c * d.kh + ki) * d.kw + kj) * ld;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
            img[(c * d.h + iy) * d.w + ix] += row[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <>
void gemm<float>(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
                 const float* a, const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c,
              static_cast<int>(n));
}

template <>
void gemm<double>(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c,
              static_cast<int>(n));
}

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require_rank(A, 2, "matmul");
  require_rank(B, 2, "matmul");
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k) {
    throw ValidationError("matmul: inner dims differ " + shape_string(A.dims()) + " x " +
                          shape_string(B.dims()));
  }
  BasicTensor<T> out({m, n});
  gemm<T>(false, false, m, n, k, T{1}, A.raw(), B.raw(), T{0}, out.raw());
  return a.tape->record("matmul", std::move(out), {a, b},
                        [ia = a.id, ib = b.id, m, k, n](Tape<T>& t, std::size_t self) {
                          const T* g = t.grad(self).data();
                          if (t.requires_grad(ia)) {
                            gemm<T>(false, true, m, k, n, T{1}, g, t.value(ib).raw(), T{1},
                                    t.grad(ia).data());
                          }
                          if (t.requires_grad(ib)) {
                            gemm<T>(true, false, k, n, m, T{1}, t.value(ia).raw(), g, T{1},
                                    t.grad(ib).data());
                          }
                        });
}

template <class T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Conv2dGeometry geom) {
  const auto& X = input.value();
  const auto& K = kernel.value();
  require_rank(X, 4, "conv2d");
  require_rank(K, 4, "conv2d");
  if (geom.stride == 0) throw ValidationError("conv2d: stride must be positive");
  ConvDims d{};
  d.n = X.dim(0);
  d.c = X.dim(1);
  d.h = X.dim(2);
  d.w = X.dim(3);
  d.f = K.dim(0);
  d.kh = K.dim(2);
  d.kw = K.dim(3);
  if (K.dim(1) != d.c) {
    throw ValidationError("conv2d: kernel channels " + std::to_string(K.dim(1)) +
                          " != input channels " + std::to_string(d.c));
  }
  if (d.kh > d.h + 2 * geom.padding || d.kw > d.w + 2 * geom.padding) {
    throw ValidationError("conv2d: kernel " + shape_string(K.dims()) +
                          " larger than padded input " + shape_string(X.dims()));
  }
  d.ho = (d.h + 2 * geom.padding - d.kh) / geom.stride + 1;
  d.wo = (d.w + 2 * geom.padding - d.kw) / geom.stride + 1;

  // One GEMM for the whole batch: col is [rows x (n * cols)], sample s
  // occupying columns [s * cols, (s + 1) * cols).
  const std::size_t rows = d.col_rows(), cols = d.col_cols(), ld = d.n * cols;
  auto col = std::make_shared<std::vector<T>>(rows * ld);
  for (std::size_t s = 0; s < d.n; ++s) im2col(X.raw() + s * d.c * d.h * d.w, d, geom, col->data() + s * cols, ld);
  std::vector<T> tmp(d.f * ld);
  gemm<T>(false, false, d.f, ld, rows, T{1}, K.raw(), col->data(), T{0}, tmp.data());
  BasicTensor<T> out({d.n, d.f, d.ho, d.wo});
  for (std::size_t s = 0; s < d.n; ++s) {
    for (std::size_t o = 0; o < d.f; ++o) {
      std::copy_n(tmp.data() + o * ld + s * cols, cols, out.raw() + (s * d.f + o) * cols);
    }
  }
  return input.tape->record(
      "conv2d", std::move(out), {input, kernel},
      [ix = input.id, ik = kernel.id, d, geom, col](Tape<T>& t, std::size_t self) {
        const std::size_t rows = d.col_rows(), cols = d.col_cols(), ld = d.n * cols;
        const T* g = t.grad(self).data();
        std::vector<T> gt(d.f * ld);  // upstream grad as [f x (n * cols)]
        for (std::size_t s = 0; s < d.n; ++s) {
          for (std::size_t o = 0; o < d.f; ++o) {
            std::copy_n(g + (s * d.f + o) * cols, cols, gt.data() + o * ld + s * cols);
          }
        }
        if (t.requires_grad(ik)) {
          gemm<T>(false, true, d.f, rows, ld, T{1}, gt.data(), col->data(), T{1}, t.grad(ik).data());
        }
        if (t.requires_grad(ix)) {
          T* gx = t.grad(ix).data();
          std::vector<T> dcol(rows * ld);
          gemm<T>(true, false, rows, ld, d.f, T{1}, t.value(ik).raw(), gt.data(), T{0}, dcol.data());
          for (std::size_t s = 0; s < d.n; ++s) {
            col2im(dcol.data() + s * cols, d, geom, gx + s * d.c * d.h * d.w, ld);
          }
        }
      });
}

template <class T>
Var<T> maxpool2d(Var<T> input, std::size_t window) {
  const auto& X = input.value();
  require_rank(X, 4, "maxpool2d");
  const std::size_t n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
  if (window == 0 || window > h || window > w) {
    throw ValidationError("maxpool2d: window " + std::to_string(window) + " does not fit " +
                          shape_string(X.dims()));
  }
  const std::size_t ho = h / window, wo = w / window;
  BasicTensor<T> out({n, c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* src = X.raw() + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++o) {
        std::size_t best = (oy * window) * w + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (oy * window + dy) * w + ox * window + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        out[o] = src[best];
        (*argmax)[o] = plane * h * w + best;
      }
    }
  }
  return input.tape->record("maxpool2d", std::move(out), {input},
                            [ix = input.id, argmax](Tape<T>& t, std::size_t self) {
                              auto g = t.grad(self);
                              auto gx = t.grad(ix);
                              for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
                            });
}

template <class T>
Var<T> add_row_bias(Var<T> x, Var<T> bias) {
  const auto& X = x.value();
  const auto& B = bias.value();
  require_rank(X, 2, "add_row_bias");
  const std::size_t m = X.dim(0), n = X.dim(1);
  if (B.size() != n) throw ValidationError("add_row_bias: bias length mismatch");
  BasicTensor<T> out = X;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += B[j];
  }
  out.drop_grad();
  return x.tape->record("add_row_bias", std::move(out), {x, bias},
                        [ix = x.id, ib = bias.id, m, n](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          if (t.requires_grad(ix)) {
                            auto gx = t.grad(ix);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (t.requires_grad(ib)) {
                            auto gb = t.grad(ib);
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                            }
                          }
                        });
}

template <class T>
Var<T> add_channel_bias(Var<T> x, Var<T> bias) {
  const auto& X = x.value();
  const auto& B = bias.value();
  require_rank(X, 4, "add_channel_bias");
  const std::size_t n = X.dim(0), c = X.dim(1), hw = X.dim(2) * X.dim(3);
  if (B.size() != c) throw ValidationError("add_channel_bias: bias length mismatch");
  BasicTensor<T> out = X;
  out.drop_grad();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* p = out.raw() + (s * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) p[i] += B[ch];
    }
  }
  return x.tape->record("add_channel_bias", std::move(out), {x, bias},
                        [ix = x.id, ib = bias.id, n, c, hw](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          if (t.requires_grad(ix)) {
                            auto gx = t.grad(ix);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (t.requires_grad(ib)) {
                            auto gb = t.grad(ib);
                            for (std::size_t s = 0; s < n; ++s) {
                              for (std::size_t ch = 0; ch < c; ++ch) {
                                const T* p = g.data() + (s * c + ch) * hw;
                                double acc = 0;
                                for (std::size_t i = 0; i < hw; ++i) acc += p[i];
                                gb[ch] += static_cast<T>(acc);
                              }
                            }
                          }
                        });
}

template <class T>
Var<T> flatten(Var<T> x) {
  const auto& X = x.value();
  if (X.rank() < 2) throw ValidationError("flatten: need a batch axis");
  BasicTensor<T> out({X.dim(0), X.size() / X.dim(0)},
                     std::vector<T>(X.data().begin(), X.data().end()));
  return x.tape->record("flatten", std::move(out), {x}, [ix = x.id](Tape<T>& t, std::size_t self) {
    auto g = t.grad(self);
    auto gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <class T>
Var<T> relu(Var<T> x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <class T>
Var<T> square(Var<T> x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <class T>
Var<T> exp(Var<T> x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Var<T> sqrt_eps(Var<T> x, double eps) {
  const T e = static_cast<T>(eps);
  return unary<T>(
      "sqrt_eps", x, [e](T v) { return std::sqrt(v + e); },
      [](T, T y) { return T{0.5} / y; });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require_same_shape(A, B, "add");
  BasicTensor<T> out(A.dims());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return a.tape->record("add", std::move(out), {a, b},
                        [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          for (std::size_t id : {ia, ib}) {
                            if (!t.requires_grad(id)) continue;
                            auto gx = t.grad(id);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                        });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  require_same_shape(A, B, "mul");
  BasicTensor<T> out(A.dims());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return a.tape->record("mul", std::move(out), {a, b},
                        [ia = a.id, ib = b.id](Tape<T>& t, std::size_t self) {
                          auto g = t.grad(self);
                          if (t.requires_grad(ia)) {
                            auto gx = t.grad(ia);
                            const auto& other = t.value(ib);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * other[i];
                          }
                          if (t.requires_grad(ib)) {
                            auto gx = t.grad(ib);
                            const auto& other = t.value(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * other[i];
                          }
                        });
}

template <class T>
Var<T> scale(Var<T> x, double factor) {
  const T f = static_cast<T>(factor);
  return unary<T>(
      "scale", x, [f](T v) { return f * v; }, [f](T, T) { return f; });
}

template <class T>
Var<T> sum(Var<T> x) {
  double acc = 0;
  for (T v : x.value().data()) acc += v;
  BasicTensor<T> out({1}, static_cast<T>(acc));
  return x.tape->record("sum", std::move(out), {x}, [ix = x.id](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (T& v : t.grad(ix)) v += g;
  });
}

template <class T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::int32_t> labels) {
  const auto& L = logits.value();
  require_rank(L, 2, "softmax_cross_entropy");
  const std::size_t n = L.dim(0), c = L.dim(1);
  if (labels.size() != n) throw ValidationError("softmax_cross_entropy: label count mismatch");
  auto probs = std::make_shared<std::vector<T>>(n * c);
  auto lab = std::make_shared<std::vector<std::int32_t>>(labels.begin(), labels.end());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ValidationError("softmax_cross_entropy: label out of range");
    }
    const T* row = L.raw() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) {
      (*probs)[i * c + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - lse));
    }
    total += lse - static_cast<double>(row[y]);
  }
  BasicTensor<T> out({1}, static_cast<T>(total / static_cast<double>(n)));
  return logits.tape->record(
      "softmax_cross_entropy", std::move(out), {logits},
      [il = logits.id, probs, lab, n, c](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0] / static_cast<T>(n);
        auto gl = t.grad(il);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const T onehot = static_cast<std::size_t>((*lab)[i]) == j ? T{1} : T{0};
            gl[i * c + j] += g * ((*probs)[i * c + j] - onehot);
          }
        }
      });
}

template <class T>
std::size_t count_correct(const BasicTensor<T>& logits, std::span<const std::int32_t> labels) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.raw() + i * c;
    const auto best = static_cast<std::int32_t>(std::max_element(row, row + c) - row);
    if (best == labels[i]) ++correct;
  }
  return correct;
}

#define SPARSEKIT_INSTANTIATE_OPS(T)                                                 \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                          \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Conv2dGeometry);                          \
  template Var<T> maxpool2d<T>(Var<T>, std::size_t);                                  \
  template Var<T> add_row_bias<T>(Var<T>, Var<T>);                                    \
  template Var<T> add_channel_bias<T>(Var<T>, Var<T>);                                \
  template Var<T> flatten<T>(Var<T>);                                                 \
  template Var<T> relu<T>(Var<T>);                                                    \
  template Var<T> square<T>(Var<T>);                                                  \
  template Var<T> exp<T>(Var<T>);                                                     \
  template Var<T> sqrt_eps<T>(Var<T>, double);                                        \
  template Var<T> add<T>(Var<T>, Var<T>);                                             \
  template Var<T> mul<T>(Var<T>, Var<T>);                                             \
  template Var<T> scale<T>(Var<T>, double);                                           \
  template Var<T> sum<T>(Var<T>);                                                     \
  template Var<T> softmax_cross_entropy<T>(Var<T>, std::span<const std::int32_t>);    \
  template std::size_t count_correct<T>(const BasicTensor<T>&, std::span<const std::int32_t>);

SPARSEKIT_INSTANTIATE_OPS(float)
SPARSEKIT_INSTANTIATE_OPS(double)

#undef SPARSEKIT_INSTANTIATE_OPS

}  // namespace ops
}  // namespace sparsekit
