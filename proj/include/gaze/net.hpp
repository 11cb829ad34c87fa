#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <variant>
#include <vector>

#include "gaze/composer.hpp"
#include "gaze/error.hpp"
#include "gaze/image.hpp"
#include "gaze/rng.hpp"
#include "gaze/tensor.hpp"

namespace gaze {

// LeNet-variant building blocks. Convolutions are valid (no padding), pooling
// records argmax positions for exact gradient routing, dropout is inverted
// (scaled at train time), and the output layer fuses a fully connected map
// with softmax.

struct ConvSpec {
  int filters = 0;
  int kernel = 0;
  int stride = 1;
};
struct MaxPoolSpec {
  int size = 0;
  int stride = 0;
};
struct ReluSpec {};
struct DropoutSpec {
  float p = 0.5f;
};
struct FcSpec {
  int units = 0;
};
struct SoftmaxOutSpec {
  int classes = 0;
};

using LayerSpec = std::variant<ConvSpec, MaxPoolSpec, ReluSpec, DropoutSpec, FcSpec, SoftmaxOutSpec>;

struct Shape3 {
  int c = 0, h = 0, w = 0;
  long long count() const { return static_cast<long long>(c) * h * w; }
  bool operator==(const Shape3&) const = default;
};

struct NetworkSpec {
  Shape3 input{1, 72, 72};
  std::vector<LayerSpec> layers;
};

// Output shape of every layer; index 0 is the input shape. Throws ShapeError
// when the chain does not fit together.
inline std::vector<Shape3> chain_shapes(const NetworkSpec& spec) {
  std::vector<Shape3> shapes{spec.input};
  if (spec.input.c < 1 || spec.input.h < 1 || spec.input.w < 1)
    throw ShapeError("network input shape must be positive");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape3 in = shapes.back();
    const LayerSpec& layer = spec.layers[i];
    Shape3 out = in;
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      if (conv->filters < 1 || conv->kernel < 1 || conv->stride < 1)
        throw ShapeError("conv layer " + std::to_string(i) + ": bad parameters");
      if (in.h < conv->kernel || in.w < conv->kernel)
        throw ShapeError("conv layer " + std::to_string(i) + ": kernel larger than input");
      out = {conv->filters, (in.h - conv->kernel) / conv->stride + 1,
             (in.w - conv->kernel) / conv->stride + 1};
    } else if (const auto* pool = std::get_if<MaxPoolSpec>(&layer)) {
      if (pool->size < 1 || pool->stride < 1)
        throw ShapeError("pool layer " + std::to_string(i) + ": bad parameters");
      if (in.h < pool->size || in.w < pool->size)
        throw ShapeError("pool layer " + std::to_string(i) + ": window larger than input");
      out = {in.c, (in.h - pool->size) / pool->stride + 1, (in.w - pool->size) / pool->stride + 1};
    } else if (std::holds_alternative<ReluSpec>(layer)) {
      // shape preserved
    } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
      if (!(drop->p >= 0.0f && drop->p < 1.0f))
        throw ShapeError("dropout layer " + std::to_string(i) + ": p must be in [0,1)");
    } else if (const auto* fc = std::get_if<FcSpec>(&layer)) {
      if (fc->units < 1) throw ShapeError("fc layer " + std::to_string(i) + ": bad units");
      out = {fc->units, 1, 1};
    } else if (const auto* sm = std::get_if<SoftmaxOutSpec>(&layer)) {
      if (sm->classes < 2) throw ShapeError("softmax layer " + std::to_string(i) + ": bad classes");
      out = {sm->classes, 1, 1};
    }
    shapes.push_back(out);
  }
  return shapes;
}

// Stricter check used before building state: the chain must end in a 2- or
// 3-way softmax output and contain no softmax elsewhere.
inline void validate_spec(const NetworkSpec& spec) {
  chain_shapes(spec);
  if (spec.layers.empty() || !std::holds_alternative<SoftmaxOutSpec>(spec.layers.back()))
    throw ShapeError("network must end with a softmax output layer");
  const int classes = std::get<SoftmaxOutSpec>(spec.layers.back()).classes;
  if (classes != 2 && classes != 3) throw ShapeError("softmax output must have 2 or 3 classes");
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i)
    if (std::holds_alternative<SoftmaxOutSpec>(spec.layers[i]))
      throw ShapeError("softmax output must be the final layer");
}

inline int output_classes(const NetworkSpec& spec) {
  validate_spec(spec);
  return std::get<SoftmaxOutSpec>(spec.layers.back()).classes;
}

inline long long param_count(const NetworkSpec& spec) {
  const auto shapes = chain_shapes(spec);
  long long total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape3 in = shapes[i];
    if (const auto* conv = std::get_if<ConvSpec>(&spec.layers[i])) {
      total += static_cast<long long>(conv->filters) *
               (static_cast<long long>(in.c) * conv->kernel * conv->kernel + 1);
    } else if (const auto* fc = std::get_if<FcSpec>(&spec.layers[i])) {
      total += in.count() * fc->units + fc->units;
    } else if (const auto* sm = std::get_if<SoftmaxOutSpec>(&spec.layers[i])) {
      total += in.count() * sm->classes + sm->classes;
    }
  }
  return total;
}

// The pipeline's network: two 5x5 conv + relu + 3x3/3 pool blocks, dropout,
// a 120-unit fully connected layer and the class softmax. On 72x72 input the
// feature chain is 68x68x6 -> 22x22x6 -> 18x18x14 -> 6x6x14 -> 120 -> classes,
// 63,233 learnable parameters for 3 classes.
inline NetworkSpec reference_spec(int classes, float dropout_p = 0.5f) {
  if (classes != 2 && classes != 3) throw ArgumentError("reference spec supports 2 or 3 classes");
  NetworkSpec spec;
  spec.input = {1, 72, 72};
  spec.layers = {ConvSpec{6, 5, 1},  ReluSpec{}, MaxPoolSpec{3, 3},
                 ConvSpec{14, 5, 1}, ReluSpec{}, MaxPoolSpec{3, 3},
                 DropoutSpec{dropout_p}, FcSpec{120}, ReluSpec{},
                 SoftmaxOutSpec{classes}};
  return spec;
}

template <typename T>
struct ParamBlock {
  std::vector<T> w, b;    // weights and biases
  std::vector<T> vw, vb;  // momentum buffers, same shapes
};

template <typename T>
struct NetworkState {
  NetworkSpec spec;
  std::vector<ParamBlock<T>> params;  // aligned with spec.layers
  std::uint64_t seed = 0;
};

namespace detail {

struct LearnableDims {
  bool learnable = false;
  int kind = 0;  // 1 = conv, 2 = fc, 3 = softmax out
  std::vector<int> wdims;
  int bias = 0;
};

inline LearnableDims learnable_dims(const LayerSpec& layer, const Shape3& in) {
  LearnableDims d;
  if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
    d = {true, 1, {conv->filters, in.c, conv->kernel, conv->kernel}, conv->filters};
  } else if (const auto* fc = std::get_if<FcSpec>(&layer)) {
    d = {true, 2, {static_cast<int>(in.count()), fc->units}, fc->units};
  } else if (const auto* sm = std::get_if<SoftmaxOutSpec>(&layer)) {
    d = {true, 3, {static_cast<int>(in.count()), sm->classes}, sm->classes};
  }
  return d;
}

inline long long dims_product(const std::vector<int>& dims) {
  long long p = 1;
  for (int d : dims) p *= d;
  return p;
}

}  // namespace detail

// Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases, drawn
// in layer order so a seed pins every parameter.
template <typename T>
NetworkState<T> init_state(const NetworkSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  const auto shapes = chain_shapes(spec);
  NetworkState<T> state;
  state.spec = spec;
  state.seed = seed;
  state.params.resize(spec.layers.size());
  Rng rng(derive_seed(seed, 0x696e6974ULL));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto d = detail::learnable_dims(spec.layers[i], shapes[i]);
    if (!d.learnable) continue;
    double fan_in = 0, fan_out = 0;
    if (d.kind == 1) {
      fan_in = static_cast<double>(d.wdims[1]) * d.wdims[2] * d.wdims[3];
      fan_out = static_cast<double>(d.wdims[0]) * d.wdims[2] * d.wdims[3];
    } else {
      fan_in = d.wdims[0];
      fan_out = d.wdims[1];
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    ParamBlock<T>& p = state.params[i];
    p.w.resize(static_cast<std::size_t>(detail::dims_product(d.wdims)));
    for (T& w : p.w) w = static_cast<T>((2.0 * rng.next_unit() - 1.0) * limit);
    p.b.assign(static_cast<std::size_t>(d.bias), T(0));
    p.vw.assign(p.w.size(), T(0));
    p.vb.assign(p.b.size(), T(0));
  }
  return state;
}

enum class RunMode { train, infer };

// Counter-based dropout source: the mask depends only on (seed, step, slot,
// unit), so it is independent of how a batch is split across lanes.
struct DropoutRng {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t slot_base = 0;  // absolute batch slot of tensor row 0

  bool keep(std::uint64_t slot, std::uint64_t unit, double p) const {
    std::uint64_t h = splitmix64(seed ^ 0x64726f70ULL);
    h = splitmix64(h ^ step);
    h = splitmix64(h ^ (slot_base + slot));
    h = splitmix64(h ^ unit);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u >= p;
  }
};

template <typename T>
struct LayerCacheEntry {
  Tensor<T> input;                   // activation entering this layer
  std::vector<std::int32_t> argmax;  // maxpool: winning input offset per output
  std::vector<std::uint8_t> mask;    // dropout keep flags
};

template <typename T>
struct Forward {
  Tensor<T> probs;
  std::vector<LayerCacheEntry<T>> layers;  // populated in train mode only
  RunMode mode = RunMode::infer;
};

namespace detail {

// GEMM tile width in elements; sized so one tile per filter fits in L1.
inline constexpr std::size_t kConvTile = 1024;

// Unrolled patch matrix for stride-1 convolution: row (ic, ky, kx) holds the
// input window contents over all (oy, ox). Long contiguous rows keep the
// axpy/dot kernels out of their prologue/epilogue overhead.
template <typename T>
void im2col(const T* in, int channels, int ih, int iw, int k, int oh, int ow,
            std::vector<T>& col) {
  col.resize(static_cast<std::size_t>(channels) * k * k * oh * ow);
  T* dst = col.data();
  for (int ic = 0; ic < channels; ++ic)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx)
        for (int oy = 0; oy < oh; ++oy) {
          const T* src = in + (static_cast<std::size_t>(ic) * ih + oy + ky) * iw + kx;
          std::copy(src, src + ow, dst);
          dst += ow;
        }
}

template <typename T>
void conv_forward(const Tensor<T>& in, const ConvSpec& spec, const std::vector<T>& w,
                  const std::vector<T>& b, Tensor<T>& out) {
  const int k = spec.kernel, s = spec.stride;
  const int oh = out.h, ow = out.w, iw = in.w;
  if (s == 1) {
    const int kdim = in.c * k * k;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    std::vector<T> col;
    for (int bi = 0; bi < in.n; ++bi) {
      im2col(in.plane(bi, 0), in.c, in.h, iw, k, oh, ow, col);
      for (int oc = 0; oc < spec.filters; ++oc) {
        T* out_plane = out.plane(bi, oc);
        std::fill(out_plane, out_plane + ohw, b[oc]);
      }
      // tiles keep all filter slices cache-resident; per-output accumulation
      // order is still kk-ascending
      for (std::size_t t0 = 0; t0 < ohw; t0 += kConvTile) {
        const int len = static_cast<int>(std::min(kConvTile, ohw - t0));
        for (int kk = 0; kk < kdim; ++kk) {
          const T* crow = col.data() + kk * ohw + t0;
          for (int oc = 0; oc < spec.filters; ++oc)
            axpy(out.plane(bi, oc) + t0, crow, w[static_cast<std::size_t>(oc) * kdim + kk], len);
        }
      }
    }
    return;
  }
  for (int bi = 0; bi < in.n; ++bi) {
    for (int oc = 0; oc < spec.filters; ++oc) {
      T* out_plane = out.plane(bi, oc);
      std::fill(out_plane, out_plane + static_cast<std::size_t>(oh) * ow, b[oc]);
      for (int ic = 0; ic < in.c; ++ic) {
        const T* in_plane = in.plane(bi, ic);
        const T* wk = w.data() + (static_cast<std::size_t>(oc) * in.c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = wk[ky * k + kx];
            for (int oy = 0; oy < oh; ++oy) {
              const T* src = in_plane + static_cast<std::size_t>(oy * s + ky) * iw + kx;
              T* dst = out_plane + static_cast<std::size_t>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) dst[ox] += wv * src[ox * s];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const Tensor<T>& in, const ConvSpec& spec, const std::vector<T>& w,
                   const Tensor<T>& dout, Tensor<T>& din, std::vector<T>& gw, std::vector<T>& gb) {
  const int k = spec.kernel, s = spec.stride;
  const int oh = dout.h, ow = dout.w, iw = in.w;

  // bias gradients: pinned row-major accumulation
  for (int bi = 0; bi < in.n; ++bi) {
    for (int oc = 0; oc < spec.filters; ++oc) {
      const T* dout_plane = dout.plane(bi, oc);
      T acc = 0;
      for (int oy = 0; oy < oh; ++oy) {
        const T* r = dout_plane + static_cast<std::size_t>(oy) * ow;
        T rs0 = 0, rs1 = 0;
        int ox = 0;
        for (; ox + 2 <= ow; ox += 2) {
          rs0 += r[ox];
          rs1 += r[ox + 1];
        }
        if (ox < ow) rs0 += r[ox];
        acc += rs0 + rs1;
      }
      gb[oc] += acc;
    }
  }

  if (s == 1) {
    const int kdim = in.c * k * k;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    std::vector<T> col, colgrad(static_cast<std::size_t>(kdim) * ohw);
    for (int bi = 0; bi < in.n; ++bi) {
      im2col(in.plane(bi, 0), in.c, in.h, iw, k, oh, ow, col);
      std::fill(colgrad.begin(), colgrad.end(), T(0));
      for (std::size_t t0 = 0; t0 < ohw; t0 += kConvTile) {
        const int len = static_cast<int>(std::min(kConvTile, ohw - t0));
        for (int kk = 0; kk < kdim; ++kk) {
          const T* crow = col.data() + kk * ohw + t0;
          T* crow_grad = colgrad.data() + kk * ohw + t0;
          for (int oc = 0; oc < spec.filters; ++oc)
            gw[static_cast<std::size_t>(oc) * kdim + kk] +=
                dot_axpy(crow, dout.plane(bi, oc) + t0, crow_grad,
                         w[static_cast<std::size_t>(oc) * kdim + kk], len);
        }
      }
      // col2im scatter in (ic, ky, kx, oy) order
      T* din_base = din.plane(bi, 0);
      const T* src = colgrad.data();
      for (int ic = 0; ic < in.c; ++ic)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            for (int oy = 0; oy < oh; ++oy) {
              axpy(din_base + (static_cast<std::size_t>(ic) * in.h + oy + ky) * iw + kx, src,
                   T(1), ow);
              src += ow;
            }
    }
    return;
  }

  for (int bi = 0; bi < in.n; ++bi) {
    for (int oc = 0; oc < spec.filters; ++oc) {
      const T* dout_plane = dout.plane(bi, oc);
      for (int ic = 0; ic < in.c; ++ic) {
        const T* in_plane = in.plane(bi, ic);
        T* din_plane = din.plane(bi, ic);
        const std::size_t wbase = (static_cast<std::size_t>(oc) * in.c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = w[wbase + ky * k + kx];
            T grad = 0;
            for (int oy = 0; oy < oh; ++oy) {
              const T* src = in_plane + static_cast<std::size_t>(oy * s + ky) * iw + kx;
              T* dd = din_plane + static_cast<std::size_t>(oy * s + ky) * iw + kx;
              const T* dr = dout_plane + static_cast<std::size_t>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) {
                grad += src[ox * s] * dr[ox];
                dd[ox * s] += wv * dr[ox];
              }
            }
            gw[wbase + ky * k + kx] += grad;
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool_forward(const Tensor<T>& in, const MaxPoolSpec& spec, Tensor<T>& out,
                     std::vector<std::int32_t>* argmax) {
  const int size = spec.size, stride = spec.stride;
  for (int bi = 0; bi < in.n; ++bi) {
    for (int ci = 0; ci < in.c; ++ci) {
      const T* src = in.plane(bi, ci);
      T* dst = out.plane(bi, ci);
      std::int32_t* am =
          argmax ? argmax->data() + (static_cast<std::size_t>(bi) * in.c + ci) * out.h * out.w
                 : nullptr;
      for (int oy = 0; oy < out.h; ++oy) {
        for (int ox = 0; ox < out.w; ++ox) {
          const int iy0 = oy * stride, ix0 = ox * stride;
          T best = src[static_cast<std::size_t>(iy0) * in.w + ix0];
          std::int32_t best_off = iy0 * in.w + ix0;
          for (int dy = 0; dy < size; ++dy) {
            for (int dx = 0; dx < size; ++dx) {
              const std::int32_t off = (iy0 + dy) * in.w + (ix0 + dx);
              const T v = src[off];
              if (v > best) {  // first max wins
                best = v;
                best_off = off;
              }
            }
          }
          dst[static_cast<std::size_t>(oy) * out.w + ox] = best;
          if (am) am[static_cast<std::size_t>(oy) * out.w + ox] = best_off;
        }
      }
    }
  }
}

template <typename T>
void fc_forward(const Tensor<T>& in, int units, const std::vector<T>& w, const std::vector<T>& b,
                Tensor<T>& out) {
  const int features = in.features();
  for (int bi = 0; bi < in.n; ++bi) {
    const T* x = in.row(bi);
    T* y = out.row(bi);
    std::copy(b.begin(), b.end(), y);
    for (int i = 0; i < features; ++i)
      axpy(y, w.data() + static_cast<std::size_t>(i) * units, x[i], units);
  }
}

template <typename T>
void fc_backward(const Tensor<T>& in, int units, const std::vector<T>& w, const Tensor<T>& dout,
                 Tensor<T>& din, std::vector<T>& gw, std::vector<T>& gb) {
  const int features = in.features();
  for (int bi = 0; bi < in.n; ++bi) {
    const T* x = in.row(bi);
    const T* dy = dout.row(bi);
    T* dx = din.row(bi);
    for (int o = 0; o < units; ++o) gb[o] += dy[o];
    for (int i = 0; i < features; ++i) {
      const T* wrow = w.data() + static_cast<std::size_t>(i) * units;
      dx[i] = dot4(wrow, dy, units);
      axpy(gw.data() + static_cast<std::size_t>(i) * units, dy, x[i], units);
    }
  }
}

template <typename T>
void softmax_rows(Tensor<T>& t) {
  const int classes = t.features();
  for (int bi = 0; bi < t.n; ++bi) {
    T* row = t.row(bi);
    T m = row[0];
    for (int i = 1; i < classes; ++i) m = std::max(m, row[i]);
    T sum = 0;
    for (int i = 0; i < classes; ++i) {
      row[i] = std::exp(row[i] - m);
      sum += row[i];
    }
    for (int i = 0; i < classes; ++i) row[i] /= sum;
  }
}

}  // namespace detail

template <typename T>
Forward<T> forward(const NetworkState<T>& state, const Tensor<T>& batch, RunMode mode,
                   DropoutRng drng = {}) {
  const auto shapes = chain_shapes(state.spec);
  if (Shape3{batch.c, batch.h, batch.w} != shapes[0])
    throw ShapeError("batch shape does not match network input");
  const bool train = mode == RunMode::train;

  Forward<T> result;
  result.mode = mode;
  if (train) result.layers.resize(state.spec.layers.size());

  Tensor<T> cur = batch;
  for (std::size_t i = 0; i < state.spec.layers.size(); ++i) {
    const LayerSpec& layer = state.spec.layers[i];
    const Shape3 out_shape = shapes[i + 1];
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      Tensor<T> out(cur.n, out_shape.c, out_shape.h, out_shape.w);
      detail::conv_forward(cur, *conv, state.params[i].w, state.params[i].b, out);
      if (train) result.layers[i].input = std::move(cur);
      cur = std::move(out);
    } else if (const auto* pool = std::get_if<MaxPoolSpec>(&layer)) {
      Tensor<T> out(cur.n, out_shape.c, out_shape.h, out_shape.w);
      std::vector<std::int32_t> argmax;
      if (train) argmax.resize(out.size());
      detail::maxpool_forward(cur, *pool, out, train ? &argmax : nullptr);
      if (train) {
        result.layers[i].input = std::move(cur);
        result.layers[i].argmax = std::move(argmax);
      }
      cur = std::move(out);
    } else if (std::holds_alternative<ReluSpec>(layer)) {
      // in place; backward only needs the sign pattern
      if (train) {
        std::vector<std::uint8_t> mask(cur.size());
        for (std::size_t j = 0; j < cur.v.size(); ++j) {
          const bool pos = cur.v[j] > T(0);
          mask[j] = pos;
          if (!pos) cur.v[j] = T(0);
        }
        result.layers[i].mask = std::move(mask);
      } else {
        for (T& v : cur.v) v = v > T(0) ? v : T(0);
      }
    } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
      if (!train || drop->p == 0.0f) {
        // inverted dropout: inference is a pass-through
        if (train) result.layers[i].mask.assign(cur.size(), 1);
        continue;
      }
      const T scale = T(1) / (T(1) - static_cast<T>(drop->p));
      const int features = cur.features();
      std::vector<std::uint8_t> mask(cur.size());
      for (int bi = 0; bi < cur.n; ++bi) {
        T* row = cur.row(bi);
        std::uint8_t* mrow = mask.data() + static_cast<std::size_t>(bi) * features;
        for (int u = 0; u < features; ++u) {
          const bool keep = drng.keep(static_cast<std::uint64_t>(bi), static_cast<std::uint64_t>(u),
                                      static_cast<double>(drop->p));
          mrow[u] = keep ? 1 : 0;
          row[u] = keep ? row[u] * scale : T(0);
        }
      }
      result.layers[i].mask = std::move(mask);
    } else if (const auto* fc = std::get_if<FcSpec>(&layer)) {
      Tensor<T> out(cur.n, fc->units, 1, 1);
      detail::fc_forward(cur, fc->units, state.params[i].w, state.params[i].b, out);
      if (train) result.layers[i].input = std::move(cur);
      cur = std::move(out);
    } else if (const auto* sm = std::get_if<SoftmaxOutSpec>(&layer)) {
      Tensor<T> out(cur.n, sm->classes, 1, 1);
      detail::fc_forward(cur, sm->classes, state.params[i].w, state.params[i].b, out);
      detail::softmax_rows(out);
      if (train) result.layers[i].input = std::move(cur);
      cur = std::move(out);
    }
  }
  result.probs = std::move(cur);
  return result;
}

template <typename T>
struct ParamGrad {
  std::vector<T> gw, gb;
};

template <typename T>
struct Gradients {
  std::vector<ParamGrad<T>> layers;  // aligned with spec.layers
};

template <typename T>
Gradients<T> zero_gradients(const NetworkState<T>& state) {
  Gradients<T> g;
  g.layers.resize(state.params.size());
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    g.layers[i].gw.assign(state.params[i].w.size(), T(0));
    g.layers[i].gb.assign(state.params[i].b.size(), T(0));
  }
  return g;
}

// Gradients of the mean cross-entropy loss. `normalizer` defaults to the
// batch size; training lanes pass the full batch size so partial batches
// accumulate into the same mean.
template <typename T>
void backward_into(const NetworkState<T>& state, const Forward<T>& fwd,
                   const std::vector<int>& labels, Gradients<T>& grads, double normalizer = 0.0) {
  if (fwd.mode != RunMode::train) throw ArgumentError("backward needs a train-mode forward cache");
  const int batch = fwd.probs.n;
  if (static_cast<int>(labels.size()) != batch)
    throw ShapeError("label count does not match batch");
  const int classes = fwd.probs.features();
  for (int l : labels)
    if (l < 0 || l >= classes) throw ArgumentError("label out of range: " + std::to_string(l));
  if (normalizer <= 0.0) normalizer = static_cast<double>(batch);

  // fused softmax + cross-entropy: d = (p - onehot) / normalizer
  Tensor<T> d = fwd.probs;
  const T inv = static_cast<T>(1.0 / normalizer);
  for (int bi = 0; bi < batch; ++bi) {
    T* row = d.row(bi);
    for (int i = 0; i < classes; ++i) row[i] *= inv;
    row[labels[bi]] -= inv;
  }

  for (std::size_t idx = state.spec.layers.size(); idx-- > 0;) {
    const LayerSpec& layer = state.spec.layers[idx];
    const LayerCacheEntry<T>& cache = fwd.layers[idx];
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      Tensor<T> din(cache.input.n, cache.input.c, cache.input.h, cache.input.w);
      detail::conv_backward(cache.input, *conv, state.params[idx].w, d, din,
                            grads.layers[idx].gw, grads.layers[idx].gb);
      d = std::move(din);
    } else if (const auto* pool = std::get_if<MaxPoolSpec>(&layer)) {
      Tensor<T> din(cache.input.n, cache.input.c, cache.input.h, cache.input.w);
      const int per_plane = d.h * d.w;
      for (int bi = 0; bi < d.n; ++bi) {
        for (int ci = 0; ci < d.c; ++ci) {
          const T* dout_plane = d.plane(bi, ci);
          T* din_plane = din.plane(bi, ci);
          const std::int32_t* am =
              cache.argmax.data() + (static_cast<std::size_t>(bi) * d.c + ci) * per_plane;
          for (int o = 0; o < per_plane; ++o) din_plane[am[o]] += dout_plane[o];
        }
      }
      (void)pool;
      d = std::move(din);
    } else if (std::holds_alternative<ReluSpec>(layer)) {
      for (std::size_t i = 0; i < d.v.size(); ++i)
        if (!cache.mask[i]) d.v[i] = T(0);
    } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
      const T scale = drop->p == 0.0f ? T(1) : T(1) / (T(1) - static_cast<T>(drop->p));
      for (std::size_t i = 0; i < d.v.size(); ++i)
        d.v[i] = cache.mask[i] ? d.v[i] * scale : T(0);
    } else if (const auto* fc = std::get_if<FcSpec>(&layer)) {
      Tensor<T> din(cache.input.n, cache.input.c, cache.input.h, cache.input.w);
      detail::fc_backward(cache.input, fc->units, state.params[idx].w, d, din,
                          grads.layers[idx].gw, grads.layers[idx].gb);
      d = std::move(din);
    } else if (const auto* sm = std::get_if<SoftmaxOutSpec>(&layer)) {
      Tensor<T> din(cache.input.n, cache.input.c, cache.input.h, cache.input.w);
      detail::fc_backward(cache.input, sm->classes, state.params[idx].w, d, din,
                          grads.layers[idx].gw, grads.layers[idx].gb);
      d = std::move(din);
    }
  }
}

template <typename T>
Gradients<T> backward(const NetworkState<T>& state, const Forward<T>& fwd,
                      const std::vector<int>& labels, double normalizer = 0.0) {
  Gradients<T> grads = zero_gradients(state);
  backward_into(state, fwd, labels, grads, normalizer);
  return grads;
}

// v <- momentum*v - lr*g; w <- w + v
template <typename T>
void sgd_step(NetworkState<T>& state, const Gradients<T>& grads, T lr, T momentum) {
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    ParamBlock<T>& p = state.params[i];
    const ParamGrad<T>& g = grads.layers[i];
    for (std::size_t j = 0; j < p.w.size(); ++j) {
      p.vw[j] = momentum * p.vw[j] - lr * g.gw[j];
      p.w[j] += p.vw[j];
    }
    for (std::size_t j = 0; j < p.b.size(); ++j) {
      p.vb[j] = momentum * p.vb[j] - lr * g.gb[j];
      p.b[j] += p.vb[j];
    }
  }
}

template <typename T>
double mean_cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels) {
  double total = 0.0;
  for (int bi = 0; bi < probs.n; ++bi)
    total += -std::log(static_cast<double>(probs.row(bi)[labels[bi]]));
  return total / static_cast<double>(probs.n);
}

// --- weight serialization: magic "GZCNN1", little-endian ---

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc ^= 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct ByteReader {
  const std::uint8_t* p;
  std::size_t len;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > len) throw ParseError("weights: truncated file");
    return p[pos++];
  }
  std::uint32_t u32() {
    if (pos + 4 > len) throw ParseError("weights: truncated file");
    const std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                            (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                            (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                            (static_cast<std::uint32_t>(p[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace detail

inline constexpr char kWeightMagic[6] = {'G', 'Z', 'C', 'N', 'N', '1'};

inline std::vector<std::uint8_t> save_weights(const NetworkState<float>& state) {
  const auto shapes = chain_shapes(state.spec);
  std::vector<std::uint8_t> out(kWeightMagic, kWeightMagic + 6);
  std::vector<std::uint8_t> payload;
  std::uint32_t learnable = 0;
  for (std::size_t i = 0; i < state.spec.layers.size(); ++i)
    if (detail::learnable_dims(state.spec.layers[i], shapes[i]).learnable) ++learnable;
  detail::put_u32(out, learnable);
  for (std::size_t i = 0; i < state.spec.layers.size(); ++i) {
    const auto d = detail::learnable_dims(state.spec.layers[i], shapes[i]);
    if (!d.learnable) continue;
    out.push_back(static_cast<std::uint8_t>(d.kind));
    out.push_back(static_cast<std::uint8_t>(d.wdims.size()));
    for (int dim : d.wdims) detail::put_u32(out, static_cast<std::uint32_t>(dim));
    std::vector<std::uint8_t> block;
    for (float w : state.params[i].w) detail::put_f32(block, w);
    for (float b : state.params[i].b) detail::put_f32(block, b);
    payload.insert(payload.end(), block.begin(), block.end());
    out.insert(out.end(), block.begin(), block.end());
  }
  detail::put_u32(out, detail::crc32(payload.data(), payload.size()));
  return out;
}

inline NetworkState<float> load_weights(const std::vector<std::uint8_t>& bytes,
                                        const NetworkSpec& spec) {
  validate_spec(spec);
  detail::ByteReader r{bytes.data(), bytes.size()};
  for (char m : kWeightMagic)
    if (r.u8() != static_cast<std::uint8_t>(m)) throw ParseError("weights: bad magic");

  const auto shapes = chain_shapes(spec);
  NetworkState<float> state;
  state.spec = spec;
  state.params.resize(spec.layers.size());

  std::uint32_t expected_learnable = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (detail::learnable_dims(spec.layers[i], shapes[i]).learnable) ++expected_learnable;
  const std::uint32_t layer_count = r.u32();
  if (layer_count != expected_learnable)
    throw ShapeError("weights: file has " + std::to_string(layer_count) +
                     " learnable layers, spec needs " + std::to_string(expected_learnable));

  std::vector<std::uint8_t> payload;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto d = detail::learnable_dims(spec.layers[i], shapes[i]);
    if (!d.learnable) continue;
    const int kind = r.u8();
    if (kind != d.kind)
      throw ShapeError("weights: layer kind mismatch at spec layer " + std::to_string(i));
    const int ndims = r.u8();
    if (ndims != static_cast<int>(d.wdims.size()))
      throw ShapeError("weights: dim count mismatch at spec layer " + std::to_string(i));
    for (int dim : d.wdims) {
      const std::uint32_t got = r.u32();
      if (got != static_cast<std::uint32_t>(dim))
        throw ShapeError("weights: dim mismatch at spec layer " + std::to_string(i) + " (got " +
                         std::to_string(got) + ", want " + std::to_string(dim) + ")");
    }
    ParamBlock<float>& p = state.params[i];
    const long long wcount = detail::dims_product(d.wdims);
    const std::size_t start = r.pos;
    p.w.resize(static_cast<std::size_t>(wcount));
    for (float& w : p.w) w = r.f32();
    p.b.resize(static_cast<std::size_t>(d.bias));
    for (float& b : p.b) b = r.f32();
    payload.insert(payload.end(), bytes.begin() + start, bytes.begin() + r.pos);
    p.vw.assign(p.w.size(), 0.0f);
    p.vb.assign(p.b.size(), 0.0f);
  }
  const std::uint32_t stored_crc = r.u32();
  if (r.pos != bytes.size()) throw ParseError("weights: trailing bytes after checksum");
  if (stored_crc != detail::crc32(payload.data(), payload.size()))
    throw ParseError("weights: checksum mismatch");
  return state;
}

struct Prediction {
  int cls = 0;
  std::vector<float> probs;
};

// Argmax of an inference forward pass; ties break toward the smaller index.
inline Prediction predict_scaled(const NetworkState<float>& state, const Tensor<float>& one) {
  Forward<float> fwd = forward(state, one, RunMode::infer);
  Prediction pred;
  const int classes = fwd.probs.features();
  pred.probs.assign(fwd.probs.v.begin(), fwd.probs.v.end());
  for (int i = 1; i < classes; ++i)
    if (pred.probs[i] > pred.probs[pred.cls]) pred.cls = i;
  return pred;
}

// Pixels are scaled to [0, 1] before entering the network.
inline Tensor<float> image_to_tensor(const GrayImage& img) {
  Tensor<float> t(1, 1, img.height(), img.width());
  const auto& s = img.samples();
  for (std::size_t i = 0; i < s.size(); ++i) t.v[i] = static_cast<float>(s[i]) * (1.0f / 255.0f);
  return t;
}

inline Prediction predict(const NetworkState<float>& state, const PairEyeImage& img) {
  return predict_scaled(state, image_to_tensor(img.image()));
}

}  // namespace gaze
