#pragma once

#include <cstddef>
#include <vector>

#include "gaze/error.hpp"

namespace gaze {

// Dense batch-major (n, c, h, w) tensor. Fc layers view (c*h*w) as one flat
// feature axis.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {
    if (n_ < 0 || c_ < 1 || h_ < 1 || w_ < 1) throw ShapeError("bad tensor dims");
  }

  std::size_t size() const { return v.size(); }
  int features() const { return c * h * w; }

  T* plane(int bi, int ci) {
    return v.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
  }
  const T* plane(int bi, int ci) const {
    return v.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
  }
  T* row(int bi) { return v.data() + static_cast<std::size_t>(bi) * features(); }
  const T* row(int bi) const { return v.data() + static_cast<std::size_t>(bi) * features(); }
};

namespace detail {

// Strip-mined dot product: fixed 4-accumulator order keeps results
// bit-reproducible while still vectorizing.
template <typename T>
inline T dot4(const T* __restrict a, const T* __restrict b, int n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3)) + tail;
}

template <typename T>
inline void axpy(T* __restrict dst, const T* __restrict src, T a, int n) {
  for (int i = 0; i < n; ++i) dst[i] += a * src[i];
}

// Fused pass: returns dot(a, b) in dot4's accumulation order while adding
// s*b into c. One read of b instead of two.
template <typename T>
inline T dot_axpy(const T* __restrict a, const T* __restrict b, T* __restrict c, T s, int n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    c[i] += s * b[i];
    s1 += a[i + 1] * b[i + 1];
    c[i + 1] += s * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    c[i + 2] += s * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    c[i + 3] += s * b[i + 3];
  }
  T tail = 0;
  for (; i < n; ++i) {
    tail += a[i] * b[i];
    c[i] += s * b[i];
  }
  return ((s0 + s1) + (s2 + s3)) + tail;
}

}  // namespace detail

}  // namespace gaze
