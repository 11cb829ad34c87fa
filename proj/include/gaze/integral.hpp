#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "gaze/error.hpp"
#include "gaze/image.hpp"

namespace gaze {

// Summed-area tables over intensities and squared intensities. Planes are
// (width+1) x (height+1) with a zero top row and left column, so any
// rectangle sum is four lookups. 64-bit: 255 * 1280 * 720 overflows 32 bits.
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& img)
      : width_(img.width()), height_(img.height()) {
    const std::size_t stride = width_ + 1;
    sum_.assign(stride * (height_ + 1), 0);
    sq_.assign(stride * (height_ + 1), 0);
    for (int y = 0; y < height_; ++y) {
      std::uint64_t row = 0;
      std::uint64_t row_sq = 0;
      for (int x = 0; x < width_; ++x) {
        const std::uint64_t v = img.at(x, y);
        row += v;
        row_sq += v * v;
        sum_[(y + 1) * stride + (x + 1)] = sum_[y * stride + (x + 1)] + row;
        sq_[(y + 1) * stride + (x + 1)] = sq_[y * stride + (x + 1)] + row_sq;
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  // Cumulative sum over pixels (x < i, y < j).
  std::uint64_t entry(int i, int j) const { return sum_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }
  std::uint64_t sq_entry(int i, int j) const { return sq_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }

 private:
  int width_;
  int height_;
  std::vector<std::uint64_t> sum_;
  std::vector<std::uint64_t> sq_;
};

namespace detail {
inline void check_rect(const IntegralImage& ii, const Rect& r) {
  if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.right() > ii.width() ||
      r.bottom() > ii.height())
    throw BoundsError("rectangle outside image");
}
}  // namespace detail

// Four-corner identity on the intensity plane.
inline std::uint64_t rect_sum(const IntegralImage& ii, const Rect& r) {
  detail::check_rect(ii, r);
  return ii.entry(r.right(), r.bottom()) + ii.entry(r.x, r.y) -
         ii.entry(r.right(), r.y) - ii.entry(r.x, r.bottom());
}

inline std::uint64_t sq_rect_sum(const IntegralImage& ii, const Rect& r) {
  detail::check_rect(ii, r);
  return ii.sq_entry(r.right(), r.bottom()) + ii.sq_entry(r.x, r.y) -
         ii.sq_entry(r.right(), r.y) - ii.sq_entry(r.x, r.bottom());
}

// Mean and population variance over the window; variance floored at 0.
inline std::pair<double, double> window_mean_var(const IntegralImage& ii, const Rect& r) {
  detail::check_rect(ii, r);
  const double area = static_cast<double>(r.area());
  const double mean = static_cast<double>(rect_sum(ii, r)) / area;
  double var = static_cast<double>(sq_rect_sum(ii, r)) / area - mean * mean;
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

}  // namespace gaze
