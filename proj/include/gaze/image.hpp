#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "gaze/error.hpp"

namespace gaze {

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  int right() const { return x + w; }
  int bottom() const { return y + h; }

  bool operator==(const Rect&) const = default;
};

inline bool rects_overlap(const Rect& a, const Rect& b) {
  return a.x < b.right() && b.x < a.right() && a.y < b.bottom() && b.y < a.bottom();
}

inline bool rect_contains(const Rect& outer, const Rect& inner) {
  return inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() &&
         inner.bottom() <= outer.bottom();
}

namespace detail {
inline void check_dims(int width, int height) {
  if (width < 1 || height < 1)
    throw ArgumentError("image dimensions must be >= 1x1, got " + std::to_string(width) + "x" +
                        std::to_string(height));
}
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
// round-half-up to an 8-bit sample
inline std::uint8_t to_sample(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
}
}  // namespace detail

// 8-bit single-channel raster, row-major. Immutable by convention once built;
// all free functions below return new images.
class GrayImage {
 public:
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    detail::check_dims(width, height);
    samples_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  GrayImage(int width, int height, std::vector<std::uint8_t> samples)
      : width_(width), height_(height), samples_(std::move(samples)) {
    detail::check_dims(width, height);
    if (samples_.size() != static_cast<std::size_t>(width) * height)
      throw ArgumentError("sample count does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& samples() const { return samples_; }

  std::uint8_t at(int x, int y) const {
    return samples_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int x, int y, std::uint8_t v) {
    samples_[static_cast<std::size_t>(y) * width_ + x] = v;
  }

  // Replicate-edge sample at arbitrary integer coordinates.
  std::uint8_t at_clamped(int x, int y) const {
    return at(detail::clampi(x, 0, width_ - 1), detail::clampi(y, 0, height_ - 1));
  }

  bool contains(const Rect& r) const {
    return r.x >= 0 && r.y >= 0 && r.w >= 1 && r.h >= 1 && r.right() <= width_ &&
           r.bottom() <= height_;
  }

  bool operator==(const GrayImage&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> samples_;
};

// Interleaved 8-bit RGB raster, row-major.
class RgbImage {
 public:
  RgbImage(int width, int height, std::vector<std::uint8_t> samples)
      : width_(width), height_(height), samples_(std::move(samples)) {
    detail::check_dims(width, height);
    if (samples_.size() != 3u * static_cast<std::size_t>(width) * height)
      throw ArgumentError("sample count does not match 3*width*height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& samples() const { return samples_; }

  bool operator==(const RgbImage&) const = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> samples_;
};

// BT.601 luma with round-half-up, pinned for reproducibility.
inline GrayImage to_grayscale(const RgbImage& img) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.width()) * img.height());
  const auto& s = img.samples();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = 0.299 * s[3 * i] + 0.587 * s[3 * i + 1] + 0.114 * s[3 * i + 2];
    out[i] = detail::to_sample(y);
  }
  return GrayImage(img.width(), img.height(), std::move(out));
}

// Shift content by (dx, dy) with replicate-edge fill: out(x,y) = in(x-dx, y-dy).
inline GrayImage translate(const GrayImage& img, int dx, int dy) {
  if (std::abs(dx) >= img.width() || std::abs(dy) >= img.height())
    throw ArgumentError("shift magnitude must be smaller than the image dimension");
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.set(x, y, img.at_clamped(x - dx, y - dy));
  return out;
}

namespace detail {
// Bilinear sample with replicate-edge fill at fractional coordinates.
inline double bilinear(const GrayImage& img, double x, double y) {
  if (x < 0.0) x = 0.0;
  if (y < 0.0) y = 0.0;
  if (x > img.width() - 1) x = img.width() - 1;
  if (y > img.height() - 1) y = img.height() - 1;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = clampi(x0 + 1, 0, img.width() - 1);
  const int y1 = clampi(y0 + 1, 0, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
  return top * (1.0 - fy) + bot * fy;
}
}  // namespace detail

// Rotate content about the image center; positive degrees turn the content
// clockwise in raster (y-down) coordinates. Bilinear, replicate-edge.
// Guarded to the augmentation range.
inline GrayImage rotate(const GrayImage& img, double degrees) {
  if (std::abs(degrees) > 45.0)
    throw ArgumentError("rotation angle outside the supported +/-45 degree range");
  if (degrees == 0.0) return img;
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      out.set(x, y, detail::to_sample(detail::bilinear(img, sx, sy)));
    }
  }
  return out;
}

// Bilinear resize; source coordinate = (dst + 0.5) * scale - 0.5 (centers aligned).
inline GrayImage resize(const GrayImage& img, int w, int h) {
  detail::check_dims(w, h);
  if (w == img.width() && h == img.height()) return img;
  const double sx = static_cast<double>(img.width()) / w;
  const double sy = static_cast<double>(img.height()) / h;
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      out.set(x, y, detail::to_sample(detail::bilinear(img, src_x, src_y)));
    }
  }
  return out;
}

inline GrayImage crop(const GrayImage& img, const Rect& r) {
  if (!img.contains(r))
    throw BoundsError("crop rectangle outside image");
  GrayImage out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      out.set(x, y, img.at(r.x + x, r.y + y));
  return out;
}

}  // namespace gaze
