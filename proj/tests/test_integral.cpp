#include <catch2/catch_amalgamated.hpp>

#include "gaze/integral.hpp"
#include "gaze/rng.hpp"
#include "testutil.hpp"

using namespace gaze;

namespace {

// Brute-force oracle: direct nested-loop sums.
std::uint64_t loop_sum(const GrayImage& img, const Rect& r) {
  std::uint64_t s = 0;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x) s += img.at(x, y);
  return s;
}

std::uint64_t loop_sq_sum(const GrayImage& img, const Rect& r) {
  std::uint64_t s = 0;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x)
      s += static_cast<std::uint64_t>(img.at(x, y)) * img.at(x, y);
  return s;
}

Rect random_rect(Rng& rng, int w, int h) {
  const int rw = 1 + static_cast<int>(rng.next_below(w));
  const int rh = 1 + static_cast<int>(rng.next_below(h));
  const int rx = static_cast<int>(rng.next_below(w - rw + 1));
  const int ry = static_cast<int>(rng.next_below(h - rh + 1));
  return {rx, ry, rw, rh};
}

}  // namespace

TEST_CASE("integral image basics") {
  const GrayImage zero(4, 4, std::uint8_t(0));
  const IntegralImage zi(zero);
  for (int j = 0; j <= 4; ++j)
    for (int i = 0; i <= 4; ++i) {
      CHECK(zi.entry(i, j) == 0);
      CHECK(zi.sq_entry(i, j) == 0);
    }

  const GrayImage ones(2, 2, std::uint8_t(1));
  const IntegralImage oi(ones);
  CHECK(oi.entry(2, 2) == 4);
  CHECK(oi.sq_entry(2, 2) == 4);
  CHECK(oi.entry(0, 2) == 0);
  CHECK(oi.entry(2, 0) == 0);
}

TEST_CASE("rect_sum matches the nested-loop oracle on random images") {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = 1 + static_cast<int>(rng.next_below(64));
    const int h = 1 + static_cast<int>(rng.next_below(64));
    const GrayImage img = testutil::random_image(rng, w, h);
    const IntegralImage ii(img);
    for (int k = 0; k < 25; ++k) {
      const Rect r = random_rect(rng, w, h);
      CHECK(rect_sum(ii, r) == loop_sum(img, r));
      CHECK(sq_rect_sum(ii, r) == loop_sq_sum(img, r));
    }
  }
}

TEST_CASE("rect_sum rejects out-of-bounds rectangles") {
  const GrayImage img(4, 4, std::uint8_t(9));
  const IntegralImage ii(img);
  CHECK_THROWS_AS(rect_sum(ii, {2, 2, 3, 1}), BoundsError);
  CHECK_THROWS_AS(rect_sum(ii, {-1, 0, 2, 2}), BoundsError);
  CHECK_THROWS_AS(rect_sum(ii, {0, 0, 1, 0}), BoundsError);
}

TEST_CASE("window mean and variance") {
  const GrayImage uniform(5, 3, std::uint8_t(7));
  const IntegralImage ui(uniform);
  const auto [mean_u, var_u] = window_mean_var(ui, {0, 0, 5, 3});
  CHECK(mean_u == 7.0);
  CHECK(var_u == 0.0);

  const GrayImage two(2, 1, {0, 2});
  const IntegralImage ti(two);
  const auto [mean_t, var_t] = window_mean_var(ti, {0, 0, 2, 1});
  CHECK(mean_t == 1.0);
  CHECK(var_t == 1.0);
}

TEST_CASE("window variance matches a two-pass oracle and is never negative") {
  Rng rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 2 + static_cast<int>(rng.next_below(40));
    const int h = 2 + static_cast<int>(rng.next_below(40));
    const GrayImage img = testutil::random_image(rng, w, h);
    const IntegralImage ii(img);
    for (int k = 0; k < 10; ++k) {
      const Rect r = random_rect(rng, w, h);
      const auto [mean, var] = window_mean_var(ii, r);
      CHECK(var >= 0.0);

      // two-pass oracle
      double m = 0.0;
      for (int y = r.y; y < r.bottom(); ++y)
        for (int x = r.x; x < r.right(); ++x) m += img.at(x, y);
      m /= static_cast<double>(r.area());
      double v = 0.0;
      bool uniform = true;
      for (int y = r.y; y < r.bottom(); ++y)
        for (int x = r.x; x < r.right(); ++x) {
          v += (img.at(x, y) - m) * (img.at(x, y) - m);
          uniform = uniform && img.at(x, y) == img.at(r.x, r.y);
        }
      v /= static_cast<double>(r.area());
      CHECK(mean == Catch::Approx(m).epsilon(1e-12));
      CHECK(var == Catch::Approx(v).margin(1e-6));
      if (uniform) CHECK(var == 0.0);
      if (var == 0.0) CHECK(uniform);
    }
  }
}
