#pragma once

#include <string>
#include <utility>

#include "gaze/cascade.hpp"
#include "gaze/error.hpp"
#include "gaze/image.hpp"

namespace gaze {

inline constexpr int kPairEyeSize = 72;      // final square side
inline constexpr int kEyeTileHeight = 36;    // each eye occupies 72x36
inline constexpr int kMinEyeWidth = 24;      // quality gate floor, source pixels
inline constexpr int kMinEyeHeight = 12;

// The 72x72 two-eye composite the network consumes. The constructor is the
// only way in, so a PairEyeImage of any other size cannot exist.
class PairEyeImage {
 public:
  explicit PairEyeImage(GrayImage image, std::string person_id = {}, std::string frame_id = {})
      : image_(std::move(image)), person_id_(std::move(person_id)), frame_id_(std::move(frame_id)) {
    if (image_.width() != kPairEyeSize || image_.height() != kPairEyeSize)
      throw ArgumentError("pair-eye image must be exactly 72x72");
  }

  const GrayImage& image() const { return image_; }
  const std::string& person_id() const { return person_id_; }
  const std::string& frame_id() const { return frame_id_; }

 private:
  GrayImage image_;
  std::string person_id_;
  std::string frame_id_;
};

namespace detail {

// Eye crop grows by 10% of each dimension on every side, clamped to the frame.
inline Rect expand_eye_rect(const Rect& r, const GrayImage& frame) {
  const int mx = iround(0.10 * r.w);
  const int my = iround(0.10 * r.h);
  Rect e{r.x - mx, r.y - my, r.w + 2 * mx, r.h + 2 * my};
  if (e.x < 0) {
    e.w += e.x;
    e.x = 0;
  }
  if (e.y < 0) {
    e.h += e.y;
    e.y = 0;
  }
  e.w = std::min(e.w, frame.width() - e.x);
  e.h = std::min(e.h, frame.height() - e.y);
  return e;
}

}  // namespace detail

// Stacks the image-left eye into the top 72x36 half and the image-right eye
// into the bottom half, each crop bilinearly resized.
inline PairEyeImage compose_pair(const GrayImage& frame, const FaceLandmarks& lm,
                                 std::string person_id = {}, std::string frame_id = {}) {
  GrayImage out(kPairEyeSize, kPairEyeSize);
  const Rect eye_rects[2] = {lm.left_eye, lm.right_eye};
  for (int half = 0; half < 2; ++half) {
    const Rect src = detail::expand_eye_rect(eye_rects[half], frame);
    if (src.w < 1 || src.h < 1)
      throw ArgumentError("eye rectangle degenerate after clamping to the frame");
    const GrayImage tile = resize(crop(frame, src), kPairEyeSize, kEyeTileHeight);
    for (int y = 0; y < kEyeTileHeight; ++y)
      for (int x = 0; x < kPairEyeSize; ++x)
        out.set(x, half * kEyeTileHeight + y, tile.at(x, y));
  }
  return PairEyeImage(std::move(out), std::move(person_id), std::move(frame_id));
}

struct GateResult {
  bool accept = false;
  Reject reason = Reject::none;
};

// Dataset-cleaning gate: landmark detection must have succeeded and each eye
// must be at least 24x12 source pixels, below which pupil position is
// sub-pixel and labels are unreliable.
inline GateResult quality_gate(const FaceResult& result) {
  if (!result.accepted()) return {false, result.reject};
  const auto big_enough = [](const Rect& r) {
    return r.w >= kMinEyeWidth && r.h >= kMinEyeHeight;
  };
  if (!big_enough(result.landmarks->left_eye) || !big_enough(result.landmarks->right_eye))
    return {false, Reject::eye_too_small};
  return {true, Reject::none};
}

}  // namespace gaze
