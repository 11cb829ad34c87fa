#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gaze/cascade.hpp"
#include "gaze/image.hpp"
#include "gaze/rng.hpp"

namespace testutil {

// Uniform-random image, deterministic in the rng state.
gaze::GrayImage random_image(gaze::Rng& rng, int w, int h);

// --- synthetic cascade stubs shared by detector, session, and CLI tests ---

// LBP cascade that passes exactly when the code equals `code`. With code 0 it
// is a "bright center block" detector.
gaze::CascadeModel lbp_code_matcher(int window, const gaze::Rect& cell, std::uint32_t code);

// Single-stage LBP cascade whose stage sum is always 0: threshold <= 0 passes
// every window, > 0 passes none.
gaze::CascadeModel lbp_constant(int window, double stage_threshold);

// Haar cascade firing on windows whose center region is dark relative to the
// window deviation (12x12 base, center 4x4 rect, stump threshold t).
gaze::CascadeModel haar_dark_center(double t);

// A 200x200 frame with one detectable synthetic "face": a 60x60 bright ring
// with a brighter 20x20 center third at (70,70) and two dark 10x10 pupils in
// its top part.
gaze::GrayImage face_scene();

// Pipeline parameters matched to the stub cascades above.
gaze::PipelineParams stub_pipeline_params();

// Serializes a model into the standard cascade XML schema (doubles printed
// with enough digits to round-trip exactly).
std::string cascade_to_xml(const gaze::CascadeModel& model);

// A scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// A real LBP frontal-face cascade file, if one is installed on this machine.
// Cascade files are runtime inputs, not bundled assets, so tests that need a
// production-grade model skip when none is found.
std::optional<std::string> find_real_lbp_cascade();

}  // namespace testutil
