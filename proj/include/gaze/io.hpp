#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/pnm.hpp"
#include "gaze/synth.hpp"

namespace gaze {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

// Loads any P5/P6 file as grayscale.
inline GrayImage load_gray_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  try {
    return to_gray(read_pnm(in));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_gray_file(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image: " + path);
  write_pnm(out, img);
  if (!out) throw IoError("write failed: " + path);
}

inline Manifest load_manifest_file(const std::string& path) {
  try {
    return load_manifest(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_manifest_file(const std::string& path, const Manifest& m) {
  write_file(path, save_manifest(m));
}

// Rewrites bare image names so they are valid relative to the manifest file's
// location; used when the image directory and manifest differ.
inline Manifest rebase_paths(Manifest m, const std::string& image_dir,
                             const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(manifest_path).parent_path();
  const fs::path rel = base.empty() ? fs::path(image_dir) : fs::proximate(image_dir, base);
  for (Sample& s : m.samples) {
    s.path = (rel / s.path).lexically_normal().generic_string();
    if (s.augmented_from)
      s.augmented_from = (rel / *s.augmented_from).lexically_normal().generic_string();
  }
  return m;
}

// Sample paths are stored relative to the manifest file's directory; rebase
// them for loading.
inline Manifest resolve_paths(Manifest m, const std::string& manifest_path) {
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  if (base.empty()) return m;
  for (Sample& s : m.samples) {
    if (!std::filesystem::path(s.path).is_absolute()) s.path = (base / s.path).string();
    if (s.augmented_from && !std::filesystem::path(*s.augmented_from).is_absolute())
      s.augmented_from = (base / *s.augmented_from).string();
  }
  return m;
}

// Writes generated samples as P5 files under dir and returns the manifest
// (paths relative to dir).
inline Manifest synth_write(const std::vector<std::pair<Sample, GrayImage>>& items,
                            const std::string& dir, const std::string& name = "synthetic") {
  std::filesystem::create_directories(dir);
  for (const auto& [s, img] : items)
    save_gray_file((std::filesystem::path(dir) / s.path).string(), img);
  return synth_manifest(items, name);
}

// Expands every sample x15 into out_dir. The identity variant is re-written
// under out_dir so the augmented manifest is self-contained; the 14 derived
// entries point back at it via augmented_from. Returns the new manifest with
// paths relative to out_dir.
inline Manifest augment_dataset(const Manifest& m, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  Manifest out;
  out.name = m.name.empty() ? "augmented" : m.name + "-x15";
  out.scene_map = m.scene_map;
  for (const Sample& s : m.samples) {
    const GrayImage img = load_gray_file(s.path);
    Sample local = s;
    local.path = std::filesystem::path(s.path).filename().string();
    for (auto& [vs, vimg] : augment(local, img)) {
      save_gray_file((std::filesystem::path(out_dir) / vs.path).string(), vimg);
      out.samples.push_back(std::move(vs));
    }
  }
  return out;
}

}  // namespace gaze
