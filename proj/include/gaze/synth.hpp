#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gaze/composer.hpp"
#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/image.hpp"
#include "gaze/rng.hpp"

namespace gaze {

// Synthetic pair-eye generator. The clinical recordings are not available, so
// tests and the acceptance protocol run on stylized two-eye images whose gaze
// class is controlled by pupil placement: class 0 offsets pupils toward
// image-right, class 1 toward image-left, class 2 vertically or to an extreme
// eccentricity. Per-person biases (geometry, brightness, noise) give the
// person-disjoint split something real to generalize over.

struct SynthConfig {
  std::uint64_t seed = 0;
  int n = 0;
  std::array<double, 3> class_mix{0.34, 0.46, 0.20};
  int persons = 1;
};

namespace detail {

struct SynthPerson {
  double eye_rx, eye_ry;    // sclera ellipse radii
  double pupil_r;
  double gaze_dx;           // horizontal pupil offset magnitude for classes 0/1
  double background, sclera, pupil_shade;
  double noise_sigma;
};

inline SynthPerson synth_person(Rng& rng) {
  SynthPerson p;
  p.eye_rx = rng.next_range(20.0, 27.0);
  p.eye_ry = rng.next_range(9.0, 13.0);
  p.pupil_r = rng.next_range(3.5, 5.5);
  p.gaze_dx = rng.next_range(7.0, 10.0);
  p.background = rng.next_range(115.0, 150.0);
  p.sclera = rng.next_range(185.0, 230.0);
  p.pupil_shade = rng.next_range(10.0, 40.0);
  p.noise_sigma = rng.next_range(1.5, 6.0);
  return p;
}

// Largest-remainder apportionment of n over the mix.
inline std::array<long long, 3> synth_class_counts(int n, const std::array<double, 3>& mix) {
  std::array<long long, 3> counts{};
  std::array<double, 3> exact{};
  long long assigned = 0;
  for (int c = 0; c < 3; ++c) {
    exact[c] = mix[c] * n;
    counts[c] = static_cast<long long>(std::floor(exact[c]));
    assigned += counts[c];
  }
  while (assigned < n) {
    int best = 0;
    double best_frac = -1.0;
    for (int c = 0; c < 3; ++c) {
      const double frac = exact[c] - static_cast<double>(counts[c]);
      if (frac > best_frac) {
        best_frac = frac;
        best = c;
      }
    }
    ++counts[best];
    exact[best] = counts[best];  // consumed
    ++assigned;
  }
  return counts;
}

}  // namespace detail

// Renders one pair-eye image. Deterministic in (cfg.seed, index).
inline GrayImage synth_render(const detail::SynthPerson& person, int label, std::uint64_t sample_seed,
                              int sample_index) {
  Rng rng(sample_seed);
  const double jitter_x = rng.next_range(-2.0, 2.0);
  const double jitter_y = rng.next_range(-1.5, 1.5);

  double pupil_dx = 0.0;
  double pupil_dy = 0.0;
  if (label == 0) {
    pupil_dx = person.gaze_dx;
  } else if (label == 1) {
    pupil_dx = -person.gaze_dx;
  } else {
    // undetermined: off-axis gaze
    switch (sample_index % 3) {
      case 0: pupil_dy = person.eye_ry - 3.0; break;
      case 1: pupil_dy = -(person.eye_ry - 3.0); break;
      default:
        pupil_dx = (sample_index % 2 == 0 ? 1.0 : -1.0) * (person.eye_rx - 1.0);
        break;
    }
  }

  GrayImage img(kPairEyeSize, kPairEyeSize);
  for (int half = 0; half < 2; ++half) {
    const double ex = kPairEyeSize / 2.0 + jitter_x;
    const double ey = half * kEyeTileHeight + kEyeTileHeight / 2.0 + jitter_y;
    const double px = ex + pupil_dx;
    const double py = ey + pupil_dy;
    for (int y = half * kEyeTileHeight; y < (half + 1) * kEyeTileHeight; ++y) {
      for (int x = 0; x < kPairEyeSize; ++x) {
        double v = person.background;
        const double nx = (x - ex) / person.eye_rx;
        const double ny = (y - ey) / person.eye_ry;
        if (nx * nx + ny * ny <= 1.0) {
          v = person.sclera;
          const double dx = x - px;
          const double dy = y - py;
          if (dx * dx + dy * dy <= person.pupil_r * person.pupil_r) v = person.pupil_shade;
        }
        v += person.noise_sigma * rng.next_normal();
        img.set(x, y, detail::to_sample(v));
      }
    }
  }
  return img;
}

// Generates n labelled samples across `persons` synthetic subjects. Output is
// fully determined by cfg.seed; paths follow `<person>_<frame>_<class>.pgm`.
inline std::vector<std::pair<Sample, GrayImage>> synth_generate(const SynthConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("synth: n must be >= 1");
  if (cfg.persons < 1) throw ArgumentError("synth: persons must be >= 1");
  const double mix_sum = cfg.class_mix[0] + cfg.class_mix[1] + cfg.class_mix[2];
  if (std::abs(mix_sum - 1.0) > 1e-9) throw ArgumentError("synth: class_mix must sum to 1");
  if (cfg.class_mix[0] < 0 || cfg.class_mix[1] < 0 || cfg.class_mix[2] < 0)
    throw ArgumentError("synth: class_mix entries must be >= 0");

  Rng master(derive_seed(cfg.seed, 0x73796e7468ULL));
  std::vector<detail::SynthPerson> people;
  people.reserve(cfg.persons);
  for (int p = 0; p < cfg.persons; ++p) people.push_back(detail::synth_person(master));

  const auto counts = detail::synth_class_counts(cfg.n, cfg.class_mix);
  std::vector<int> labels;
  labels.reserve(cfg.n);
  for (int c = 0; c < 3; ++c)
    labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), c);
  master.shuffle(labels);

  std::vector<std::pair<Sample, GrayImage>> out;
  out.reserve(cfg.n);
  char name[64];
  for (int i = 0; i < cfg.n; ++i) {
    const int person = i % cfg.persons;
    const int label = labels[i];
    std::snprintf(name, sizeof(name), "p%03d_%06d_%d.pgm", person, i, label);
    Sample s;
    s.path = name;
    s.label = label;
    std::snprintf(name, sizeof(name), "p%03d", person);
    s.person_id = name;
    s.source = Source::synthetic;
    out.emplace_back(std::move(s),
                     synth_render(people[person], label, derive_seed(cfg.seed, 1000 + i), i));
  }
  return out;
}

inline Manifest synth_manifest(const std::vector<std::pair<Sample, GrayImage>>& items,
                               const std::string& name = "synthetic") {
  Manifest m;
  m.name = name;
  m.scene_map[0] = "abstract";
  m.scene_map[1] = "social";
  m.scene_map[2] = "off-target";
  for (const auto& [s, img] : items) m.samples.push_back(s);
  return m;
}

}  // namespace gaze
