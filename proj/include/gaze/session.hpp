#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaze/cascade.hpp"
#include "gaze/composer.hpp"
#include "gaze/error.hpp"
#include "gaze/net.hpp"
#include "gaze/pnm.hpp"
#include "gaze/rng.hpp"

namespace gaze {

// Stimulus videos start with an attention-capturing intro; scoring skips the
// leading frames and then keeps every Nth frame.
struct SamplerConfig {
  long long skip = 300;
  long long stride = 15;
};

inline std::vector<long long> sample_frames(long long total_frames, const SamplerConfig& cfg) {
  if (total_frames < 1) throw ArgumentError("total_frames must be >= 1");
  if (cfg.skip < 0 || cfg.stride < 1) throw ArgumentError("bad sampler config");
  std::vector<long long> indices;
  for (long long i = cfg.skip; i < total_frames; i += cfg.stride) indices.push_back(i);
  return indices;
}

inline bool is_sampled(long long index, const SamplerConfig& cfg) {
  return index >= cfg.skip && (index - cfg.skip) % cfg.stride == 0;
}

struct FrameRecord {
  long long frame_index = 0;
  Reject gate = Reject::none;  // none == accepted
  int cls = -1;                // present iff accepted
  std::vector<float> probs;
  double latency_ms = 0.0;
};

struct ClassifyOutcome {
  std::vector<FrameRecord> records;
  bool decode_error = false;
  long long error_frame = -1;
  std::string error_message;
};

// Runs the full per-frame pipeline (grayscale -> face -> eyes -> gate ->
// compose -> predict) over a concatenated-PNM stream. Gate rejections are
// recorded, not raised; a decode failure stops the stream but keeps every
// record gathered so far.
inline ClassifyOutcome classify_stream(const CascadeModel& face_model,
                                       const CascadeModel& eye_model,
                                       const NetworkState<float>& state, std::istream& frames,
                                       const SamplerConfig& cfg,
                                       const PipelineParams& params = {}) {
  ClassifyOutcome outcome;
  FrameReader reader(frames);
  while (true) {
    const long long index = reader.index();
    std::optional<PnmImage> frame;
    try {
      frame = reader.next();
    } catch (const ParseError& e) {
      outcome.decode_error = true;
      outcome.error_frame = index;
      outcome.error_message = "frame " + std::to_string(index) + ": " + e.what();
      return outcome;
    }
    if (!frame) return outcome;
    if (!is_sampled(index, cfg)) continue;

    const auto t0 = std::chrono::steady_clock::now();
    FrameRecord record;
    record.frame_index = index;
    const GrayImage gray = to_gray(*frame);
    const FaceResult face = detect_face_then_eyes(face_model, eye_model, gray, params);
    const GateResult gate = quality_gate(face);
    if (!gate.accept) {
      record.gate = gate.reason;
    } else {
      const PairEyeImage pair = compose_pair(gray, *face.landmarks);
      const Prediction pred = predict(state, pair);
      record.cls = pred.cls;
      record.probs = pred.probs;
    }
    record.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    outcome.records.push_back(std::move(record));
  }
}

struct LatencySummary {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int count = 0;
};

namespace detail {

inline double percentile_nearest_rank(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

inline LatencySummary latency_summary(std::vector<double> samples) {
  LatencySummary s;
  s.count = static_cast<int>(samples.size());
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  s.median_ms = n % 2 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2.0;
  s.p95_ms = percentile_nearest_rank(samples, 0.95);
  return s;
}

}  // namespace detail

struct SessionReport {
  long long sampled = 0;
  long long accepted = 0;
  std::array<long long, 3> class_counts{};
  std::array<double, 3> proportions{};  // over accepted frames
  std::optional<double> preference_ratio;  // class1 / (class0 + class1)
  std::string ratio_absent_reason;
  std::map<std::string, long long> rejections;
  LatencySummary latency;  // full per-frame pipeline
};

// Aggregates per-frame records into the per-session gaze-preference report.
// The preference ratio is defined over accepted left/right frames only;
// undetermined frames are reported in the proportions but do not dilute it.
inline SessionReport summarize(const std::vector<FrameRecord>& records) {
  SessionReport report;
  std::vector<double> latencies;
  latencies.reserve(records.size());
  for (const FrameRecord& r : records) {
    ++report.sampled;
    latencies.push_back(r.latency_ms);
    if (r.gate == Reject::none) {
      ++report.accepted;
      if (r.cls >= 0 && r.cls < 3) ++report.class_counts[r.cls];
    } else {
      ++report.rejections[reject_name(r.gate)];
    }
  }
  if (report.accepted > 0)
    for (int c = 0; c < 3; ++c)
      report.proportions[c] =
          static_cast<double>(report.class_counts[c]) / static_cast<double>(report.accepted);
  const long long lr = report.class_counts[0] + report.class_counts[1];
  if (lr > 0)
    report.preference_ratio = static_cast<double>(report.class_counts[1]) / static_cast<double>(lr);
  else
    report.ratio_absent_reason = "no accepted left/right frames";
  report.latency = detail::latency_summary(std::move(latencies));
  return report;
}

// Median/p95 wall-clock of the infer-mode forward pass on a fixed random
// 72x72 input, after 5 warm-up runs.
inline LatencySummary benchmark(const NetworkState<float>& state, int repetitions) {
  if (repetitions < 30) throw ArgumentError("benchmark needs >= 30 repetitions");
  const auto shapes = chain_shapes(state.spec);
  Tensor<float> input(1, shapes[0].c, shapes[0].h, shapes[0].w);
  Rng rng(0xbe7cbe7cULL);
  for (float& v : input.v) v = static_cast<float>(rng.next_unit());

  volatile float sink = 0.0f;
  for (int i = 0; i < 5; ++i) {
    const Forward<float> fwd = forward(state, input, RunMode::infer);
    sink = sink + fwd.probs.v[0];
  }
  std::vector<double> samples;
  samples.reserve(repetitions);
  for (int i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Forward<float> fwd = forward(state, input, RunMode::infer);
    sink = sink + fwd.probs.v[0];
    samples.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return detail::latency_summary(std::move(samples));
}

}  // namespace gaze
