#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/io.hpp"
#include "gaze/net.hpp"
#include "gaze/rng.hpp"

namespace gaze {

struct TrainConfig {
  int iterations = 6000;
  int batch = 100;
  float learning_rate = 0.01f;
  float momentum = 0.9f;
  float lr_decay_factor = 0.1f;
  int lr_decay_step = 4000;  // 0 disables decay
  float dropout_p = 0.5f;
  std::uint64_t seed = 0;
  int lanes = 1;       // >1 splits batches across threads; results are
                       // deterministic per lane count, bit-exact at 1
  int val_every = 500;
};

struct TrainReport {
  std::vector<double> loss;                      // one entry per iteration
  std::vector<std::pair<int, double>> val_acc;   // (iteration, accuracy)
  double wall_seconds = 0.0;
};

// `{"iter":n,"loss":x}` / `{"iter":n,"val_acc":y}` lines.
inline std::string report_to_jsonl(const TrainReport& report) {
  std::string out;
  char line[96];
  std::size_t vi = 0;
  for (std::size_t i = 0; i < report.loss.size(); ++i) {
    const int iter = static_cast<int>(i) + 1;
    std::snprintf(line, sizeof(line), "{\"iter\":%d,\"loss\":%.9g}\n", iter, report.loss[i]);
    out += line;
    while (vi < report.val_acc.size() && report.val_acc[vi].first == iter) {
      std::snprintf(line, sizeof(line), "{\"iter\":%d,\"val_acc\":%.9g}\n", iter,
                    report.val_acc[vi].second);
      out += line;
      ++vi;
    }
  }
  return out;
}

// Flat in-memory image set: one 8-bit row per sample.
struct PixelDataset {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // count() * height * width
  std::vector<int> labels;
  std::vector<std::string> persons;

  int count() const { return static_cast<int>(labels.size()); }
  const std::uint8_t* sample(int i) const {
    return pixels.data() + static_cast<std::size_t>(i) * height * width;
  }
};

inline PixelDataset load_pixels(const Manifest& m, int height, int width) {
  PixelDataset data;
  data.height = height;
  data.width = width;
  data.pixels.reserve(m.samples.size() * static_cast<std::size_t>(height) * width);
  for (const Sample& s : m.samples) {
    const GrayImage img = load_gray_file(s.path);
    if (img.width() != width || img.height() != height)
      throw ParseError(s.path + ": expected " + std::to_string(width) + "x" +
                       std::to_string(height) + " image, got " + std::to_string(img.width()) +
                       "x" + std::to_string(img.height()));
    data.pixels.insert(data.pixels.end(), img.samples().begin(), img.samples().end());
    data.labels.push_back(s.label);
    data.persons.push_back(s.person_id);
  }
  return data;
}

namespace detail {

template <typename T>
void fill_batch(const PixelDataset& data, const std::vector<int>& indices, int lo, int hi,
                Tensor<T>& out) {
  const std::size_t px = static_cast<std::size_t>(data.height) * data.width;
  for (int i = lo; i < hi; ++i) {
    const std::uint8_t* src = data.sample(indices[i]);
    T* dst = out.v.data() + static_cast<std::size_t>(i - lo) * px;
    for (std::size_t j = 0; j < px; ++j) dst[j] = static_cast<T>(src[j]) * T(1.0 / 255.0);
  }
}

inline void add_gradients(Gradients<float>& into, const Gradients<float>& from) {
  for (std::size_t i = 0; i < into.layers.size(); ++i) {
    for (std::size_t j = 0; j < into.layers[i].gw.size(); ++j)
      into.layers[i].gw[j] += from.layers[i].gw[j];
    for (std::size_t j = 0; j < into.layers[i].gb.size(); ++j)
      into.layers[i].gb[j] += from.layers[i].gb[j];
  }
}

// Accuracy of infer-mode predictions over an in-memory dataset.
inline double infer_accuracy(const NetworkState<float>& state, const PixelDataset& data,
                             int eval_batch = 100) {
  long long correct = 0;
  for (int start = 0; start < data.count(); start += eval_batch) {
    const int n = std::min(eval_batch, data.count() - start);
    Tensor<float> batch(n, 1, data.height, data.width);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), start);
    fill_batch(data, idx, 0, n, batch);
    const Forward<float> fwd = forward(state, batch, RunMode::infer);
    const int classes = fwd.probs.features();
    for (int bi = 0; bi < n; ++bi) {
      const float* row = fwd.probs.row(bi);
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c;
      if (best == data.labels[start + bi]) ++correct;
    }
  }
  return data.count() ? static_cast<double>(correct) / data.count() : 0.0;
}

}  // namespace detail

// SGD with momentum over seeded epoch shuffles. Every iteration consumes a
// full batch: when the pool runs short it is reshuffled and the batch wraps
// into the fresh ordering. Loss is recorded each iteration, validation
// accuracy every cfg.val_every iterations when a validation set is given.
inline std::pair<NetworkState<float>, TrainReport> train_pixels(NetworkSpec spec,
                                                                const PixelDataset& data,
                                                                const PixelDataset& val,
                                                                const TrainConfig& cfg) {
  if (cfg.batch < 1) throw ArgumentError("batch must be >= 1");
  if (cfg.iterations < 0) throw ArgumentError("iterations must be >= 0");
  if (cfg.lanes < 1) throw ArgumentError("lanes must be >= 1");
  if (!(cfg.dropout_p >= 0.0f && cfg.dropout_p < 1.0f))
    throw ArgumentError("dropout p must be in [0,1)");
  for (LayerSpec& layer : spec.layers)
    if (auto* drop = std::get_if<DropoutSpec>(&layer)) drop->p = cfg.dropout_p;

  const auto t_start = std::chrono::steady_clock::now();
  NetworkState<float> state = init_state<float>(spec, cfg.seed);
  TrainReport report;
  if (cfg.iterations == 0) return {std::move(state), std::move(report)};

  if (data.count() == 0) throw ArgumentError("training set is empty");
  const int classes = output_classes(spec);
  for (int l : data.labels)
    if (l < 0 || l >= classes)
      throw ArgumentError("training label " + std::to_string(l) + " outside " +
                          std::to_string(classes) + "-class spec");
  for (int l : val.labels)
    if (l < 0 || l >= classes)
      throw ArgumentError("validation label " + std::to_string(l) + " outside " +
                          std::to_string(classes) + "-class spec");

  Rng shuffle_rng(derive_seed(cfg.seed, 0x73687566ULL));
  std::vector<int> pool(data.count());
  std::iota(pool.begin(), pool.end(), 0);
  shuffle_rng.shuffle(pool);
  std::size_t pos = 0;

  const std::uint64_t dropout_seed = derive_seed(cfg.seed, 0x64726f70ULL);
  const int lanes = std::min(cfg.lanes, cfg.batch);
  std::vector<int> batch_idx(cfg.batch);

  for (int t = 1; t <= cfg.iterations; ++t) {
    for (int i = 0; i < cfg.batch; ++i) {
      if (pos == pool.size()) {
        shuffle_rng.shuffle(pool);
        pos = 0;
      }
      batch_idx[i] = pool[pos++];
    }
    std::vector<int> batch_labels(cfg.batch);
    for (int i = 0; i < cfg.batch; ++i) batch_labels[i] = data.labels[batch_idx[i]];

    Gradients<float> grads = zero_gradients(state);
    double loss = 0.0;

    if (lanes == 1) {
      Tensor<float> batch(cfg.batch, 1, data.height, data.width);
      detail::fill_batch(data, batch_idx, 0, cfg.batch, batch);
      const DropoutRng drng{dropout_seed, static_cast<std::uint64_t>(t), 0};
      const Forward<float> fwd = forward(state, batch, RunMode::train, drng);
      loss = mean_cross_entropy(fwd.probs, batch_labels);
      backward_into(state, fwd, batch_labels, grads);
    } else {
      struct LaneOut {
        Gradients<float> grads;
        double loss_sum = 0.0;
      };
      std::vector<LaneOut> outs(lanes);
      auto run_lane = [&](int lane) {
        const int lo = static_cast<int>(static_cast<long long>(cfg.batch) * lane / lanes);
        const int hi = static_cast<int>(static_cast<long long>(cfg.batch) * (lane + 1) / lanes);
        if (lo == hi) {
          outs[lane].grads = zero_gradients(state);
          return;
        }
        Tensor<float> sub(hi - lo, 1, data.height, data.width);
        detail::fill_batch(data, batch_idx, lo, hi, sub);
        std::vector<int> sub_labels(batch_labels.begin() + lo, batch_labels.begin() + hi);
        const DropoutRng drng{dropout_seed, static_cast<std::uint64_t>(t),
                              static_cast<std::uint64_t>(lo)};
        const Forward<float> fwd = forward(state, sub, RunMode::train, drng);
        for (int bi = 0; bi < hi - lo; ++bi)
          outs[lane].loss_sum += -std::log(static_cast<double>(fwd.probs.row(bi)[sub_labels[bi]]));
        outs[lane].grads = zero_gradients(state);
        backward_into(state, fwd, sub_labels, outs[lane].grads,
                      static_cast<double>(cfg.batch));
      };
      std::vector<std::thread> threads;
      for (int lane = 1; lane < lanes; ++lane) threads.emplace_back(run_lane, lane);
      run_lane(0);
      for (auto& th : threads) th.join();
      for (int lane = 0; lane < lanes; ++lane) {
        detail::add_gradients(grads, outs[lane].grads);
        loss += outs[lane].loss_sum;
      }
      loss /= static_cast<double>(cfg.batch);
    }

    if (!std::isfinite(loss))
      throw DivergenceError("non-finite loss at iteration " + std::to_string(t) +
                            " (learning-rate divergence; lower the learning rate)");
    report.loss.push_back(loss);

    float lr = cfg.learning_rate;
    if (cfg.lr_decay_step > 0)
      lr *= std::pow(cfg.lr_decay_factor, static_cast<float>((t - 1) / cfg.lr_decay_step));
    sgd_step(state, grads, lr, cfg.momentum);

    if (cfg.val_every > 0 && t % cfg.val_every == 0 && val.count() > 0)
      report.val_acc.emplace_back(t, detail::infer_accuracy(state, val));
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(state), std::move(report)};
}

// Manifest-driven entry point: loads every referenced image (must match the
// spec's input plane) and trains on the pixel data.
inline std::pair<NetworkState<float>, TrainReport> train(const NetworkSpec& spec,
                                                         const Manifest& train_manifest,
                                                         const Manifest& val_manifest,
                                                         const TrainConfig& cfg) {
  const auto shapes = chain_shapes(spec);
  if (shapes[0].c != 1) throw ShapeError("training expects single-channel input");
  if (cfg.iterations > 0 && train_manifest.samples.empty())
    throw ArgumentError("training manifest is empty");
  const PixelDataset data = load_pixels(train_manifest, shapes[0].h, shapes[0].w);
  const PixelDataset val = val_manifest.samples.empty()
                               ? PixelDataset{shapes[0].h, shapes[0].w, {}, {}, {}}
                               : load_pixels(val_manifest, shapes[0].h, shapes[0].w);
  return train_pixels(spec, data, val, cfg);
}

}  // namespace gaze
