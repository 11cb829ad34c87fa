#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/net.hpp"
#include "gaze/train.hpp"

namespace gaze {

// k x k prediction counts; rows are true classes, columns predictions.
struct ConfusionMatrix {
  int k = 0;
  std::vector<long long> counts;

  explicit ConfusionMatrix(int k_ = 0) : k(k_), counts(static_cast<std::size_t>(k_) * k_, 0) {}

  long long& at(int truth, int predicted) { return counts[static_cast<std::size_t>(truth) * k + predicted]; }
  long long at(int truth, int predicted) const { return counts[static_cast<std::size_t>(truth) * k + predicted]; }
  long long total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }
  long long trace() const {
    long long t = 0;
    for (int i = 0; i < k; ++i) t += at(i, i);
    return t;
  }
};

struct NormalizedConfusion {
  int k = 0;
  std::vector<double> values;
  std::vector<int> zero_rows;  // rows with no samples, left all-zero
};

// Row-stochastic form; all-zero rows stay zero and are flagged.
inline NormalizedConfusion normalize_confusion(const ConfusionMatrix& m) {
  NormalizedConfusion out;
  out.k = m.k;
  out.values.assign(m.counts.size(), 0.0);
  for (int r = 0; r < m.k; ++r) {
    long long row_sum = 0;
    for (int c = 0; c < m.k; ++c) row_sum += m.at(r, c);
    if (row_sum == 0) {
      out.zero_rows.push_back(r);
      continue;
    }
    for (int c = 0; c < m.k; ++c)
      out.values[static_cast<std::size_t>(r) * m.k + c] =
          static_cast<double>(m.at(r, c)) / static_cast<double>(row_sum);
  }
  return out;
}

struct EvalResult {
  double accuracy = 0.0;  // fraction in [0,1]
  ConfusionMatrix confusion;
};

inline EvalResult evaluate_pixels(const NetworkState<float>& state, const PixelDataset& data,
                                  int eval_batch = 100) {
  if (data.count() == 0) throw ArgumentError("evaluate: empty dataset");
  const int classes = output_classes(state.spec);
  for (int l : data.labels)
    if (l < 0 || l >= classes)
      throw ArgumentError("evaluate: label " + std::to_string(l) + " outside " +
                          std::to_string(classes) + "-class network");
  EvalResult result;
  result.confusion = ConfusionMatrix(classes);
  for (int start = 0; start < data.count(); start += eval_batch) {
    const int n = std::min(eval_batch, data.count() - start);
    Tensor<float> batch(n, 1, data.height, data.width);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), start);
    detail::fill_batch(data, idx, 0, n, batch);
    const Forward<float> fwd = forward(state, batch, RunMode::infer);
    for (int bi = 0; bi < n; ++bi) {
      const float* row = fwd.probs.row(bi);
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c;
      ++result.confusion.at(data.labels[start + bi], best);
    }
  }
  result.accuracy =
      static_cast<double>(result.confusion.trace()) / static_cast<double>(result.confusion.total());
  return result;
}

inline EvalResult evaluate(const NetworkState<float>& state, const Manifest& manifest) {
  if (manifest.samples.empty()) throw ArgumentError("evaluate: empty manifest");
  const auto shapes = chain_shapes(state.spec);
  return evaluate_pixels(state, load_pixels(manifest, shapes[0].h, shapes[0].w));
}

struct CrossValReport {
  int k = 0;
  int class_mode = 3;
  std::uint64_t seed = 0;
  std::vector<double> fold_accuracy_percent;
  std::vector<long long> fold_sizes;  // test-set sizes
  double mean_accuracy_percent = 0.0;
  std::vector<ConfusionMatrix> fold_confusions;
};

inline double mean_percent(const std::vector<double>& percents) {
  if (percents.empty()) return 0.0;
  return std::accumulate(percents.begin(), percents.end(), 0.0) /
         static_cast<double>(percents.size());
}

// Person-disjoint k-fold protocol: train on every fold but i, test on fold i.
// class_mode 2 removes undetermined (class 2) samples from both sides before
// training; the iteration asserts no class-2 sample slips through.
inline CrossValReport run_kfold(const NetworkSpec& spec, const Manifest& manifest, int k,
                                const TrainConfig& cfg, int class_mode) {
  if (class_mode != 2 && class_mode != 3)
    throw ArgumentError("class_mode must be 2 or 3");
  if (output_classes(spec) != class_mode)
    throw ArgumentError("network spec output arity does not match class_mode");

  const Manifest pool = class_mode == 2 ? filter_classes(manifest, {0, 1}) : manifest;
  const FoldPlan plan = kfold_split(pool, k, cfg.seed);

  CrossValReport report;
  report.k = k;
  report.class_mode = class_mode;
  report.seed = cfg.seed;

  for (int fold = 0; fold < k; ++fold) {
    Manifest train_m, test_m;
    train_m.name = pool.name + "-fold" + std::to_string(fold) + "-train";
    test_m.name = pool.name + "-fold" + std::to_string(fold) + "-test";
    train_m.scene_map = test_m.scene_map = pool.scene_map;
    for (const Sample& s : pool.samples) {
      if (class_mode == 2 && s.label == 2)
        throw Error("internal: class-2 sample in 2-class protocol");
      (plan.fold_of(s.person_id) == fold ? test_m : train_m).samples.push_back(s);
    }
    try {
      auto [state, train_report] = train(spec, train_m, Manifest{}, cfg);
      (void)train_report;
      const EvalResult eval = evaluate(state, test_m);
      report.fold_accuracy_percent.push_back(eval.accuracy * 100.0);
      report.fold_sizes.push_back(static_cast<long long>(test_m.samples.size()));
      report.fold_confusions.push_back(eval.confusion);
    } catch (const DivergenceError& e) {
      throw DivergenceError("fold " + std::to_string(fold) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(fold) + ": " + e.what());
    }
  }
  report.mean_accuracy_percent = mean_percent(report.fold_accuracy_percent);
  return report;
}

}  // namespace gaze
