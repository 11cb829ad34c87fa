// gazedir: gaze-direction pipeline CLI.
//
// Subcommands: detect, dataset {compose, augment, synth, split}, train, eval,
// kfold, infer, bench. Machine-facing output is JSON on stdout; progress and
// config echoes go to stderr. Exit codes: 0 ok, 2 bad input, 3 bad format,
// 4 numerical divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "gaze/gaze.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitFormat = 3;
constexpr int kExitDiverged = 4;

struct TrainFlags {
  gaze::TrainConfig cfg;
  int classes = 3;

  void attach(CLI::App* cmd, bool with_classes = true) {
    if (with_classes)
      cmd->add_option("--classes", classes, "output classes (2 or 3)")
          ->check(CLI::IsMember({2, 3}))
          ->capture_default_str();
    cmd->add_option("--iterations", cfg.iterations, "training iterations")->capture_default_str();
    cmd->add_option("--batch", cfg.batch, "batch size")->capture_default_str();
    cmd->add_option("--lr", cfg.learning_rate, "base learning rate")->capture_default_str();
    cmd->add_option("--momentum", cfg.momentum, "sgd momentum")->capture_default_str();
    cmd->add_option("--lr-decay-factor", cfg.lr_decay_factor, "learning-rate decay factor")
        ->capture_default_str();
    cmd->add_option("--lr-decay-step", cfg.lr_decay_step,
                    "iterations between decays (0 = never)")
        ->capture_default_str();
    cmd->add_option("--dropout", cfg.dropout_p, "dropout probability")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "rng seed")->capture_default_str();
    cmd->add_option("--lanes", cfg.lanes, "parallel lanes (1 = bit-deterministic)")
        ->capture_default_str();
    cmd->add_option("--val-every", cfg.val_every, "validation cadence in iterations")
        ->capture_default_str();
  }

  json echo() const {
    return {{"classes", classes},
            {"iterations", cfg.iterations},
            {"batch", cfg.batch},
            {"lr", cfg.learning_rate},
            {"momentum", cfg.momentum},
            {"lr_decay_factor", cfg.lr_decay_factor},
            {"lr_decay_step", cfg.lr_decay_step},
            {"dropout", cfg.dropout_p},
            {"seed", cfg.seed},
            {"lanes", cfg.lanes},
            {"val_every", cfg.val_every}};
  }
};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

json confusion_json(const gaze::ConfusionMatrix& m) {
  json counts = json::array();
  json normalized = json::array();
  const gaze::NormalizedConfusion norm = normalize_confusion(m);
  for (int r = 0; r < m.k; ++r) {
    json crow = json::array();
    json nrow = json::array();
    for (int c = 0; c < m.k; ++c) {
      crow.push_back(m.at(r, c));
      nrow.push_back(norm.values[static_cast<std::size_t>(r) * m.k + c]);
    }
    counts.push_back(crow);
    normalized.push_back(nrow);
  }
  json out{{"counts", counts}, {"normalized", normalized}};
  if (!norm.zero_rows.empty()) out["zero_rows"] = norm.zero_rows;
  return out;
}

gaze::Manifest load_manifest_resolved(const std::string& path) {
  return gaze::resolve_paths(gaze::load_manifest_file(path), path);
}

// '-' selects stdin.
std::unique_ptr<std::istream> open_frames(const std::string& path) {
  if (path == "-") return std::make_unique<std::istream>(std::cin.rdbuf());
  auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*file) throw gaze::IoError("cannot open frame stream: " + path);
  return file;
}

json latency_json(const gaze::LatencySummary& s) {
  return {{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"count", s.count}};
}

json session_json(const gaze::SessionReport& report) {
  json out;
  out["sampled"] = report.sampled;
  out["accepted"] = report.accepted;
  out["class_counts"] = report.class_counts;
  out["proportions"] = report.proportions;
  if (report.preference_ratio)
    out["preference_ratio"] = *report.preference_ratio;
  else
    out["preference_ratio"] = nullptr;
  if (!report.ratio_absent_reason.empty())
    out["preference_ratio_absent_reason"] = report.ratio_absent_reason;
  out["rejections"] = report.rejections;
  out["pipeline_latency_ms"] = latency_json(report.latency);
  return out;
}

std::string session_text(const gaze::SessionReport& r) {
  std::ostringstream out;
  out << "session summary\n";
  out << "  frames sampled:  " << r.sampled << "\n";
  out << "  frames accepted: " << r.accepted << "\n";
  out << "  gaze right (class 0): " << r.class_counts[0] << "\n";
  out << "  gaze left  (class 1): " << r.class_counts[1] << "\n";
  out << "  undetermined (class 2): " << r.class_counts[2] << "\n";
  if (r.preference_ratio)
    out << "  preference ratio (left / left+right): " << round2(*r.preference_ratio * 100.0)
        << "%\n";
  else
    out << "  preference ratio: undefined (" << r.ratio_absent_reason << ")\n";
  for (const auto& [reason, count] : r.rejections)
    out << "  rejected " << reason << ": " << count << "\n";
  out << "  per-frame latency: median " << round2(r.latency.median_ms) << " ms, p95 "
      << round2(r.latency.p95_ms) << " ms\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaze-direction pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file ([subcommand] sections)")
      ->envname("GAZEDIR_CONFIG");
  app.allow_config_extras(false);

  // --- detect ---
  auto* detect = app.add_subcommand("detect", "face and eye landmarks per frame");
  std::string frames_path, face_path, eye_path;
  bool print_boxes = false;
  detect->add_option("--frames", frames_path, "PNM frame stream ('-' = stdin)")->required();
  detect->add_option("--face-cascade", face_path, "LBP face cascade XML")->required();
  detect->add_option("--eye-cascade", eye_path, "Haar eye cascade XML")->required();
  detect->add_flag("--boxes", print_boxes, "also print grouped face boxes (x y w h neighbors)");

  // --- dataset ---
  auto* dataset = app.add_subcommand("dataset", "dataset construction tools");
  dataset->require_subcommand(1);

  auto* compose = dataset->add_subcommand("compose", "pair-eye images from labelled frames");
  std::string co_person = "p0", co_out_dir = ".", co_manifest, co_source = "adult";
  std::string co_scene0 = "abstract", co_scene1 = "social";
  int co_label = 0;
  bool co_append = false;
  gaze::SamplerConfig co_sampler{0, 1};
  compose->add_option("--frames", frames_path, "PNM frame stream ('-' = stdin)")->required();
  compose->add_option("--face-cascade", face_path, "LBP face cascade XML")->required();
  compose->add_option("--eye-cascade", eye_path, "Haar eye cascade XML")->required();
  compose->add_option("--person", co_person, "person id for every frame")->required();
  compose->add_option("--label", co_label, "class label for every frame")
      ->check(CLI::Range(0, 2))
      ->required();
  compose->add_option("--source", co_source, "adult|child|synthetic")->capture_default_str();
  compose->add_option("--out-dir", co_out_dir, "output image directory")->required();
  compose->add_option("--manifest", co_manifest, "manifest to write")->required();
  compose->add_flag("--append", co_append, "append to an existing manifest");
  compose->add_option("--skip", co_sampler.skip, "leading frames to drop")->capture_default_str();
  compose->add_option("--stride", co_sampler.stride, "keep every Nth frame")
      ->capture_default_str();
  compose->add_option("--scene0", co_scene0, "scene shown on the right (class 0)")
      ->capture_default_str();
  compose->add_option("--scene1", co_scene1, "scene shown on the left (class 1)")
      ->capture_default_str();

  auto* augment_cmd = dataset->add_subcommand("augment", "15x augmentation of a manifest");
  std::string aug_manifest, aug_out_dir, aug_out_manifest;
  augment_cmd->add_option("--manifest", aug_manifest, "input manifest")->required();
  augment_cmd->add_option("--out-dir", aug_out_dir, "output image directory")->required();
  augment_cmd->add_option("--out-manifest", aug_out_manifest, "augmented manifest path")
      ->required();

  auto* synth_cmd = dataset->add_subcommand("synth", "synthetic pair-eye dataset");
  gaze::SynthConfig synth_cfg;
  synth_cfg.n = 100;
  synth_cfg.persons = 5;
  std::string synth_out_dir, synth_manifest, synth_mix = "0.34,0.46,0.20",
                             synth_name = "synthetic";
  synth_cmd->add_option("--seed", synth_cfg.seed, "rng seed")->capture_default_str();
  synth_cmd->add_option("--n", synth_cfg.n, "sample count")->capture_default_str();
  synth_cmd->add_option("--persons", synth_cfg.persons, "synthetic person count")
      ->capture_default_str();
  synth_cmd->add_option("--mix", synth_mix, "class mix fractions c0,c1,c2")
      ->capture_default_str();
  synth_cmd->add_option("--out-dir", synth_out_dir, "output image directory")->required();
  synth_cmd->add_option("--manifest", synth_manifest, "manifest to write")->required();
  synth_cmd->add_option("--name", synth_name, "manifest name")->capture_default_str();

  auto* split_cmd = dataset->add_subcommand("split", "person-disjoint fold plan");
  std::string split_manifest, split_out;
  int split_k = 5;
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--manifest", split_manifest, "input manifest")->required();
  split_cmd->add_option("--k", split_k, "fold count")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "rng seed")->capture_default_str();
  split_cmd->add_option("--out", split_out, "fold plan TSV to write")->required();

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "train the network on a manifest");
  TrainFlags train_flags;
  std::string train_manifest, train_val_manifest, weights_out, report_out;
  train_flags.attach(train_cmd);
  train_cmd->add_option("--manifest", train_manifest, "training manifest")->required();
  train_cmd->add_option("--val-manifest", train_val_manifest, "validation manifest");
  train_cmd->add_option("--weights-out", weights_out, "weight file to write")->required();
  train_cmd->add_option("--report", report_out, "JSONL loss/val report path");

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "accuracy and confusion matrix");
  std::string eval_weights, eval_manifest, eval_out;
  int eval_classes = 3;
  eval_cmd->add_option("--weights", eval_weights, "weight file")->required();
  eval_cmd->add_option("--classes", eval_classes, "output classes (2 or 3)")
      ->check(CLI::IsMember({2, 3}))
      ->capture_default_str();
  eval_cmd->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
  eval_cmd->add_option("--out", eval_out, "also write the JSON report here");

  // --- kfold ---
  auto* kfold_cmd = app.add_subcommand("kfold", "person-disjoint k-fold cross-validation");
  TrainFlags kfold_flags;
  std::string kfold_manifest, kfold_out;
  int kfold_k = 5;
  kfold_flags.attach(kfold_cmd);
  kfold_cmd->add_option("--manifest", kfold_manifest, "dataset manifest")->required();
  kfold_cmd->add_option("--k", kfold_k, "fold count")->capture_default_str();
  kfold_cmd->add_option("--out", kfold_out, "also write the JSON report here");

  // --- infer ---
  auto* infer_cmd = app.add_subcommand("infer", "score a stimulus-video frame stream");
  std::string infer_weights, infer_records_out;
  int infer_classes = 3;
  bool infer_text = false;
  gaze::SamplerConfig infer_sampler;
  infer_cmd->add_option("--frames", frames_path, "PNM frame stream ('-' = stdin)")->required();
  infer_cmd->add_option("--face-cascade", face_path, "LBP face cascade XML")->required();
  infer_cmd->add_option("--eye-cascade", eye_path, "Haar eye cascade XML")->required();
  infer_cmd->add_option("--weights", infer_weights, "weight file")->required();
  infer_cmd->add_option("--classes", infer_classes, "output classes (2 or 3)")
      ->check(CLI::IsMember({2, 3}))
      ->capture_default_str();
  infer_cmd->add_option("--skip", infer_sampler.skip, "leading frames to drop")
      ->capture_default_str();
  infer_cmd->add_option("--stride", infer_sampler.stride, "keep every Nth frame")
      ->capture_default_str();
  infer_cmd->add_option("--records", infer_records_out, "write per-frame records JSON here");
  infer_cmd->add_flag("--text", infer_text, "print the operator text summary to stderr");

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "network forward-pass latency");
  std::string bench_weights;
  int bench_classes = 3, bench_reps = 100;
  std::uint64_t bench_seed = 0;
  bench_cmd->add_option("--weights", bench_weights, "weight file (default: fresh init)");
  bench_cmd->add_option("--classes", bench_classes, "output classes (2 or 3)")
      ->check(CLI::IsMember({2, 3}))
      ->capture_default_str();
  bench_cmd->add_option("--repetitions", bench_reps, "timed repetitions (>= 30)")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed, "init seed when no weights are given")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*detect) {
      const gaze::CascadeModel face_model = gaze::load_cascade(face_path);
      const gaze::CascadeModel eye_model = gaze::load_cascade(eye_path);
      auto in = open_frames(frames_path);
      gaze::FrameReader reader(*in);
      while (auto frame = reader.next()) {
        const gaze::GrayImage gray = gaze::to_gray(*frame);
        if (print_boxes) {
          const auto boxes = gaze::group_rectangles(
              gaze::detect_multiscale(face_model, gray, gaze::PipelineParams{}.face), 3, 0.2);
          std::cout << gaze::detections_to_text(boxes);
        }
        const gaze::FaceResult r = gaze::detect_face_then_eyes(face_model, eye_model, gray);
        if (r.accepted()) {
          const gaze::FaceLandmarks& lm = *r.landmarks;
          std::cout << "FACE " << lm.face.x << ' ' << lm.face.y << ' ' << lm.face.w << ' '
                    << lm.face.h << " EYES " << lm.left_eye.x << ' ' << lm.left_eye.y << ' '
                    << lm.left_eye.w << ' ' << lm.left_eye.h << ' ' << lm.right_eye.x << ' '
                    << lm.right_eye.y << ' ' << lm.right_eye.w << ' ' << lm.right_eye.h << '\n';
        } else {
          std::cout << "REJECT " << gaze::reject_name(r.reject) << '\n';
        }
      }
      return kExitOk;
    }

    if (*compose) {
      const gaze::CascadeModel face_model = gaze::load_cascade(face_path);
      const gaze::CascadeModel eye_model = gaze::load_cascade(eye_path);
      std::filesystem::create_directories(co_out_dir);
      gaze::Manifest manifest;
      if (co_append) {
        manifest = gaze::load_manifest_file(co_manifest);
      } else {
        manifest.name = "composed";
        manifest.scene_map[0] = co_scene0;
        manifest.scene_map[1] = co_scene1;
      }
      gaze::Manifest fresh;
      fresh.name = manifest.name;
      fresh.scene_map = manifest.scene_map;
      auto in = open_frames(frames_path);
      gaze::FrameReader reader(*in);
      long long accepted = 0, rejected = 0;
      while (auto frame = reader.next()) {
        const long long index = reader.index() - 1;
        if (!gaze::is_sampled(index, co_sampler)) continue;
        const gaze::GrayImage gray = gaze::to_gray(*frame);
        const gaze::FaceResult r = gaze::detect_face_then_eyes(face_model, eye_model, gray);
        const gaze::GateResult gate = gaze::quality_gate(r);
        if (!gate.accept) {
          ++rejected;
          std::cerr << "frame " << index << ": reject " << gaze::reject_name(gate.reason)
                    << '\n';
          continue;
        }
        const gaze::PairEyeImage pair =
            gaze::compose_pair(gray, *r.landmarks, co_person, std::to_string(index));
        char name[128];
        std::snprintf(name, sizeof(name), "%s_%06lld_%d.pgm", co_person.c_str(), index,
                      co_label);
        gaze::save_gray_file((std::filesystem::path(co_out_dir) / name).string(), pair.image());
        fresh.samples.push_back(
            {name, co_label, co_person, gaze::parse_source(co_source), std::nullopt});
        ++accepted;
      }
      fresh = gaze::rebase_paths(std::move(fresh), co_out_dir, co_manifest);
      manifest.samples.insert(manifest.samples.end(), fresh.samples.begin(),
                              fresh.samples.end());
      gaze::save_manifest_file(co_manifest, manifest);
      std::cout << accepted << " accepted, " << rejected << " rejected\n";
      return kExitOk;
    }

    if (*augment_cmd) {
      const gaze::Manifest input = load_manifest_resolved(aug_manifest);
      const gaze::Manifest out = gaze::rebase_paths(gaze::augment_dataset(input, aug_out_dir),
                                                    aug_out_dir, aug_out_manifest);
      gaze::save_manifest_file(aug_out_manifest, out);
      std::cout << out.samples.size() << " images\n";
      return kExitOk;
    }

    if (*synth_cmd) {
      std::array<double, 3> mix{};
      if (std::sscanf(synth_mix.c_str(), "%lf,%lf,%lf", &mix[0], &mix[1], &mix[2]) != 3)
        throw gaze::ArgumentError("--mix wants three comma-separated fractions");
      synth_cfg.class_mix = mix;
      const auto items = gaze::synth_generate(synth_cfg);
      const gaze::Manifest manifest = gaze::rebase_paths(
          gaze::synth_write(items, synth_out_dir, synth_name), synth_out_dir, synth_manifest);
      gaze::save_manifest_file(synth_manifest, manifest);
      std::cout << manifest.samples.size() << " images\n";
      return kExitOk;
    }

    if (*split_cmd) {
      const gaze::Manifest manifest = gaze::load_manifest_file(split_manifest);
      const gaze::FoldPlan plan = gaze::kfold_split(manifest, split_k, split_seed);
      gaze::write_file(split_out, gaze::save_fold_plan(plan));
      std::cout << plan.assignment.size() << " persons over " << split_k << " folds\n";
      return kExitOk;
    }

    if (*train_cmd) {
      const gaze::Manifest manifest = load_manifest_resolved(train_manifest);
      gaze::Manifest val;
      if (!train_val_manifest.empty()) val = load_manifest_resolved(train_val_manifest);
      const gaze::NetworkSpec spec =
          gaze::reference_spec(train_flags.classes, train_flags.cfg.dropout_p);
      auto [state, report] = gaze::train(spec, manifest, val, train_flags.cfg);
      gaze::write_file(weights_out, gaze::save_weights(state));
      if (!report_out.empty()) gaze::write_file(report_out, gaze::report_to_jsonl(report));
      json out{{"config", train_flags.echo()},
               {"train_samples", manifest.samples.size()},
               {"iterations_run", report.loss.size()},
               {"wall_seconds", report.wall_seconds},
               {"weights", weights_out}};
      if (!report.loss.empty()) out["final_loss"] = report.loss.back();
      if (!report.val_acc.empty()) out["final_val_acc"] = report.val_acc.back().second;
      std::cout << out.dump(2) << '\n';
      return kExitOk;
    }

    if (*eval_cmd) {
      const std::string bytes = gaze::read_file(eval_weights);
      const gaze::NetworkState<float> state = gaze::load_weights(
          std::vector<std::uint8_t>(bytes.begin(), bytes.end()), gaze::reference_spec(eval_classes));
      const gaze::Manifest manifest = load_manifest_resolved(eval_manifest);
      const gaze::EvalResult result = gaze::evaluate(state, manifest);
      json out{{"config", {{"classes", eval_classes}, {"weights", eval_weights}}},
               {"samples", manifest.samples.size()},
               {"accuracy_percent", round2(result.accuracy * 100.0)},
               {"confusion", confusion_json(result.confusion)}};
      std::cout << out.dump(2) << '\n';
      if (!eval_out.empty()) gaze::write_file(eval_out, out.dump(2) + "\n");
      return kExitOk;
    }

    if (*kfold_cmd) {
      const gaze::Manifest manifest = load_manifest_resolved(kfold_manifest);
      const gaze::NetworkSpec spec =
          gaze::reference_spec(kfold_flags.classes, kfold_flags.cfg.dropout_p);
      const gaze::CrossValReport report =
          gaze::run_kfold(spec, manifest, kfold_k, kfold_flags.cfg, kfold_flags.classes);
      json folds = json::array();
      gaze::ConfusionMatrix total(kfold_flags.classes);
      for (int i = 0; i < report.k; ++i) {
        folds.push_back({{"fold", i},
                         {"accuracy_percent", round2(report.fold_accuracy_percent[i])},
                         {"test_size", report.fold_sizes[i]},
                         {"confusion", confusion_json(report.fold_confusions[i])}});
        for (std::size_t j = 0; j < total.counts.size(); ++j)
          total.counts[j] += report.fold_confusions[i].counts[j];
      }
      json out{{"config", kfold_flags.echo()},
               {"k", report.k},
               {"class_mode", report.class_mode},
               {"seed", report.seed},
               {"folds", folds},
               {"fold_accuracies_percent", json::array()},
               {"mean_accuracy_percent", round2(report.mean_accuracy_percent)},
               {"total_confusion", confusion_json(total)}};
      for (double a : report.fold_accuracy_percent)
        out["fold_accuracies_percent"].push_back(round2(a));
      std::cout << out.dump(2) << '\n';
      if (!kfold_out.empty()) gaze::write_file(kfold_out, out.dump(2) + "\n");
      return kExitOk;
    }

    if (*infer_cmd) {
      const gaze::CascadeModel face_model = gaze::load_cascade(face_path);
      const gaze::CascadeModel eye_model = gaze::load_cascade(eye_path);
      const std::string bytes = gaze::read_file(infer_weights);
      const gaze::NetworkState<float> state =
          gaze::load_weights(std::vector<std::uint8_t>(bytes.begin(), bytes.end()),
                             gaze::reference_spec(infer_classes));
      auto in = open_frames(frames_path);
      const gaze::ClassifyOutcome outcome =
          gaze::classify_stream(face_model, eye_model, state, *in, infer_sampler);
      const gaze::SessionReport report = gaze::summarize(outcome.records);
      json out{{"config",
                {{"classes", infer_classes},
                 {"skip", infer_sampler.skip},
                 {"stride", infer_sampler.stride},
                 {"weights", infer_weights}}},
               {"report", session_json(report)}};
      if (outcome.decode_error) {
        out["decode_error"] = outcome.error_message;
        out["decode_error_frame"] = outcome.error_frame;
      }
      std::cout << out.dump(2) << '\n';
      if (!infer_records_out.empty()) {
        json records = json::array();
        for (const auto& r : outcome.records) {
          json rec{{"frame", r.frame_index},
                   {"gate", gaze::reject_name(r.gate)},
                   {"latency_ms", r.latency_ms}};
          if (r.gate == gaze::Reject::none) {
            rec["class"] = r.cls;
            rec["probs"] = r.probs;
          }
          records.push_back(rec);
        }
        gaze::write_file(infer_records_out, records.dump(2) + "\n");
      }
      if (infer_text) std::cerr << session_text(report);
      if (outcome.decode_error) return kExitFormat;
      return kExitOk;
    }

    if (*bench_cmd) {
      gaze::NetworkState<float> state;
      if (!bench_weights.empty()) {
        const std::string bytes = gaze::read_file(bench_weights);
        state = gaze::load_weights(std::vector<std::uint8_t>(bytes.begin(), bytes.end()),
                                   gaze::reference_spec(bench_classes));
      } else {
        state = gaze::init_state<float>(gaze::reference_spec(bench_classes), bench_seed);
      }
      const gaze::LatencySummary summary = gaze::benchmark(state, bench_reps);
      json out{{"config",
                {{"classes", bench_classes},
                 {"repetitions", bench_reps},
                 {"seed", bench_seed},
                 {"weights", bench_weights}}},
               {"forward_latency_ms", latency_json(summary)}};
      std::cout << out.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const gaze::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const gaze::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const gaze::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const gaze::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
