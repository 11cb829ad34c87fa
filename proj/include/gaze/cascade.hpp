#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "gaze/error.hpp"
#include "gaze/image.hpp"
#include "gaze/integral.hpp"

namespace gaze {

// Viola-Jones style cascades parsed from the de-facto "new style" XML schema
// (stageType BOOST, featureType HAAR or LBP, stump-only trees). Anything the
// runtime below cannot evaluate faithfully is rejected at parse time.

enum class FeatureKind { haar, lbp };

struct HaarRect {
  Rect r;
  double weight = 0.0;
};

// Weighted difference of 2-3 rectangle sums in base-window coordinates.
struct HaarFeature {
  std::vector<HaarRect> rects;
};

// Multi-block LBP: `cell` is the top-left block of a 3x3 block grid.
struct LbpFeature {
  Rect cell;
};

// Depth-1 tree. Haar stumps split on a threshold; LBP stumps on membership of
// the 8-bit code in a 256-bit subset table.
struct WeakStump {
  int feature = 0;
  double threshold = 0.0;
  std::array<std::uint32_t, 8> subset{};
  double left = 0.0;
  double right = 0.0;
};

struct Stage {
  double threshold = 0.0;
  std::vector<WeakStump> weak;
};

struct CascadeModel {
  FeatureKind feature_kind = FeatureKind::lbp;
  int window_w = 0;
  int window_h = 0;
  std::vector<Stage> stages;
  std::vector<HaarFeature> haar_features;
  std::vector<LbpFeature> lbp_features;

  std::size_t feature_count() const {
    return feature_kind == FeatureKind::haar ? haar_features.size() : lbp_features.size();
  }
};

struct Detection {
  Rect rect;
  int neighbors = 1;
};

namespace detail {

inline int iround(double v) { return static_cast<int>(std::lround(v)); }

inline std::vector<std::string> split_tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline long long parse_ll(const std::string& tok, const char* where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("cascade: bad integer '") + tok + "' in " + where);
  }
}

inline double parse_num(const std::string& tok, const char* where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("cascade: bad number '") + tok + "' in " + where);
  }
}

}  // namespace detail

inline CascadeModel parse_cascade(const std::string& xml_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(xml_text);
    pt::read_xml(in, tree, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("cascade: malformed XML: ") + e.what());
  }

  const auto storage = tree.get_child_optional("opencv_storage");
  if (!storage) throw ParseError("cascade: missing <opencv_storage> root");
  const auto cascade = storage->get_child_optional("cascade");
  if (!cascade)
    throw UnsupportedError("cascade: no <cascade> element (old-style files are not supported)");

  CascadeModel model;
  const std::string stage_type = cascade->get<std::string>("stageType", "");
  if (stage_type != "BOOST")
    throw UnsupportedError("cascade: unsupported stageType '" + stage_type + "'");
  const std::string feature_type = cascade->get<std::string>("featureType", "");
  if (feature_type == "HAAR") {
    model.feature_kind = FeatureKind::haar;
  } else if (feature_type == "LBP") {
    model.feature_kind = FeatureKind::lbp;
  } else {
    throw UnsupportedError("cascade: unsupported featureType '" + feature_type + "'");
  }
  model.window_w = cascade->get<int>("width", 0);
  model.window_h = cascade->get<int>("height", 0);
  if (model.window_w < 1 || model.window_h < 1)
    throw ParseError("cascade: missing or non-positive base window size");

  // --- stages ---
  const auto stages = cascade->get_child_optional("stages");
  if (!stages) throw ParseError("cascade: missing <stages>");
  const bool is_haar = model.feature_kind == FeatureKind::haar;
  for (const auto& [key, stage_node] : *stages) {
    if (key != "_") continue;
    Stage stage;
    stage.threshold = stage_node.get<double>("stageThreshold");
    const auto weak_list = stage_node.get_child_optional("weakClassifiers");
    if (!weak_list) throw ParseError("cascade: stage without <weakClassifiers>");
    for (const auto& [wkey, weak_node] : *weak_list) {
      if (wkey != "_") continue;
      WeakStump stump;
      const auto nodes = detail::split_tokens(weak_node.get<std::string>("internalNodes", ""));
      const auto leaves = detail::split_tokens(weak_node.get<std::string>("leafValues", ""));
      const std::size_t expect = is_haar ? 4u : 11u;
      if (nodes.size() != expect || leaves.size() != 2)
        throw UnsupportedError(
            "cascade: weak classifier in stage " + std::to_string(model.stages.size()) +
            " is not a stump (trees of depth > 1 are not supported)");
      if (nodes[0] != "0" || nodes[1] != "-1")
        throw UnsupportedError("cascade: weak classifier internal links are not stump-shaped");
      stump.feature = static_cast<int>(detail::parse_ll(nodes[2], "internalNodes"));
      if (is_haar) {
        stump.threshold = detail::parse_num(nodes[3], "internalNodes");
      } else {
        for (int i = 0; i < 8; ++i)
          stump.subset[i] = static_cast<std::uint32_t>(
              static_cast<std::int64_t>(detail::parse_ll(nodes[3 + i], "internalNodes")));
      }
      stump.left = detail::parse_num(leaves[0], "leafValues");
      stump.right = detail::parse_num(leaves[1], "leafValues");
      stage.weak.push_back(std::move(stump));
    }
    if (stage.weak.empty()) throw ParseError("cascade: stage with no weak classifiers");
    model.stages.push_back(std::move(stage));
  }
  if (model.stages.empty()) throw ParseError("cascade: no stages");
  const int declared_stages = cascade->get<int>("stageNum", -1);
  if (declared_stages >= 0 && declared_stages != static_cast<int>(model.stages.size()))
    throw ParseError("cascade: stageNum " + std::to_string(declared_stages) +
                     " does not match " + std::to_string(model.stages.size()) +
                     " parsed stages");

  // --- features ---
  const auto features = cascade->get_child_optional("features");
  if (!features) throw ParseError("cascade: missing <features>");
  std::size_t feature_index = 0;
  for (const auto& [key, feat_node] : *features) {
    if (key != "_") continue;
    if (is_haar) {
      const int tilted = feat_node.get<int>("tilted", 0);
      if (tilted != 0)
        throw UnsupportedError("cascade: tilted Haar feature at index " +
                               std::to_string(feature_index));
      HaarFeature feat;
      const auto rects = feat_node.get_child_optional("rects");
      if (!rects) throw ParseError("cascade: Haar feature without <rects>");
      for (const auto& [rkey, rect_node] : *rects) {
        if (rkey != "_") continue;
        const auto toks = detail::split_tokens(rect_node.get_value<std::string>());
        if (toks.size() != 5) throw ParseError("cascade: Haar rect needs 'x y w h weight'");
        HaarRect hr;
        hr.r.x = static_cast<int>(detail::parse_ll(toks[0], "rects"));
        hr.r.y = static_cast<int>(detail::parse_ll(toks[1], "rects"));
        hr.r.w = static_cast<int>(detail::parse_ll(toks[2], "rects"));
        hr.r.h = static_cast<int>(detail::parse_ll(toks[3], "rects"));
        hr.weight = detail::parse_num(toks[4], "rects");
        if (hr.r.x < 0 || hr.r.y < 0 || hr.r.w < 1 || hr.r.h < 1 ||
            hr.r.right() > model.window_w || hr.r.bottom() > model.window_h)
          throw ParseError("cascade: Haar rect outside base window at feature " +
                           std::to_string(feature_index));
        feat.rects.push_back(hr);
      }
      if (feat.rects.empty() || feat.rects.size() > 3)
        throw UnsupportedError("cascade: Haar feature " + std::to_string(feature_index) +
                               " has " + std::to_string(feat.rects.size()) +
                               " rects (supported: 1-3)");
      model.haar_features.push_back(std::move(feat));
    } else {
      const auto rect_text = feat_node.get_optional<std::string>("rect");
      if (!rect_text) throw ParseError("cascade: LBP feature without <rect>");
      const auto toks = detail::split_tokens(*rect_text);
      if (toks.size() != 4) throw ParseError("cascade: LBP rect needs 'x y w h'");
      LbpFeature feat;
      feat.cell.x = static_cast<int>(detail::parse_ll(toks[0], "rect"));
      feat.cell.y = static_cast<int>(detail::parse_ll(toks[1], "rect"));
      feat.cell.w = static_cast<int>(detail::parse_ll(toks[2], "rect"));
      feat.cell.h = static_cast<int>(detail::parse_ll(toks[3], "rect"));
      if (feat.cell.x < 0 || feat.cell.y < 0 || feat.cell.w < 1 || feat.cell.h < 1 ||
          feat.cell.x + 3 * feat.cell.w > model.window_w ||
          feat.cell.y + 3 * feat.cell.h > model.window_h)
        throw ParseError("cascade: LBP 3x3 grid outside base window at feature " +
                         std::to_string(feature_index));
      model.lbp_features.push_back(std::move(feat));
    }
    ++feature_index;
  }
  if (model.feature_count() == 0) throw ParseError("cascade: no features");

  for (const auto& stage : model.stages)
    for (const auto& w : stage.weak)
      if (w.feature < 0 || static_cast<std::size_t>(w.feature) >= model.feature_count())
        throw ParseError("cascade: weak classifier references feature " +
                         std::to_string(w.feature) + " of " +
                         std::to_string(model.feature_count()));

  return model;
}

inline CascadeModel load_cascade(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cascade file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cascade(buf.str());
}

// pass == true means every stage passed; otherwise failed_stage identifies
// the first rejecting stage.
struct WindowDecision {
  bool pass = false;
  int failed_stage = -1;
};

namespace detail {

struct ScaledWindow {
  int x, y, w, h;
};

inline ScaledWindow scale_window(const CascadeModel& m, const IntegralImage& ii, int ox, int oy,
                                 double scale) {
  if (scale <= 0.0) throw ArgumentError("window scale must be positive");
  const int sw = std::max(1, iround(m.window_w * scale));
  const int sh = std::max(1, iround(m.window_h * scale));
  if (ox < 0 || oy < 0 || ox + sw > ii.width() || oy + sh > ii.height())
    throw BoundsError("scaled detection window outside image");
  return {ox, oy, sw, sh};
}

// Maps a base-window rect into the scaled window, clamped so rounding slop
// can never reach outside it.
inline Rect scale_rect(const Rect& r, const ScaledWindow& win, double scale) {
  int x = win.x + iround(r.x * scale);
  int y = win.y + iround(r.y * scale);
  int w = std::max(1, iround(r.w * scale));
  int h = std::max(1, iround(r.h * scale));
  x = std::min(x, win.x + win.w - 1);
  y = std::min(y, win.y + win.h - 1);
  w = std::min(w, win.x + win.w - x);
  h = std::min(h, win.y + win.h - y);
  return {x, y, w, h};
}

}  // namespace detail

// Haar stump rule: raw feature sum vs. threshold scaled by the window's
// standard deviation (floored to 1 on flat windows) and the scaled window
// area, which keeps file thresholds valid across scales.
inline WindowDecision eval_haar_window(const CascadeModel& model, const IntegralImage& ii,
                                       int origin_x, int origin_y, double scale) {
  if (model.feature_kind != FeatureKind::haar)
    throw ArgumentError("eval_haar_window requires a Haar cascade");
  const auto win = detail::scale_window(model, ii, origin_x, origin_y, scale);
  const auto [mean, var] = window_mean_var(ii, {win.x, win.y, win.w, win.h});
  (void)mean;
  const double stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  const double norm = stddev * static_cast<double>(win.w) * static_cast<double>(win.h);

  for (std::size_t si = 0; si < model.stages.size(); ++si) {
    const Stage& stage = model.stages[si];
    double sum = 0.0;
    for (const WeakStump& stump : stage.weak) {
      const HaarFeature& feat = model.haar_features[stump.feature];
      double raw = 0.0;
      for (const HaarRect& hr : feat.rects)
        raw += hr.weight * static_cast<double>(rect_sum(ii, detail::scale_rect(hr.r, win, scale)));
      sum += raw < stump.threshold * norm ? stump.left : stump.right;
    }
    if (sum < stage.threshold) return {false, static_cast<int>(si)};
  }
  return {true, -1};
}

namespace detail {

// 8-bit MB-LBP code. Neighbor order (MSB to LSB): top-left, top, top-right,
// right, bottom-right, bottom, bottom-left, left; ties (neighbor == center)
// set the bit.
inline std::uint32_t lbp_code(const std::array<std::uint64_t, 9>& b) {
  const std::uint64_t c = b[4];
  std::uint32_t code = 0;
  if (b[0] >= c) code |= 128u;
  if (b[1] >= c) code |= 64u;
  if (b[2] >= c) code |= 32u;
  if (b[5] >= c) code |= 16u;
  if (b[8] >= c) code |= 8u;
  if (b[7] >= c) code |= 4u;
  if (b[6] >= c) code |= 2u;
  if (b[3] >= c) code |= 1u;
  return code;
}

}  // namespace detail

// Integer block sums throughout; only stage accumulation uses the stored
// floating leaf values.
inline WindowDecision eval_lbp_window(const CascadeModel& model, const IntegralImage& ii,
                                      int origin_x, int origin_y, double scale) {
  if (model.feature_kind != FeatureKind::lbp)
    throw ArgumentError("eval_lbp_window requires an LBP cascade");
  const auto win = detail::scale_window(model, ii, origin_x, origin_y, scale);

  for (std::size_t si = 0; si < model.stages.size(); ++si) {
    const Stage& stage = model.stages[si];
    double sum = 0.0;
    for (const WeakStump& stump : stage.weak) {
      const LbpFeature& feat = model.lbp_features[stump.feature];
      // rounding may not leave room for 3 blocks; cap at a third of the window
      const int bw = std::max(1, std::min(detail::iround(feat.cell.w * scale), win.w / 3));
      const int bh = std::max(1, std::min(detail::iround(feat.cell.h * scale), win.h / 3));
      if (3 * bw > win.w || 3 * bh > win.h)
        throw BoundsError("scaled LBP grid does not fit the window");
      int bx = win.x + detail::iround(feat.cell.x * scale);
      int by = win.y + detail::iround(feat.cell.y * scale);
      bx = std::max(std::min(bx, win.x + win.w - 3 * bw), win.x);
      by = std::max(std::min(by, win.y + win.h - 3 * bh), win.y);
      std::array<std::uint64_t, 9> blocks{};
      for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
          blocks[row * 3 + col] = rect_sum(ii, {bx + col * bw, by + row * bh, bw, bh});
      const std::uint32_t code = detail::lbp_code(blocks);
      const bool in_subset = (stump.subset[code >> 5] >> (code & 31u)) & 1u;
      sum += in_subset ? stump.left : stump.right;
    }
    if (sum < stage.threshold) return {false, static_cast<int>(si)};
  }
  return {true, -1};
}

inline WindowDecision eval_window(const CascadeModel& model, const IntegralImage& ii, int ox,
                                  int oy, double scale) {
  return model.feature_kind == FeatureKind::haar ? eval_haar_window(model, ii, ox, oy, scale)
                                                 : eval_lbp_window(model, ii, ox, oy, scale);
}

struct DetectParams {
  double scale_factor = 1.1;
  int min_size = 0;   // smallest accepted window side, 0 = base window
  int max_size = 0;   // largest accepted window side, 0 = unbounded
  double step = 2.0;  // slide stride in pixels at scale 1, grows with scale
};

// Slides the window over every scale (base * scale_factor^k). Deterministic:
// scale-major, then row-major.
inline std::vector<Detection> detect_multiscale(const CascadeModel& model, const GrayImage& img,
                                                const DetectParams& params = {}) {
  if (params.scale_factor <= 1.0) throw ArgumentError("scale_factor must be > 1");
  if (params.step <= 0.0) throw ArgumentError("step must be positive");
  const IntegralImage ii(img);
  std::vector<Detection> out;
  for (int k = 0;; ++k) {
    const double scale = std::pow(params.scale_factor, k);
    const int sw = std::max(1, detail::iround(model.window_w * scale));
    const int sh = std::max(1, detail::iround(model.window_h * scale));
    if (sw > img.width() || sh > img.height()) break;
    if (params.max_size > 0 && (sw > params.max_size || sh > params.max_size)) break;
    if (sw < params.min_size || sh < params.min_size) continue;
    const int stride = std::max(1, detail::iround(params.step * scale));
    for (int y = 0; y + sh <= img.height(); y += stride)
      for (int x = 0; x + sw <= img.width(); x += stride)
        if (eval_window(model, ii, x, y, scale).pass)
          out.push_back({Rect{x, y, sw, sh}, 1});
  }
  return out;
}

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Two boxes are similar when every coordinate and side differs by at most
// eps times their mean side length.
inline bool rects_similar(const Rect& a, const Rect& b, double eps) {
  const double d = eps * (a.w + a.h + b.w + b.h) / 4.0;
  return std::abs(a.x - b.x) <= d && std::abs(a.y - b.y) <= d && std::abs(a.w - b.w) <= d &&
         std::abs(a.h - b.h) <= d;
}

}  // namespace detail

// Partitions raw boxes into similarity classes (transitive closure) and emits
// each class's average box. Classes of size <= min_neighbors are dropped.
inline std::vector<Detection> group_rectangles(const std::vector<Detection>& raw,
                                               int min_neighbors, double eps) {
  if (eps < 0.0) throw ArgumentError("eps must be >= 0");
  if (raw.empty()) return {};
  const int n = static_cast<int>(raw.size());
  detail::UnionFind uf(raw.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (detail::rects_similar(raw[i].rect, raw[j].rect, eps)) uf.unite(i, j);

  struct Acc {
    long long x = 0, y = 0, w = 0, h = 0;
    int count = 0;
  };
  std::vector<Acc> acc(raw.size());
  for (int i = 0; i < n; ++i) {
    Acc& a = acc[uf.find(i)];
    a.x += raw[i].rect.x;
    a.y += raw[i].rect.y;
    a.w += raw[i].rect.w;
    a.h += raw[i].rect.h;
    a.count += raw[i].neighbors;
  }
  std::vector<Detection> out;
  for (const Acc& a : acc) {
    if (a.count <= min_neighbors || a.count == 0) continue;
    const auto avg = [&](long long v) {
      return static_cast<int>(std::llround(static_cast<double>(v) / a.count));
    };
    out.push_back({Rect{avg(a.x), avg(a.y), avg(a.w), avg(a.h)}, a.count});
  }
  std::sort(out.begin(), out.end(), [](const Detection& l, const Detection& r) {
    return std::tie(l.rect.y, l.rect.x, l.rect.w, l.rect.h, l.neighbors) <
           std::tie(r.rect.y, r.rect.x, r.rect.w, r.rect.h, r.neighbors);
  });
  return out;
}

// `x y w h neighbors`, one box per line.
inline std::string detections_to_text(const std::vector<Detection>& dets) {
  std::ostringstream out;
  for (const Detection& d : dets)
    out << d.rect.x << ' ' << d.rect.y << ' ' << d.rect.w << ' ' << d.rect.h << ' '
        << d.neighbors << '\n';
  return out.str();
}

// --- face-then-eyes composition ---

struct FaceLandmarks {
  Rect face;
  Rect left_eye;   // smaller x-center, i.e. image-left
  Rect right_eye;
};

enum class Reject {
  none,
  no_face,
  multiple_faces,
  eyes_not_two,
  eyes_overlap,
  eye_too_small,  // produced by the composer quality gate
};

inline const char* reject_name(Reject r) {
  switch (r) {
    case Reject::none: return "none";
    case Reject::no_face: return "no_face";
    case Reject::multiple_faces: return "multiple_faces";
    case Reject::eyes_not_two: return "eyes_not_two";
    case Reject::eyes_overlap: return "eyes_overlap";
    case Reject::eye_too_small: return "eye_too_small";
  }
  return "unknown";
}

struct FaceResult {
  std::optional<FaceLandmarks> landmarks;
  Reject reject = Reject::none;

  bool accepted() const { return landmarks.has_value(); }
};

struct PipelineParams {
  DetectParams face{1.1, 0, 0, 2.0};
  DetectParams eyes{1.1, 12, 0, 1.0};  // 12 px minimum eye window
  int min_neighbors = 3;
  double eps = 0.2;
  double eye_region_frac = 0.6;  // eyes are searched in the top fraction of the face
};

// LBP face cascade over the whole frame, then a Haar eye cascade restricted
// to the upper part of the single detected face. Rejections are data for the
// dataset-cleaning gate, not errors.
inline FaceResult detect_face_then_eyes(const CascadeModel& face_model,
                                        const CascadeModel& eye_model, const GrayImage& img,
                                        const PipelineParams& params = {}) {
  if (face_model.feature_kind != FeatureKind::lbp)
    throw ArgumentError("face cascade must be LBP-kind");
  if (eye_model.feature_kind != FeatureKind::haar)
    throw ArgumentError("eye cascade must be Haar-kind");

  const auto faces = group_rectangles(detect_multiscale(face_model, img, params.face),
                                      params.min_neighbors, params.eps);
  if (faces.empty()) return {std::nullopt, Reject::no_face};
  if (faces.size() > 1) return {std::nullopt, Reject::multiple_faces};

  Rect face = faces[0].rect;
  face.x = detail::clampi(face.x, 0, img.width() - 1);
  face.y = detail::clampi(face.y, 0, img.height() - 1);
  face.w = std::min(face.w, img.width() - face.x);
  face.h = std::min(face.h, img.height() - face.y);

  Rect region{face.x, face.y, face.w,
              std::max(1, detail::iround(face.h * params.eye_region_frac))};
  region.h = std::min(region.h, img.height() - region.y);
  const GrayImage sub = crop(img, region);
  auto eyes = group_rectangles(detect_multiscale(eye_model, sub, params.eyes),
                               params.min_neighbors, params.eps);
  if (eyes.size() != 2) return {std::nullopt, Reject::eyes_not_two};
  for (auto& e : eyes) {
    e.rect.x += region.x;
    e.rect.y += region.y;
  }
  if (rects_overlap(eyes[0].rect, eyes[1].rect)) return {std::nullopt, Reject::eyes_overlap};

  const auto center_x = [](const Rect& r) { return 2 * r.x + r.w; };
  if (center_x(eyes[1].rect) < center_x(eyes[0].rect)) std::swap(eyes[0], eyes[1]);
  if (eyes[0].rect.x >= eyes[1].rect.x)
    return {std::nullopt, Reject::eyes_not_two};  // vertically stacked boxes are not an eye pair

  FaceLandmarks lm{face, eyes[0].rect, eyes[1].rect};
  return {lm, Reject::none};
}

}  // namespace gaze
