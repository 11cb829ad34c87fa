#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gaze/composer.hpp"
#include "gaze/error.hpp"
#include "gaze/image.hpp"
#include "gaze/rng.hpp"

namespace gaze {

enum class Source { adult, child, synthetic };

inline const char* source_name(Source s) {
  switch (s) {
    case Source::adult: return "adult";
    case Source::child: return "child";
    case Source::synthetic: return "synthetic";
  }
  return "unknown";
}

inline Source parse_source(const std::string& s) {
  if (s == "adult") return Source::adult;
  if (s == "child") return Source::child;
  if (s == "synthetic") return Source::synthetic;
  throw ParseError("unknown source '" + s + "'");
}

struct Sample {
  std::string path;       // 72x72 P5 image file
  int label = 0;          // 0 right, 1 left, 2 undetermined
  std::string person_id;
  Source source = Source::synthetic;
  std::optional<std::string> augmented_from;  // original sample's path
};

// Ordered sample list plus header metadata. The class-to-scene mapping lives
// here, not in code: which side of the screen shows which scene is a property
// of the recording session.
struct Manifest {
  std::string name;
  std::map<int, std::string> scene_map;  // must cover classes 0 and 1
  std::vector<Sample> samples;
};

namespace detail {

inline void validate_manifest(const Manifest& m) {
  if (m.scene_map.find(0) == m.scene_map.end() || m.scene_map.find(1) == m.scene_map.end())
    throw ParseError("manifest: scene map must cover classes 0 and 1");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const Sample& s = m.samples[i];
    if (s.label < 0 || s.label > 2)
      throw ParseError("manifest: sample " + std::to_string(i) + " has label " +
                       std::to_string(s.label));
    if (s.person_id.empty())
      throw ParseError("manifest: sample " + std::to_string(i) + " has empty person id");
    if (!seen.insert(s.path).second)
      throw ParseError("manifest: duplicate path '" + s.path + "'");
  }
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace detail

// Tab-separated rows `path label person source [augmented_from]`, preceded by
// `# key=value` header lines (name, scene0, scene1, optional scene2).
inline Manifest load_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.erase(body.begin());
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos) continue;  // free-form comment
      const std::string key = body.substr(0, eq);
      const std::string value = body.substr(eq + 1);
      if (key == "name") m.name = value;
      else if (key == "scene0") m.scene_map[0] = value;
      else if (key == "scene1") m.scene_map[1] = value;
      else if (key == "scene2") m.scene_map[2] = value;
      else throw ParseError("manifest line " + std::to_string(line_no) + ": unknown header key '" + key + "'");
      continue;
    }
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 4 && cols.size() != 5)
      throw ParseError("manifest line " + std::to_string(line_no) + ": expected 4 or 5 columns, got " +
                       std::to_string(cols.size()));
    Sample s;
    s.path = cols[0];
    if (cols[1].size() != 1 || cols[1][0] < '0' || cols[1][0] > '2')
      throw ParseError("manifest line " + std::to_string(line_no) + ": bad label '" + cols[1] + "'");
    s.label = cols[1][0] - '0';
    s.person_id = cols[2];
    if (s.person_id.empty())
      throw ParseError("manifest line " + std::to_string(line_no) + ": empty person id");
    try {
      s.source = parse_source(cols[3]);
    } catch (const ParseError&) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": unknown source '" + cols[3] + "'");
    }
    if (cols.size() == 5 && !cols[4].empty()) s.augmented_from = cols[4];
    if (s.path.empty())
      throw ParseError("manifest line " + std::to_string(line_no) + ": empty path");
    m.samples.push_back(std::move(s));
  }
  detail::validate_manifest(m);
  return m;
}

inline std::string save_manifest(const Manifest& m) {
  detail::validate_manifest(m);
  std::ostringstream out;
  out << "# name=" << m.name << '\n';
  for (const auto& [cls, scene] : m.scene_map) out << "# scene" << cls << '=' << scene << '\n';
  for (const Sample& s : m.samples) {
    out << s.path << '\t' << s.label << '\t' << s.person_id << '\t' << source_name(s.source);
    if (s.augmented_from) out << '\t' << *s.augmented_from;
    out << '\n';
  }
  return out.str();
}

// --- augmentation ---

// The fixed 15-variant expansion: identity, the eight +/-6 px shifts, the two
// +/-10 degree rotations, and the four rotate-after-horizontal-shift
// composites. Exactly reproduces the x15 dataset growth.
struct AugmentVariant {
  int dx = 0;
  int dy = 0;
  double degrees = 0.0;
  const char* tag = "id";
};

inline const std::vector<AugmentVariant>& augment_spec() {
  static const std::vector<AugmentVariant> variants = {
      {0, 0, 0.0, "id"},
      {-6, -6, 0.0, "t-6-6"}, {-6, 0, 0.0, "t-6+0"}, {-6, 6, 0.0, "t-6+6"},
      {0, -6, 0.0, "t+0-6"},  {0, 6, 0.0, "t+0+6"},
      {6, -6, 0.0, "t+6-6"},  {6, 0, 0.0, "t+6+0"},  {6, 6, 0.0, "t+6+6"},
      {0, 0, 10.0, "r+10"},   {0, 0, -10.0, "r-10"},
      {6, 0, 10.0, "t+6r+10"},  {-6, 0, 10.0, "t-6r+10"},
      {6, 0, -10.0, "t+6r-10"}, {-6, 0, -10.0, "t-6r-10"},
  };
  return variants;
}

inline GrayImage apply_variant(const GrayImage& img, const AugmentVariant& v) {
  GrayImage out = (v.dx != 0 || v.dy != 0) ? translate(img, v.dx, v.dy) : img;
  if (v.degrees != 0.0) out = rotate(out, v.degrees);
  return out;
}

namespace detail {
inline std::string aug_path(const std::string& original, const char* tag) {
  const std::size_t dot = original.rfind('.');
  if (dot == std::string::npos || original.find('/', dot) != std::string::npos)
    return original + "_" + tag + ".pgm";
  return original.substr(0, dot) + "_" + tag + original.substr(dot);
}
}  // namespace detail

// Emits exactly 15 (sample, image) pairs in the pinned variant order. The
// identity entry is the input sample itself; the 14 others point back to it
// via augmented_from.
inline std::vector<std::pair<Sample, GrayImage>> augment(const Sample& s, const GrayImage& img) {
  if (img.width() != kPairEyeSize || img.height() != kPairEyeSize)
    throw ArgumentError("augment input must be a 72x72 pair-eye image");
  std::vector<std::pair<Sample, GrayImage>> out;
  out.reserve(augment_spec().size());
  for (const AugmentVariant& v : augment_spec()) {
    Sample copy = s;
    if (!(v.dx == 0 && v.dy == 0 && v.degrees == 0.0)) {
      copy.path = detail::aug_path(s.path, v.tag);
      copy.augmented_from = s.path;
    }
    out.emplace_back(std::move(copy), apply_variant(img, v));
  }
  return out;
}

// --- person-disjoint k-fold planning ---

struct FoldPlan {
  int k = 0;
  std::map<std::string, int> assignment;  // person -> fold

  int fold_of(const std::string& person) const {
    const auto it = assignment.find(person);
    if (it == assignment.end()) throw ArgumentError("person '" + person + "' not in fold plan");
    return it->second;
  }
};

// Greedy largest-first person assignment: persons sorted by descending sample
// count (seeded shuffle breaks count ties), each placed into the currently
// lightest fold. No person ever spans folds.
inline FoldPlan kfold_split(const Manifest& m, int k, std::uint64_t seed) {
  if (k < 1) throw ArgumentError("fold count must be >= 1");
  std::map<std::string, long long> counts;
  for (const Sample& s : m.samples) ++counts[s.person_id];
  if (static_cast<int>(counts.size()) < k)
    throw ArgumentError("fewer persons than folds: " + std::to_string(counts.size()) + " < " +
                        std::to_string(k));

  std::vector<std::pair<std::string, long long>> persons(counts.begin(), counts.end());
  Rng rng(derive_seed(seed, 0x6b666f6cULL));
  rng.shuffle(persons);
  std::stable_sort(persons.begin(), persons.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  FoldPlan plan;
  plan.k = k;
  std::vector<long long> load(k, 0);
  for (const auto& [person, count] : persons) {
    const int fold = static_cast<int>(
        std::min_element(load.begin(), load.end()) - load.begin());
    plan.assignment[person] = fold;
    load[fold] += count;
  }
  return plan;
}

inline std::string save_fold_plan(const FoldPlan& plan) {
  std::ostringstream out;
  for (const auto& [person, fold] : plan.assignment) out << person << '\t' << fold << '\n';
  return out.str();
}

inline FoldPlan load_fold_plan(const std::string& text, int k) {
  FoldPlan plan;
  plan.k = k;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 2)
      throw ParseError("fold plan line " + std::to_string(line_no) + ": expected 'person<TAB>fold'");
    plan.assignment[cols[0]] = static_cast<int>(detail::parse_ll(cols[1], "fold plan"));
  }
  return plan;
}

// Retains samples whose label is in `keep`, order preserved. An empty result
// is reported on `warn` but is not an error.
inline Manifest filter_classes(const Manifest& m, const std::set<int>& keep,
                               std::ostream* warn = nullptr) {
  Manifest out;
  out.name = m.name;
  out.scene_map = m.scene_map;
  for (const Sample& s : m.samples)
    if (keep.count(s.label)) out.samples.push_back(s);
  if (out.samples.empty() && warn)
    *warn << "warning: class filter left manifest '" << m.name << "' empty\n";
  return out;
}

inline std::vector<long long> class_counts(const Manifest& m) {
  std::vector<long long> counts(3, 0);
  for (const Sample& s : m.samples) ++counts[s.label];
  return counts;
}

inline std::set<std::string> distinct_persons(const Manifest& m) {
  std::set<std::string> persons;
  for (const Sample& s : m.samples) persons.insert(s.person_id);
  return persons;
}

}  // namespace gaze
