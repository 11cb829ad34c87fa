#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "gaze/dataset.hpp"
#include "gaze/rng.hpp"
#include "testutil.hpp"

using namespace gaze;

namespace {

Manifest make_manifest(const std::vector<std::tuple<std::string, int, std::string>>& rows) {
  Manifest m;
  m.name = "test";
  m.scene_map[0] = "abstract";
  m.scene_map[1] = "social";
  for (const auto& [path, label, person] : rows)
    m.samples.push_back({path, label, person, Source::synthetic, std::nullopt});
  return m;
}

Manifest random_manifest(Rng& rng, int persons, int min_per = 1, int max_per = 40) {
  Manifest m;
  m.name = "rand";
  m.scene_map[0] = "abstract";
  m.scene_map[1] = "social";
  int id = 0;
  for (int p = 0; p < persons; ++p) {
    const int count =
        min_per + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_per - min_per + 1)));
    for (int i = 0; i < count; ++i)
      m.samples.push_back({"img" + std::to_string(id++) + ".pgm",
                           static_cast<int>(rng.next_below(3)), "p" + std::to_string(p),
                           Source::synthetic, std::nullopt});
  }
  return m;
}

}  // namespace

TEST_CASE("manifest round trip") {
  SECTION("empty body with valid header") {
    const Manifest m = load_manifest("# name=empty\n# scene0=abstract\n# scene1=social\n");
    CHECK(m.samples.empty());
    CHECK(m.name == "empty");
    CHECK(m.scene_map.at(0) == "abstract");
  }

  SECTION("random manifests survive save/load") {
    Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
      Manifest m = random_manifest(rng, 1 + static_cast<int>(rng.next_below(8)));
      if (trial % 2) m.scene_map[2] = "off";
      if (trial % 3 == 0 && !m.samples.empty()) {
        m.samples[0].augmented_from = "origin.pgm";
        m.samples[0].path = "aug_of_origin.pgm";
      }
      const std::string text = save_manifest(m);
      const Manifest back = load_manifest(text);
      CHECK(back.name == m.name);
      CHECK(back.scene_map == m.scene_map);
      REQUIRE(back.samples.size() == m.samples.size());
      for (std::size_t i = 0; i < m.samples.size(); ++i) {
        CHECK(back.samples[i].path == m.samples[i].path);
        CHECK(back.samples[i].label == m.samples[i].label);
        CHECK(back.samples[i].person_id == m.samples[i].person_id);
        CHECK(back.samples[i].source == m.samples[i].source);
        CHECK(back.samples[i].augmented_from == m.samples[i].augmented_from);
      }
      // a second save is byte-identical
      CHECK(save_manifest(back) == text);
    }
  }
}

TEST_CASE("manifest parse errors carry line numbers") {
  const std::string header = "# name=x\n# scene0=a\n# scene1=b\n";
  CHECK_THROWS_WITH(load_manifest(header + "a.pgm\t3\tp0\tsynthetic\n"),
                    Catch::Matchers::ContainsSubstring("line 4"));
  CHECK_THROWS_WITH(load_manifest(header + "a.pgm\t1\t\tsynthetic\n"),
                    Catch::Matchers::ContainsSubstring("empty person"));
  CHECK_THROWS_WITH(load_manifest(header + "a.pgm\t1\tp0\tmars\n"),
                    Catch::Matchers::ContainsSubstring("source"));
  CHECK_THROWS_WITH(
      load_manifest(header + "a.pgm\t1\tp0\tsynthetic\na.pgm\t0\tp1\tchild\n"),
      Catch::Matchers::ContainsSubstring("duplicate"));
  CHECK_THROWS_AS(load_manifest(header + "a.pgm\t1\tp0\n"), ParseError);
  // scene map must cover classes 0 and 1
  CHECK_THROWS_AS(load_manifest("# name=x\n# scene0=a\n"), ParseError);
}

TEST_CASE("augmentation emits exactly the pinned 15 variants") {
  Rng rng(62);
  const GrayImage img = testutil::random_image(rng, 72, 72);
  const Sample s{"orig.pgm", 1, "p3", Source::child, std::nullopt};

  const auto variants = augment(s, img);
  REQUIRE(variants.size() == 15);

  // identity first, byte-identical, keeps its path
  CHECK(variants[0].second == img);
  CHECK(variants[0].first.path == "orig.pgm");
  CHECK_FALSE(variants[0].first.augmented_from.has_value());

  std::set<std::string> paths;
  for (const auto& [vs, vimg] : variants) {
    CHECK(vs.label == s.label);
    CHECK(vs.person_id == s.person_id);
    CHECK(vs.source == s.source);
    CHECK(paths.insert(vs.path).second);  // unique paths
    CHECK(vimg.width() == 72);
    CHECK(vimg.height() == 72);
  }
  for (std::size_t i = 1; i < variants.size(); ++i) {
    CHECK(variants[i].first.augmented_from == s.path);
    CHECK(variants[i].second != img);  // every non-identity variant changes pixels
  }

  // spot-check variant content against the public ops
  CHECK(variants[1].second == translate(img, -6, -6));
  CHECK(variants[9].second == rotate(img, 10.0));
  CHECK(variants[11].second == rotate(translate(img, 6, 0), 10.0));

  CHECK_THROWS_AS(augment(s, GrayImage(64, 64)), ArgumentError);
}

TEST_CASE("augmented class counts scale by exactly 15") {
  // miniature version of the dataset arithmetic: counts scale linearly
  std::map<int, long long> counts{{0, 7}, {1, 12}, {2, 3}};
  long long total = 0;
  Rng rng(63);
  const GrayImage img = testutil::random_image(rng, 72, 72);
  std::map<int, long long> augmented;
  for (const auto& [label, n] : counts)
    for (long long i = 0; i < n; ++i) {
      const Sample s{"s" + std::to_string(label) + "_" + std::to_string(i) + ".pgm",
                     label, "p0", Source::synthetic, std::nullopt};
      for (const auto& [vs, vimg] : augment(s, img)) {
        ++augmented[vs.label];
        ++total;
      }
    }
  CHECK(total == 15 * (7 + 12 + 3));
  CHECK(augmented[0] == 105);
  CHECK(augmented[1] == 180);
  CHECK(augmented[2] == 45);
}

TEST_CASE("kfold split is person-disjoint and balanced") {
  SECTION("five equal persons, five folds") {
    Manifest m = make_manifest({});
    for (int p = 0; p < 5; ++p)
      for (int i = 0; i < 4; ++i)
        m.samples.push_back({"i" + std::to_string(p * 4 + i) + ".pgm", 0,
                             "p" + std::to_string(p), Source::synthetic, std::nullopt});
    const FoldPlan plan = kfold_split(m, 5, 7);
    std::set<int> used;
    for (const auto& [person, fold] : plan.assignment) used.insert(fold);
    CHECK(used == std::set<int>{0, 1, 2, 3, 4});
  }

  SECTION("error when persons < folds") {
    Manifest m = make_manifest({{"a.pgm", 0, "p0"}, {"b.pgm", 1, "p1"}});
    CHECK_THROWS_AS(kfold_split(m, 3, 0), ArgumentError);
  }

  SECTION("disjointness and balance over random manifests") {
    Rng rng(64);
    for (int trial = 0; trial < 40; ++trial) {
      const int persons = 5 + static_cast<int>(rng.next_below(40));
      const Manifest m = random_manifest(rng, persons, 10, 50);
      const FoldPlan plan = kfold_split(m, 5, rng.next_u64());

      // every person maps to exactly one fold, all folds non-empty
      std::vector<long long> sizes(5, 0);
      for (const Sample& s : m.samples) sizes[plan.fold_of(s.person_id)] += 1;
      for (long long sz : sizes) CHECK(sz > 0);

      if (persons >= 25) {
        const double mean = static_cast<double>(m.samples.size()) / 5.0;
        for (long long sz : sizes) {
          CHECK(static_cast<double>(sz) >= 0.9 * mean);
          CHECK(static_cast<double>(sz) <= 1.1 * mean);
        }
      }
    }
  }

  SECTION("40 persons, 87,570 images: fold sizes within 10% of 17,514") {
    Rng rng(66);
    Manifest m = make_manifest({});
    int id = 0;
    long long remaining = 87570;
    for (int p = 0; p < 40; ++p) {
      // uneven person sizes that still sum to the full corpus
      long long count = p == 39 ? remaining
                                : 1200 + static_cast<long long>(rng.next_below(2000));
      remaining -= count;
      for (long long i = 0; i < count; ++i)
        m.samples.push_back({"i" + std::to_string(id++) + ".pgm", 0, "p" + std::to_string(p),
                             Source::adult, std::nullopt});
    }
    REQUIRE(m.samples.size() == 87570);
    const FoldPlan plan = kfold_split(m, 5, 13);
    std::vector<long long> sizes(5, 0);
    for (const Sample& s : m.samples) ++sizes[plan.fold_of(s.person_id)];
    for (long long sz : sizes) {
      CHECK(static_cast<double>(sz) >= 0.9 * 17514.0);
      CHECK(static_cast<double>(sz) <= 1.1 * 17514.0);
    }
  }

  SECTION("fold plan round trip") {
    Rng rng(65);
    Manifest m = random_manifest(rng, 8, 2, 5);
    const FoldPlan plan = kfold_split(m, 3, 9);
    const FoldPlan back = load_fold_plan(save_fold_plan(plan), 3);
    CHECK(back.assignment == plan.assignment);
  }
}

TEST_CASE("filter_classes") {
  Manifest m = make_manifest({{"a.pgm", 0, "p0"},
                              {"b.pgm", 1, "p0"},
                              {"c.pgm", 2, "p1"},
                              {"d.pgm", 1, "p1"}});

  const Manifest all = filter_classes(m, {0, 1, 2});
  CHECK(all.samples.size() == 4);

  const Manifest two = filter_classes(m, {0, 1});
  REQUIRE(two.samples.size() == 3);
  CHECK(two.samples[0].path == "a.pgm");
  CHECK(two.samples[1].path == "b.pgm");
  CHECK(two.samples[2].path == "d.pgm");

  std::ostringstream warn;
  const Manifest none = filter_classes(m, {}, &warn);
  CHECK(none.samples.empty());
  CHECK(warn.str().find("warning") != std::string::npos);

  const auto counts = class_counts(m);
  CHECK(counts == std::vector<long long>{1, 2, 1});
}
