#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "gaze/pnm.hpp"
#include "gaze/rng.hpp"
#include "testutil.hpp"

using namespace gaze;

TEST_CASE("minimal P5 parses") {
  const std::string bytes = "P5 1 1 255 \x41";
  const PnmImage img = read_pnm(bytes);
  REQUIRE(std::holds_alternative<GrayImage>(img));
  const GrayImage& g = std::get<GrayImage>(img);
  CHECK(g.width() == 1);
  CHECK(g.height() == 1);
  CHECK(g.at(0, 0) == 0x41);
}

TEST_CASE("header comments are allowed between tokens") {
  const std::string bytes = "P5\n# a comment\n2 # trailing\n1\n255\n\x01\x02";
  const GrayImage g = std::get<GrayImage>(read_pnm(bytes));
  CHECK(g.width() == 2);
  CHECK(g.height() == 1);
  CHECK(g.samples() == std::vector<std::uint8_t>{1, 2});
}

TEST_CASE("malformed inputs raise distinct parse errors") {
  CHECK_THROWS_WITH(read_pnm(std::string("P4 1 1 255 x")),
                    Catch::Matchers::ContainsSubstring("magic"));
  CHECK_THROWS_WITH(read_pnm(std::string("P6 1 1 65535 abcdef")),
                    Catch::Matchers::ContainsSubstring("maxval"));
  CHECK_THROWS_WITH(read_pnm(std::string("P5 2 2 255 ab")),
                    Catch::Matchers::ContainsSubstring("truncated"));
  CHECK_THROWS_WITH(read_pnm(std::string("P5 x 1 255 a")),
                    Catch::Matchers::ContainsSubstring("width"));
  CHECK_THROWS_AS(read_pnm(std::string("P5 1")), ParseError);
}

TEST_CASE("round trips are lossless") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 1 + static_cast<int>(rng.next_below(40));
    const int h = 1 + static_cast<int>(rng.next_below(40));
    const GrayImage img = testutil::random_image(rng, w, h);

    // read(write(img)) is value-identical
    const std::string bytes = write_pnm(img);
    const GrayImage back = std::get<GrayImage>(read_pnm(bytes));
    CHECK(back == img);

    // write(read(bytes)) is byte-identical (our writer emits no comments)
    CHECK(write_pnm(back) == bytes);

    std::vector<std::uint8_t> rgb(3u * w * h);
    for (auto& v : rgb) v = static_cast<std::uint8_t>(rng.next_below(256));
    const RgbImage color(w, h, rgb);
    const RgbImage color_back = std::get<RgbImage>(read_pnm(write_pnm(color)));
    CHECK(color_back == color);
  }
}

TEST_CASE("frame streams decode concatenated maps in order") {
  Rng rng(32);
  std::ostringstream stream;
  std::vector<GrayImage> frames;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(testutil::random_image(rng, 6, 4));
    write_pnm(stream, frames.back());
  }
  std::istringstream in(stream.str());
  FrameReader reader(in);
  for (int i = 0; i < 5; ++i) {
    CHECK(reader.index() == i);
    const auto img = reader.next();
    REQUIRE(img.has_value());
    CHECK(std::get<GrayImage>(*img) == frames[i]);
  }
  CHECK_FALSE(reader.next().has_value());
}

TEST_CASE("frame stream truncation is a parse error, not silence") {
  const GrayImage img(3, 3, std::uint8_t(5));
  std::string bytes = write_pnm(img);
  bytes += "P5 9 9 255 short";
  std::istringstream in(bytes);
  FrameReader reader(in);
  CHECK(reader.next().has_value());
  CHECK_THROWS_AS(reader.next(), ParseError);
}
