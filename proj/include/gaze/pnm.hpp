#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gaze/error.hpp"
#include "gaze/image.hpp"

namespace gaze {

// Binary portable anymap I/O: P5 (graymap) and P6 (pixmap), 8-bit maxval only.
// Header tokens are whitespace-separated; '#' comments may appear between
// tokens. The payload starts after the single whitespace byte that terminates
// the maxval token. A "frame stream" is zero or more concatenated maps.

using PnmImage = std::variant<GrayImage, RgbImage>;

namespace detail {

// Reads one header token, skipping whitespace and comment lines.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      // skip
    } else {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw ParseError("pnm: malformed header: unexpected end of stream");
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == '#') {
    // comments terminate a token like whitespace does; consume the line
    while (c != EOF && c != '\n') c = in.get();
  }
  // the delimiter byte itself is consumed, which is what the payload rule wants
  return tok;
}

inline int pnm_int(std::istream& in, const char* what) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("pnm: malformed header: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace detail

// Parses exactly one image from the stream.
inline PnmImage read_pnm(std::istream& in) {
  const std::string magic = detail::pnm_token(in);
  if (magic != "P5" && magic != "P6")
    throw ParseError("pnm: malformed header: unknown magic '" + magic + "'");
  const int w = detail::pnm_int(in, "width");
  const int h = detail::pnm_int(in, "height");
  const int maxval = detail::pnm_int(in, "maxval");
  if (w < 1 || h < 1) throw ParseError("pnm: malformed header: non-positive dimensions");
  if (maxval != 255)
    throw ParseError("pnm: unsupported maxval " + std::to_string(maxval) + " (only 255)");
  const std::size_t n =
      static_cast<std::size_t>(w) * h * (magic == "P6" ? 3 : 1);
  std::vector<std::uint8_t> data(n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw ParseError("pnm: truncated payload (wanted " + std::to_string(n) + " bytes, got " +
                     std::to_string(in.gcount()) + ")");
  if (magic == "P6") return RgbImage(w, h, std::move(data));
  return GrayImage(w, h, std::move(data));
}

inline PnmImage read_pnm(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_pnm(in);
}

inline void write_pnm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.samples().data()),
            static_cast<std::streamsize>(img.samples().size()));
}

inline void write_pnm(std::ostream& out, const RgbImage& img) {
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.samples().data()),
            static_cast<std::streamsize>(img.samples().size()));
}

template <typename Image>
std::string write_pnm(const Image& img) {
  std::ostringstream out;
  write_pnm(out, img);
  return out.str();
}

// Pulls consecutive images off a frame stream. Clean EOF between frames ends
// the stream; EOF inside a frame is a parse error.
class FrameReader {
 public:
  explicit FrameReader(std::istream& in) : in_(in) {}

  std::optional<PnmImage> next() {
    int c = in_.peek();
    if (c == EOF) return std::nullopt;
    PnmImage img = read_pnm(in_);
    ++index_;
    return img;
  }

  // Index of the next frame to be returned (== frames read so far).
  long long index() const { return index_; }

 private:
  std::istream& in_;
  long long index_ = 0;
};

// Frames may be gray or color; detection wants gray.
inline GrayImage to_gray(const PnmImage& img) {
  if (std::holds_alternative<GrayImage>(img)) return std::get<GrayImage>(img);
  return to_grayscale(std::get<RgbImage>(img));
}

}  // namespace gaze
