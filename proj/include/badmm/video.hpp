#ifndef BADMM_VIDEO_HPP_
#define BADMM_VIDEO_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "badmm/matrix_io.hpp"
#include "badmm/numerics.hpp"

namespace badmm {

// 8-bit grayscale frames as binary PGM (P5, maxval <= 255). A frame is a
// height x width matrix of pixel values 0..255.

namespace detail {

inline bool pgm_token(std::istream& is, std::string& tok) {
  tok.clear();
  int c = 0;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return false;
  tok.push_back(static_cast<char>(c));
  while ((c = is.peek()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(is.get()));
  return true;
}

inline long pgm_number(std::istream& is, const std::string& source, const char* what) {
  std::string tok;
  if (!pgm_token(is, tok)) throw IoError(source + ": truncated PGM header");
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    throw IoError(source + ": bad PGM " + what + " '" + tok + "'");
  }
  return std::stol(tok);
}

}  // namespace detail

inline Matrix read_pgm(std::istream& is, const std::string& source = "<stream>") {
  std::string magic;
  if (!detail::pgm_token(is, magic) || magic != "P5") {
    throw IoError(source + ": unsupported format (expected binary PGM, P5)");
  }
  const long w = detail::pgm_number(is, source, "width");
  const long h = detail::pgm_number(is, source, "height");
  const long maxval = detail::pgm_number(is, source, "maxval");
  if (w < 1 || h < 1 || w > 65535 || h > 65535) throw IoError(source + ": bad PGM dimensions");
  if (maxval < 1 || maxval > 255) throw IoError(source + ": only 8-bit PGM is supported");
  is.get();  // single whitespace before the raster
  std::vector<unsigned char> raster(static_cast<std::size_t>(w * h));
  if (!is.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()))) {
    throw IoError(source + ": truncated PGM raster");
  }
  Matrix f(h, w);
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j) f(i, j) = raster[static_cast<std::size_t>(i * w + j)];
  return f;
}

inline unsigned char to_byte(double v) {
  if (!std::isfinite(v)) return 0;
  return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
}

/// Values are rounded and clamped to 0..255.
inline void write_pgm(std::ostream& os, const Matrix& f) {
  os << "P5\n" << f.cols() << ' ' << f.rows() << "\n255\n";
  std::vector<unsigned char> raster(static_cast<std::size_t>(f.size()));
  for (Index i = 0; i < f.rows(); ++i)
    for (Index j = 0; j < f.cols(); ++j) raster[static_cast<std::size_t>(i * f.cols() + j)] = to_byte(f(i, j));
  os.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

inline Matrix load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_pgm(in, path.string());
}

inline void save_pgm(const std::filesystem::path& path, const Matrix& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pgm(out, f);
  if (!out) throw IoError("write failed: " + path.string());
}

/// All *.pgm files in `dir`, sorted by file name.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

inline std::vector<Matrix> load_frames(const std::filesystem::path& dir) {
  const auto paths = list_frames(dir);
  if (paths.empty()) throw IoError(dir.string() + ": no .pgm frames");
  std::vector<Matrix> frames;
  for (const auto& p : paths) {
    frames.push_back(load_pgm(p));
    if (frames.back().rows() != frames.front().rows() || frames.back().cols() != frames.front().cols()) {
      throw IoError(p.string() + ": frame is " + shape_string(frames.back()) + ", expected " +
                    shape_string(frames.front()));
    }
  }
  return frames;
}

/// Each frame (row-major pixels) becomes one column of the result, times `scale`.
inline Matrix stack_frames(const std::vector<Matrix>& frames, double scale = 1.0) {
  if (frames.empty()) throw ShapeError("no frames to stack");
  const Index h = frames.front().rows();
  const Index w = frames.front().cols();
  Matrix m(h * w, static_cast<Index>(frames.size()));
  for (std::size_t k = 0; k < frames.size(); ++k) {
    require_same_shape(frames[k], frames.front(), "frame");
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) m(i * w + j, static_cast<Index>(k)) = scale * frames[k](i, j);
  }
  return m;
}

inline Matrix unstack_frame(const Matrix& stacked, Index column, Index height, Index width) {
  if (stacked.rows() != height * width) throw ShapeError("unstack_frame: pixel count mismatch");
  Matrix f(height, width);
  for (Index i = 0; i < height; ++i)
    for (Index j = 0; j < width; ++j) f(i, j) = stacked(i * width + j, column);
  return f;
}

// Test sequences: a smooth static background
//   60 + 100 x / w + 40 sin(y / 7)
// and, for the moving variant, a bright square (value 240) crossing the
// frame left to right while bobbing vertically.

struct FrameSequence {
  std::vector<Matrix> frames;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> masks;  ///< true on the square
};

inline Matrix synthetic_background(Index height, Index width) {
  Matrix bg(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      bg(y, x) = std::round(60.0 + 100.0 * static_cast<double>(x) / static_cast<double>(width) +
                            40.0 * std::sin(static_cast<double>(y) / 7.0));
  return bg;
}

inline FrameSequence moving_square_sequence(Index height, Index width, Index count, Index square, bool moving = true) {
  if (height < 1 || width < 1 || count < 1) throw std::invalid_argument("frame sequence: empty dimensions");
  if (moving && (square < 1 || square > std::min(height, width))) {
    throw std::invalid_argument("frame sequence: square does not fit");
  }
  FrameSequence seq;
  const Matrix bg = synthetic_background(height, width);
  for (Index k = 0; k < count; ++k) {
    Matrix f = bg;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(height, width, false);
    if (moving) {
      const double t = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
      const auto x0 = static_cast<Index>(std::lround(static_cast<double>(width - square) * t));
      const double bob = 0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count));
      const auto y0 = static_cast<Index>(std::lround(static_cast<double>(height - square) * bob));
      f.block(y0, x0, square, square).setConstant(240.0);
      mask.block(y0, x0, square, square).setConstant(true);
    }
    seq.frames.push_back(std::move(f));
    seq.masks.push_back(std::move(mask));
  }
  return seq;
}

}  // namespace badmm

#endif  // BADMM_VIDEO_HPP_
