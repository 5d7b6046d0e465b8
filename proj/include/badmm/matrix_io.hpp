#ifndef BADMM_MATRIX_IO_HPP_
#define BADMM_MATRIX_IO_HPP_

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "badmm/format.hpp"
#include "badmm/numerics.hpp"

namespace badmm {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CSV: one row per line, comma-separated, '.' decimal point, no header.

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& is, const std::string& source = "<stream>") {
  std::vector<double> entries;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Index count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view tok(line.data() + start,
                                 (comma == std::string::npos ? line.size() : comma) - start);
      double v = 0;
      if (!parse_double(tok, v) || !std::isfinite(v)) {
        throw IoError(source + ":" + std::to_string(line_no) + ": invalid number '" +
                      std::string(tok) + "'");
      }
      entries.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) {
      throw IoError(source + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw IoError(source + ": empty matrix file");
  return make_matrix(rows, cols, entries);
}

// Binary: "BMAT", u64 rows, u64 cols (little endian), then rows*cols
// little-endian IEEE-754 doubles in row-major order.

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b.data(), 8);
}

inline bool get_u64_le(std::istream& is, std::uint64_t& v) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

inline std::uint64_t double_bits(double d) {
  std::uint64_t u = 0;
  std::memcpy(&u, &d, sizeof u);
  return u;
}

inline double bits_double(std::uint64_t u) {
  double d = 0;
  std::memcpy(&d, &u, sizeof d);
  return d;
}

}  // namespace detail

inline constexpr char kBinaryMagic[4] = {'B', 'M', 'A', 'T'};

inline void write_matrix_binary(std::ostream& os, const Matrix& m) {
  os.write(kBinaryMagic, 4);
  detail::put_u64_le(os, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64_le(os, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) detail::put_u64_le(os, detail::double_bits(m(i, j)));
}

inline Matrix read_matrix_binary(std::istream& is, const std::string& source = "<stream>") {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    throw IoError(source + ": missing BMAT magic");
  }
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  if (!detail::get_u64_le(is, rows) || !detail::get_u64_le(is, cols)) {
    throw IoError(source + ": truncated header");
  }
  if (rows == 0 || cols == 0 || rows > (1ull << 31) || cols > (1ull << 31)) {
    throw IoError(source + ": invalid dimensions");
  }
  std::vector<double> entries(rows * cols);
  for (auto& e : entries) {
    std::uint64_t bits = 0;
    if (!detail::get_u64_le(is, bits)) throw IoError(source + ": truncated payload");
    e = detail::bits_double(bits);
  }
  try {
    return make_matrix(static_cast<Index>(rows), static_cast<Index>(cols), entries);
  } catch (const NumericError& e) {
    throw IoError(source + ": " + e.what());
  }
}

/// Dispatches on extension: ".csv" is text, anything else is BMAT.
inline Matrix load_matrix(const std::filesystem::path& path) {
  const bool csv = path.extension() == ".csv";
  std::ifstream in(path, csv ? std::ios::in : std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return csv ? read_matrix_csv(in, path.string()) : read_matrix_binary(in, path.string());
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  const bool csv = path.extension() == ".csv";
  std::ofstream out(path, csv ? std::ios::out : std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (csv) {
    write_matrix_csv(out, m);
  } else {
    write_matrix_binary(out, m);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace badmm

#endif  // BADMM_MATRIX_IO_HPP_
