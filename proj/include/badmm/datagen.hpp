#ifndef BADMM_DATAGEN_HPP_
#define BADMM_DATAGEN_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "badmm/matrix_io.hpp"
#include "badmm/random.hpp"

namespace badmm {

// Synthetic M = L + S + N:
//   L = U V^T with U (m x r), V (n x r) i.i.d. N(0, 1);
//   S has round(sparsity * m * n) nonzeros on a uniformly random support,
//     values uniform in [-magnitude, magnitude];
//   N i.i.d. N(0, sigma^2).
// Draw order from one Rng(seed): U row-major, V row-major, the support
// (partial Fisher-Yates over linear indices i*n + j), the S values in
// support order, then N row-major (only when sigma > 0).

struct InstanceParams {
  Index m = 200;
  Index n = 0;  ///< 0: square
  Index rank = 5;
  double sparsity = 0.05;
  double magnitude = 50.0;
  double sigma = 0.0;
  std::uint64_t seed = 42;

  Index cols() const { return n > 0 ? n : m; }
};

struct SyntheticInstance {
  Matrix m_obs;
  Matrix l_true;
  Matrix s_true;
  InstanceParams params;

  std::size_t support_size() const { return static_cast<std::size_t>((s_true.array() != 0.0).count()); }
};

inline std::size_t sparse_count(const InstanceParams& p) {
  return static_cast<std::size_t>(std::llround(p.sparsity * static_cast<double>(p.m) * static_cast<double>(p.cols())));
}

inline SyntheticInstance gen_instance(const InstanceParams& p) {
  const Index m = p.m;
  const Index n = p.cols();
  if (m < 1 || n < 1) throw std::invalid_argument("gen_instance: dimensions must be positive");
  if (p.rank < 0 || p.rank > std::min(m, n)) throw std::invalid_argument("gen_instance: rank must lie in [0, min(m, n)]");
  if (!(p.sparsity >= 0.0 && p.sparsity <= 1.0)) throw std::invalid_argument("gen_instance: sparsity must lie in [0, 1]");
  if (!(p.magnitude >= 0.0) || !std::isfinite(p.magnitude)) throw std::invalid_argument("gen_instance: bad magnitude");
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) throw std::invalid_argument("gen_instance: sigma must be >= 0");

  Rng rng(p.seed);
  SyntheticInstance out;
  out.params = p;
  const Matrix u = rng.gaussian_matrix(m, p.rank);
  const Matrix v = rng.gaussian_matrix(n, p.rank);
  out.l_true = p.rank > 0 ? Matrix(u * v.transpose()) : Matrix::Zero(m, n);

  const std::size_t total = static_cast<std::size_t>(m * n);
  const std::size_t k = sparse_count(p);
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(idx[i], idx[j]);
  }
  out.s_true = Matrix::Zero(m, n);
  for (std::size_t i = 0; i < k; ++i) {
    const Index r = static_cast<Index>(idx[i] / static_cast<std::size_t>(n));
    const Index c = static_cast<Index>(idx[i] % static_cast<std::size_t>(n));
    out.s_true(r, c) = rng.uniform(-p.magnitude, p.magnitude);
  }

  out.m_obs = out.l_true + out.s_true;
  if (p.sigma > 0.0) out.m_obs += p.sigma * rng.gaussian_matrix(m, n);
  return out;
}

inline nlohmann::json instance_manifest(const InstanceParams& p) {
  return {{"generator", "mt19937_64"},
          {"seed", p.seed},
          {"m", p.m},
          {"n", p.cols()},
          {"rank", p.rank},
          {"sparsity", p.sparsity},
          {"magnitude", p.magnitude},
          {"sigma", p.sigma},
          {"nonzeros", sparse_count(p)}};
}

/// Writes M, L, S (as m_obs.<ext>, l_true.<ext>, s_true.<ext>) and
/// manifest.json into `dir`.
inline void export_instance(const SyntheticInstance& inst, const std::filesystem::path& dir,
                            const std::string& ext = ".bmat") {
  std::filesystem::create_directories(dir);
  save_matrix(dir / ("m_obs" + ext), inst.m_obs);
  save_matrix(dir / ("l_true" + ext), inst.l_true);
  save_matrix(dir / ("s_true" + ext), inst.s_true);
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw IoError("cannot write " + (dir / "manifest.json").string());
  mf << instance_manifest(inst.params).dump(2) << '\n';
}

}  // namespace badmm

#endif  // BADMM_DATAGEN_HPP_
