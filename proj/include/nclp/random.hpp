#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "nclp/algebra.hpp"

namespace nclp {

/// Deterministic generator for a sub-stream identified by (seed, tags...).
/// Independent trials derive their own stream rather than sharing one.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words{std::uint32_t(seed), std::uint32_t(seed >> 32)};
  for (auto t : tags) {
    words.push_back(std::uint32_t(t));
    words.push_back(std::uint32_t(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

/// Entries with independent standard normal real and imaginary parts.
template <class Rng>
Matrix random_gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = g(rng);
      const double im = g(rng);
      m(i, j) = cplx(re, im);
    }
  return m;
}

/// Haar-distributed unitary via QR with phase correction.
template <class Rng>
Matrix random_unitary(Rng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(random_gaussian(rng, n, n));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0.0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

template <class Rng>
Op random_op(Rng& rng, const TracialAlgebra& alg) {
  std::vector<Matrix> b;
  for (int m : alg.block_dims()) b.push_back(random_gaussian(rng, m, m));
  return Op(std::move(b));
}

template <class Rng>
Op random_unitary_op(Rng& rng, const TracialAlgebra& alg) {
  std::vector<Matrix> b;
  for (int m : alg.block_dims()) b.push_back(random_unitary(rng, m));
  return Op(std::move(b));
}

/// G G^* for Gaussian G of the given rank per block (rank clipped to m).
template <class Rng>
Op random_psd(Rng& rng, const TracialAlgebra& alg, int rank = -1) {
  std::vector<Matrix> b;
  for (int m : alg.block_dims()) {
    const int r = rank < 0 ? m : std::min(rank, m);
    Matrix g = random_gaussian(rng, m, r);
    b.push_back(g * g.adjoint());
  }
  return Op(std::move(b));
}

template <class Rng>
std::vector<Matrix> random_family(Rng& rng, int n, int k) {
  std::vector<Matrix> f;
  f.reserve(n);
  for (int i = 0; i < n; ++i) f.push_back(random_gaussian(rng, k, k));
  return f;
}

template <class Rng>
std::vector<Op> random_basis(Rng& rng, const TracialAlgebra& alg, int n) {
  std::vector<Op> xs;
  for (int i = 0; i < n; ++i) xs.push_back(random_op(rng, alg));
  return xs;
}

}  // namespace nclp
