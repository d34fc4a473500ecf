#pragma once

// Weighted-trace block-diagonal matrix algebras M = (+)_k M_{m_k} with
// tau(x) = sum_k lambda_k Tr(x_k), and the spectral calculus on them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nclp/errors.hpp"

namespace nclp {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Relative spectral cutoff below which an eigenvalue counts as zero when
/// forming supports and q-inverses.
inline constexpr double kSupportEps = 1e-10;

/// Allowed ||X - X*||_max relative to max(1, ||X||_max) before a matrix is
/// rejected as non-Hermitian.
inline constexpr double kHermitianTol = 1e-8;

/// Hoelder conjugate exponent p' with 1/p + 1/p' = 1.
inline double conjugate_exponent(double p) {
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

/// |1/2 - 1/p|, the exponent of the dimension rate n^{|1/2-1/p|}.
inline double rate_exponent(double p) {
  return std::abs(0.5 - (std::isinf(p) ? 0.0 : 1.0 / p));
}

class TracialAlgebra {
 public:
  TracialAlgebra() = default;

  TracialAlgebra(std::vector<int> block_dims, std::vector<double> trace_weights)
      : dims_(std::move(block_dims)), weights_(std::move(trace_weights)) {
    if (dims_.empty()) throw StructuralError("algebra needs at least one block");
    if (dims_.size() != weights_.size())
      throw StructuralError("block_dims and trace_weights differ in length");
    for (int m : dims_)
      if (m < 1) throw StructuralError("block dimension must be >= 1");
    for (double w : weights_)
      if (!(w > 0.0) || !std::isfinite(w))
        throw StructuralError("trace weights must be positive and finite");
  }

  /// M_m with tau = weight * Tr.
  static TracialAlgebra matrices(int m, double weight = 1.0) {
    return TracialAlgebra({m}, {weight});
  }

  /// Commutative algebra l_infinity^N with point masses `weights`.
  static TracialAlgebra diagonal(std::vector<double> weights) {
    std::vector<int> dims(weights.size(), 1);
    return TracialAlgebra(std::move(dims), std::move(weights));
  }

  std::size_t num_blocks() const { return dims_.size(); }
  int block_dim(std::size_t k) const { return dims_[k]; }
  double weight(std::size_t k) const { return weights_[k]; }
  const std::vector<int>& block_dims() const { return dims_; }
  const std::vector<double>& trace_weights() const { return weights_; }

  /// Complex dimension sum_k m_k^2.
  int dimension() const {
    int d = 0;
    for (int m : dims_) d += m * m;
    return d;
  }

  bool is_commutative() const {
    return std::all_of(dims_.begin(), dims_.end(), [](int m) { return m == 1; });
  }

  /// M_k (x) M, traced by Tr (x) tau.
  TracialAlgebra amplified(int k) const {
    if (k < 1) throw StructuralError("amplification level must be >= 1");
    std::vector<int> dims(dims_);
    for (int& m : dims) m *= k;
    return TracialAlgebra(std::move(dims), weights_);
  }

  /// M (+) M^op; the second summand carries the same weights.
  TracialAlgebra doubled() const {
    std::vector<int> dims(dims_);
    dims.insert(dims.end(), dims_.begin(), dims_.end());
    std::vector<double> w(weights_);
    w.insert(w.end(), weights_.begin(), weights_.end());
    return TracialAlgebra(std::move(dims), std::move(w));
  }

  friend bool operator==(const TracialAlgebra&, const TracialAlgebra&) = default;

 private:
  std::vector<int> dims_;
  std::vector<double> weights_;
};

/// Block-diagonal operator; an element of L_p(M) for every p.
class Op {
 public:
  Op() = default;
  explicit Op(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {}

  static Op zero(const TracialAlgebra& alg) {
    std::vector<Matrix> b;
    b.reserve(alg.num_blocks());
    for (int m : alg.block_dims()) b.push_back(Matrix::Zero(m, m));
    return Op(std::move(b));
  }

  static Op identity(const TracialAlgebra& alg) {
    std::vector<Matrix> b;
    b.reserve(alg.num_blocks());
    for (int m : alg.block_dims()) b.push_back(Matrix::Identity(m, m));
    return Op(std::move(b));
  }

  static Op matrix_unit(const TracialAlgebra& alg, std::size_t block, int r, int s) {
    Op e = zero(alg);
    e.blocks_.at(block)(r, s) = 1.0;
    return e;
  }

  /// Row-major coordinates block by block; length alg.dimension().
  CVector coordinates() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks_) n += b.size();
    CVector c(n);
    Eigen::Index at = 0;
    for (const auto& b : blocks_)
      for (Eigen::Index r = 0; r < b.rows(); ++r)
        for (Eigen::Index s = 0; s < b.cols(); ++s) c(at++) = b(r, s);
    return c;
  }

  static Op from_coordinates(const TracialAlgebra& alg, const CVector& c) {
    if (c.size() != alg.dimension())
      throw StructuralError("coordinate vector length does not match algebra");
    Op x = zero(alg);
    Eigen::Index at = 0;
    for (auto& b : x.blocks_)
      for (Eigen::Index r = 0; r < b.rows(); ++r)
        for (Eigen::Index s = 0; s < b.cols(); ++s) b(r, s) = c(at++);
    return x;
  }

  std::size_t num_blocks() const { return blocks_.size(); }
  const Matrix& block(std::size_t k) const { return blocks_[k]; }
  Matrix& block(std::size_t k) { return blocks_[k]; }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  Op adjoint() const {
    return map([](const Matrix& m) -> Matrix { return m.adjoint(); });
  }

  /// Entrywise transpose of each block: the matrix-level opposite x -> x^t.
  Op transpose() const {
    return map([](const Matrix& m) -> Matrix { return m.transpose(); });
  }

  template <class F>
  Op map(F&& f) const {
    std::vector<Matrix> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(f(b));
    return Op(std::move(out));
  }

  double max_abs() const {
    double v = 0.0;
    for (const auto& b : blocks_)
      if (b.size() > 0) v = std::max(v, b.cwiseAbs().maxCoeff());
    return v;
  }

  Op& operator+=(const Op& o) {
    same_layout(o);
    for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] += o.blocks_[k];
    return *this;
  }
  Op& operator-=(const Op& o) {
    same_layout(o);
    for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] -= o.blocks_[k];
    return *this;
  }
  Op& operator*=(cplx s) {
    for (auto& b : blocks_) b *= s;
    return *this;
  }

  friend Op operator+(Op a, const Op& b) { return a += b; }
  friend Op operator-(Op a, const Op& b) { return a -= b; }
  friend Op operator-(Op a) { return a *= -1.0; }
  friend Op operator*(cplx s, Op a) { return a *= s; }
  friend Op operator*(Op a, cplx s) { return a *= s; }
  friend Op operator*(double s, Op a) { return a *= s; }
  friend Op operator*(const Op& a, const Op& b) {
    a.same_layout(b);
    std::vector<Matrix> out;
    out.reserve(a.blocks_.size());
    for (std::size_t k = 0; k < a.blocks_.size(); ++k)
      out.push_back(a.blocks_[k] * b.blocks_[k]);
    return Op(std::move(out));
  }

 private:
  void same_layout(const Op& o) const {
    if (o.blocks_.size() != blocks_.size())
      throw StructuralError("operators have different block counts");
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      if (o.blocks_[k].rows() != blocks_[k].rows() ||
          o.blocks_[k].cols() != blocks_[k].cols())
        throw StructuralError("operators have different block shapes");
  }

  std::vector<Matrix> blocks_;
};

inline void check_shape(const TracialAlgebra& alg, const Op& a) {
  if (a.num_blocks() != alg.num_blocks())
    throw StructuralError("operator has " + std::to_string(a.num_blocks()) +
                          " blocks, algebra has " + std::to_string(alg.num_blocks()));
  for (std::size_t k = 0; k < alg.num_blocks(); ++k) {
    const int m = alg.block_dim(k);
    if (a.block(k).rows() != m || a.block(k).cols() != m)
      throw StructuralError("block " + std::to_string(k) + " is not " +
                            std::to_string(m) + "x" + std::to_string(m));
  }
}

/// tau(a) = sum_k lambda_k Tr(a_k).
inline cplx trace(const TracialAlgebra& alg, const Op& a) {
  check_shape(alg, a);
  cplx t = 0.0;
  for (std::size_t k = 0; k < alg.num_blocks(); ++k) t += alg.weight(k) * a.block(k).trace();
  return t;
}

/// tau(a* b) without forming the product.
inline cplx inner(const TracialAlgebra& alg, const Op& a, const Op& b) {
  check_shape(alg, a);
  check_shape(alg, b);
  cplx t = 0.0;
  for (std::size_t k = 0; k < alg.num_blocks(); ++k)
    t += alg.weight(k) * a.block(k).cwiseProduct(b.block(k).conjugate()).sum();
  return std::conj(t);
}

namespace detail {

inline RVector singular_values(const Matrix& m) {
  if (m.size() == 0) return RVector();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

/// (sum_k w_k sum_j s_kj^p)^{1/p}, scaled so large p does not overflow.
inline double weighted_p_sum(std::span<const RVector> sv, std::span<const double> w,
                             double p) {
  double top = 0.0;
  for (const auto& s : sv)
    if (s.size() > 0) top = std::max(top, s.maxCoeff());
  if (top == 0.0) return 0.0;
  if (std::isinf(p)) return top;
  double acc = 0.0;
  for (std::size_t k = 0; k < sv.size(); ++k)
    for (Eigen::Index j = 0; j < sv[k].size(); ++j)
      acc += w[k] * std::pow(sv[k](j) / top, p);
  return top * std::pow(acc, 1.0 / p);
}

inline void check_exponent(double p) {
  if (std::isnan(p) || p < 1.0) throw DomainError("Schatten exponent must satisfy p >= 1");
}

}  // namespace detail

/// tau(|a|^p)^{1/p}; p = infinity gives the largest singular value.
inline double schatten_norm(const TracialAlgebra& alg, const Op& a, double p) {
  detail::check_exponent(p);
  check_shape(alg, a);
  std::vector<RVector> sv;
  sv.reserve(alg.num_blocks());
  for (const auto& b : a.blocks()) sv.push_back(detail::singular_values(b));
  return detail::weighted_p_sum(sv, alg.trace_weights(), p);
}

inline double operator_norm(const TracialAlgebra& alg, const Op& a) {
  return schatten_norm(alg, a, kInf);
}

/// Norm of a list of blocks with weights, plus the Euclidean gradient G
/// (d||Z||_p = Re sum_k Tr(G_k^* dZ_k)). Blocks may be rectangular.
inline double schatten_norm_with_gradient(std::span<const Matrix> blocks,
                                          std::span<const double> weights, double p,
                                          std::vector<Matrix>* gradient) {
  detail::check_exponent(p);
  std::vector<Eigen::JacobiSVD<Matrix>> svds;
  svds.reserve(blocks.size());
  std::vector<RVector> sv;
  for (const auto& b : blocks) {
    svds.emplace_back(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    sv.push_back(svds.back().singularValues());
  }
  const double norm = detail::weighted_p_sum(sv, weights, p);
  if (!gradient) return norm;
  gradient->clear();
  for (const auto& b : blocks) gradient->push_back(Matrix::Zero(b.rows(), b.cols()));
  if (norm == 0.0) return norm;

  if (std::isinf(p)) {
    std::size_t best_block = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < sv.size(); ++k)
      if (sv[k].size() > 0 && sv[k](0) > best) {
        best = sv[k](0);
        best_block = k;
      }
    const auto& s = svds[best_block];
    (*gradient)[best_block] = s.matrixU().col(0) * s.matrixV().col(0).adjoint();
    return norm;
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& s = svds[k];
    RVector scale(sv[k].size());
    for (Eigen::Index j = 0; j < sv[k].size(); ++j) {
      const double r = sv[k](j) / norm;
      scale(j) = (p == 1.0) ? (r > 1e-14 ? 1.0 : 0.0) : std::pow(r, p - 1.0);
    }
    (*gradient)[k] = weights[k] * (s.matrixU() * scale.asDiagonal() * s.matrixV().adjoint());
  }
  return norm;
}

/// Eigendecomposition of a Hermitian operator, one entry per block.
struct HermitianSpectrum {
  std::vector<RVector> values;
  std::vector<Matrix> vectors;

  double max_value() const {
    double v = -kInf;
    for (const auto& e : values)
      if (e.size() > 0) v = std::max(v, e.maxCoeff());
    return v;
  }
  double max_abs_value() const {
    double v = 0.0;
    for (const auto& e : values)
      if (e.size() > 0) v = std::max(v, e.cwiseAbs().maxCoeff());
    return v;
  }
};

/// Symmetrizes (X + X*)/2 and diagonalizes; rejects X whose asymmetry
/// exceeds kHermitianTol relative to max(1, ||X||_max).
inline HermitianSpectrum eigh(const TracialAlgebra& alg, const Op& x) {
  check_shape(alg, x);
  HermitianSpectrum out;
  for (std::size_t k = 0; k < alg.num_blocks(); ++k) {
    const Matrix& b = x.block(k);
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    const double asym = (b - b.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermitianTol * scale)
      throw DomainError("operator is not Hermitian (asymmetry " + std::to_string(asym) + ")");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (b + b.adjoint()));
    out.values.push_back(es.eigenvalues());
    out.vectors.push_back(es.eigenvectors());
  }
  return out;
}

/// Rebuilds sum_j f(lambda_j) v_j v_j^* block by block.
template <class F>
Op spectral_map(const HermitianSpectrum& spec, F&& f) {
  std::vector<Matrix> blocks;
  blocks.reserve(spec.values.size());
  for (std::size_t k = 0; k < spec.values.size(); ++k) {
    RVector fv = spec.values[k].unaryExpr([&](double l) { return f(l); });
    const Matrix& v = spec.vectors[k];
    blocks.push_back(v * fv.asDiagonal() * v.adjoint());
  }
  return Op(std::move(blocks));
}

template <class F>
Op hermitian_apply(const TracialAlgebra& alg, const Op& x, F&& f) {
  return spectral_map(eigh(alg, x), std::forward<F>(f));
}

struct PolarDecomposition {
  Op isometry;  ///< partial isometry v with v*v = supp(|a|)
  Op modulus;   ///< |a| = (a*a)^{1/2}
};

/// a = v |a|, computed from the SVD of each block.
inline PolarDecomposition polar(const TracialAlgebra& alg, const Op& a,
                                double eps_rel = kSupportEps) {
  check_shape(alg, a);
  const double cutoff = eps_rel * operator_norm(alg, a);
  std::vector<Matrix> v, mod;
  for (const auto& b : a.blocks()) {
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector& s = svd.singularValues();
    RVector keep = s.unaryExpr([&](double x) { return x > cutoff ? 1.0 : 0.0; });
    const Matrix& u = svd.matrixU();
    const Matrix& w = svd.matrixV();
    v.push_back(u * keep.asDiagonal() * w.adjoint());
    mod.push_back(w * s.asDiagonal() * w.adjoint());
  }
  return {Op(std::move(v)), Op(std::move(mod))};
}

/// Spectral projection of |a| onto eigenvalues above eps_rel * ||a||_inf.
inline Op support(const TracialAlgebra& alg, const Op& a, double eps_rel = kSupportEps) {
  if (!(eps_rel > 0.0 && eps_rel < 1.0)) throw DomainError("eps_rel must lie in (0, 1)");
  check_shape(alg, a);
  const double cutoff = eps_rel * operator_norm(alg, a);
  std::vector<Matrix> q;
  for (const auto& b : a.blocks()) {
    if (cutoff == 0.0) {
      q.push_back(Matrix::Zero(b.rows(), b.cols()));
      continue;
    }
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullV);
    RVector keep = svd.singularValues().unaryExpr([&](double x) { return x > cutoff ? 1.0 : 0.0; });
    const Matrix& w = svd.matrixV();
    q.push_back(w * keep.asDiagonal() * w.adjoint());
  }
  return Op(std::move(q));
}

/// Number of singular values above eps_rel * ||a||_inf.
inline int numerical_rank(const TracialAlgebra& alg, const Op& a, double eps_rel = kSupportEps) {
  check_shape(alg, a);
  const double cutoff = eps_rel * operator_norm(alg, a);
  if (cutoff == 0.0) return 0;
  int r = 0;
  for (const auto& b : a.blocks()) r += int((detail::singular_values(b).array() > cutoff).count());
  return r;
}

/// lambda -> lambda^r on eigenvalues above eps_rel * lambda_max, 0 elsewhere.
/// For r < 0 this is the q-inverse power X_q^r; r = 0 gives supp(X).
inline Op power_on_support(const TracialAlgebra& alg, const Op& x, double r,
                           double eps_rel = kSupportEps) {
  const HermitianSpectrum spec = eigh(alg, x);
  const double top = spec.max_abs_value();
  if (top == 0.0) return Op::zero(alg);
  for (const auto& e : spec.values)
    if (e.size() > 0 && e.minCoeff() < -kHermitianTol * std::max(1.0, top))
      throw DomainError("power_on_support needs a positive semidefinite operator");
  const double cutoff = eps_rel * top;
  return spectral_map(spec, [&](double l) { return l > cutoff ? std::pow(l, r) : 0.0; });
}

/// (X)^{1/2} for positive semidefinite X, negative round-off clipped to 0.
inline Op psd_sqrt(const TracialAlgebra& alg, const Op& x) {
  return hermitian_apply(alg, x, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

/// sum_i x_i^* x_i.
inline Op column_square(const TracialAlgebra& alg, std::span<const Op> xs) {
  Op s = Op::zero(alg);
  for (const auto& x : xs) {
    check_shape(alg, x);
    for (std::size_t k = 0; k < alg.num_blocks(); ++k) s.block(k) += x.block(k).adjoint() * x.block(k);
  }
  return s;
}

/// Spectrum of X = (sum_i x_i^* x_i)^{1/2} from the SVD of the stacked
/// column [x_1; ...; x_n] per block. Going through S = X^2 would turn
/// round-off eigenvalues of S (~1e-16 ||S||) into ~1e-8 ||X|| in X, above
/// the support cutoff.
inline HermitianSpectrum column_spectrum(const TracialAlgebra& alg, std::span<const Op> xs) {
  HermitianSpectrum out;
  for (std::size_t k = 0; k < alg.num_blocks(); ++k) {
    const int m = alg.block_dim(k);
    Matrix z(Eigen::Index(xs.size()) * m, m);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      check_shape(alg, xs[i]);
      z.middleRows(Eigen::Index(i) * m, m) = xs[i].block(k);
    }
    Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeFullV);
    RVector s = RVector::Zero(m);
    s.head(svd.singularValues().size()) = svd.singularValues();
    out.values.push_back(std::move(s));
    out.vectors.push_back(svd.matrixV());
  }
  return out;
}

/// X = (sum_i x_i^* x_i)^{1/2}.
inline Op column_square_function(const TracialAlgebra& alg, std::span<const Op> xs) {
  return spectral_map(column_spectrum(alg, xs), [](double s) { return s; });
}

/// Gram matrix [tau(x_i^* y_j)].
inline Matrix trace_gram(const TracialAlgebra& alg, std::span<const Op> xs,
                         std::span<const Op> ys) {
  Matrix g(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) g(i, j) = inner(alg, xs[i], ys[j]);
  return g;
}

/// Ordered, linearly independent basis of an n-dimensional E in L_p(M).
class Subspace {
 public:
  Subspace(TracialAlgebra alg, std::vector<Op> basis, double rank_tol = 1e-12)
      : alg_(std::move(alg)), basis_(std::move(basis)) {
    if (basis_.empty()) throw StructuralError("subspace basis is empty");
    for (const auto& x : basis_) check_shape(alg_, x);
    if (int(basis_.size()) > alg_.dimension())
      throw StructuralError("more basis elements than the algebra dimension");
    const Matrix g = trace_gram(alg_, basis_, basis_);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.adjoint()));
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || lo < rank_tol * hi)
      throw StructuralError("subspace basis is not linearly independent");
  }

  const TracialAlgebra& algebra() const { return alg_; }
  const std::vector<Op>& basis() const { return basis_; }
  int dim() const { return int(basis_.size()); }

  /// sum_i c_i x_i.
  Op element(const CVector& c) const {
    if (c.size() != dim()) throw StructuralError("coefficient vector has wrong length");
    Op y = Op::zero(alg_);
    for (int i = 0; i < dim(); ++i) y += c(i) * basis_[i];
    return y;
  }

  /// Basis x'_j = sum_i x_i T_ij.
  std::vector<Op> transformed_basis(const Matrix& t) const {
    std::vector<Op> out;
    out.reserve(t.cols());
    for (Eigen::Index j = 0; j < t.cols(); ++j) out.push_back(element(t.col(j)));
    return out;
  }

  /// Subspace {(x, x^t)} of L_p(M (+) M^op).
  Subspace doubled() const {
    std::vector<Op> out;
    out.reserve(basis_.size());
    for (const auto& x : basis_) {
      std::vector<Matrix> b(x.blocks());
      for (const auto& m : x.blocks()) b.push_back(m.transpose());
      out.emplace_back(std::move(b));
    }
    return Subspace(alg_.doubled(), std::move(out));
  }

 private:
  TracialAlgebra alg_;
  std::vector<Op> basis_;
};

/// sum_i alpha_i (x) x_i as an element of M_k (x) M (alpha on the left).
inline Op amplify(const TracialAlgebra& alg, std::span<const Matrix> coeffs,
                  std::span<const Op> xs) {
  if (coeffs.size() != xs.size()) throw StructuralError("coefficient family and basis differ in length");
  if (coeffs.empty()) throw StructuralError("empty coefficient family");
  const Eigen::Index k = coeffs[0].rows();
  std::vector<Matrix> blocks;
  for (std::size_t b = 0; b < alg.num_blocks(); ++b) {
    const int m = alg.block_dim(b);
    Matrix z = Matrix::Zero(k * m, k * m);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      const Matrix& a = coeffs[i];
      if (a.rows() != k || a.cols() != k) throw StructuralError("coefficients must all be k x k");
      const Matrix& x = xs[i].block(b);
      for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index s = 0; s < k; ++s)
          if (a(r, s) != 0.0) z.block(r * m, s * m, m, m) += a(r, s) * x;
    }
    blocks.push_back(std::move(z));
  }
  return Op(std::move(blocks));
}

}  // namespace nclp
