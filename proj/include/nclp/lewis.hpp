#pragma once

// Lewis bases of finite-dimensional subspaces E of L_p(M): bases (x_i) with
// X = (sum x_i^* x_i)^{1/2}, tau(X^p) = n and tau(D x_i^* x_j) = delta_ij,
// where D = X^{p-2} (on the support of X when p < 2).

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "nclp/algebra.hpp"
#include "nclp/optimize.hpp"
#include "nclp/random.hpp"

namespace nclp {

struct LewisOptions {
  double tol = 1e-9;
  int max_iter = 2000;
  /// Exponent d in x <- x G^{-d/2}; unset means default_damping(p).
  std::optional<double> damping;
  double eps_rel = kSupportEps;
};

/// 1 for p < 4, 2/p above (0.5 at p = 4).
inline double default_damping(double p) { return p < 4.0 ? 1.0 : 2.0 / p; }

struct LewisBasisResult {
  TracialAlgebra algebra;
  double p = 2.0;
  std::vector<Op> basis;
  Op square_function;  ///< X
  Op density;          ///< X^{p-2}, or the q-inverse power for p < 2
  /// x_out_j = sum_i x_in_i C_ij, upper triangular with positive diagonal.
  Matrix change_of_basis;
  double gram_residual = 0.0;           ///< ||G - I||_F
  double normalization_residual = 0.0;  ///< |tau(X^p) - n|
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_trace;

  int dim() const { return int(basis.size()); }
  /// X^p, the quantity compared across bases of the same E.
  Op density_power() const { return power_on_support(algebra, square_function, p); }
};

namespace detail {

struct DensityState {
  Op x;             // X
  Op d;             // D
  double trace_xp;  // tau(X^p)
};

/// X, D and tau(X^p) from one spectral decomposition of X.
inline DensityState density_state(const TracialAlgebra& alg, std::span<const Op> xs, double p,
                                  double eps_rel) {
  const HermitianSpectrum spec = column_spectrum(alg, xs);
  const double cut = eps_rel * spec.max_abs_value();
  DensityState st;
  st.x = spectral_map(spec, [](double s) { return s; });
  st.d = spectral_map(spec, [&](double s) { return s > cut ? std::pow(s, p - 2.0) : 0.0; });
  st.trace_xp = 0.0;
  for (std::size_t b = 0; b < spec.values.size(); ++b)
    for (Eigen::Index j = 0; j < spec.values[b].size(); ++j) {
      const double s = spec.values[b](j);
      if (s > cut) st.trace_xp += alg.weight(b) * std::pow(s, p);
    }
  return st;
}

/// G_ij = tau(D x_i^* y_j).
inline Matrix density_gram(const TracialAlgebra& alg, const Op& d, std::span<const Op> xs,
                           std::span<const Op> ys) {
  std::vector<Op> yd;
  yd.reserve(ys.size());
  for (const auto& y : ys) yd.push_back(y * d);
  return trace_gram(alg, xs, yd);
}

/// Hermitian G^r via eigendecomposition; throws when G is numerically
/// singular.
inline Matrix gram_power(const Matrix& g, double r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.adjoint()));
  const RVector& ev = es.eigenvalues();
  if (!(ev.maxCoeff() > 0.0) || ev.minCoeff() < 1e-14 * ev.maxCoeff())
    throw SolverError("Lewis iteration: density Gram matrix is singular (basis collapsed)");
  RVector f = ev.unaryExpr([r](double l) { return std::pow(l, r); });
  return es.eigenvectors() * f.asDiagonal() * es.eigenvectors().adjoint();
}

inline std::vector<Op> combine(std::span<const Op> xs, const Matrix& c, const TracialAlgebra& alg) {
  std::vector<Op> out;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    Op y = Op::zero(alg);
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      if (c(i, j) != 0.0) y += c(i, j) * xs[i];
    out.push_back(std::move(y));
  }
  return out;
}

/// Replaces the change of basis by the unique upper-triangular one with
/// positive diagonal that is orthonormal for the final density, and fills
/// in the residuals from scratch.
inline void canonicalize(LewisBasisResult& r, std::span<const Op> input, const Matrix& c,
                         double eps_rel) {
  const TracialAlgebra& alg = r.algebra;
  const int n = int(input.size());
  const DensityState st = density_state(alg, combine(input, c, alg), r.p, eps_rel);
  const Matrix h = density_gram(alg, st.d, input, input);
  Eigen::LLT<Matrix> llt(0.5 * (h + h.adjoint()));
  Matrix canon = c;
  if (llt.info() == Eigen::Success) {
    const Matrix lstar = llt.matrixL().adjoint();
    canon = lstar.triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
  }
  r.change_of_basis = canon;
  r.basis = combine(input, canon, alg);
  const DensityState fin = density_state(alg, r.basis, r.p, eps_rel);
  r.square_function = fin.x;
  r.density = fin.d;
  const Matrix g = density_gram(alg, fin.d, r.basis, r.basis);
  r.gram_residual = (g - Matrix::Identity(n, n)).norm();
  r.normalization_residual = std::abs(fin.trace_xp - n);
}

inline void check_lewis_exponent(double p) {
  if (!(p >= 1.0) || std::isinf(p)) throw DomainError("Lewis bases need 1 <= p < inf");
}

}  // namespace detail

/// Fixed-point iteration: orthonormalize under the current density
/// (x <- x G^{-d/2}), rescale so tau(X^p) = n, repeat until
/// ||G - I||_F < tol. Non-convergence is reported through `converged`.
inline LewisBasisResult lewis_basis(const Subspace& e, double p, const LewisOptions& opt = {}) {
  detail::check_lewis_exponent(p);
  const TracialAlgebra& alg = e.algebra();
  const int n = e.dim();
  const double damping = opt.damping.value_or(default_damping(p));
  if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");

  LewisBasisResult r;
  r.algebra = alg;
  r.p = p;
  // Iterate to a tenth of tol so the canonical basis, which differs from
  // the iterate by an almost-unitary mixing, still meets tol.
  const double inner_tol = 0.1 * opt.tol;
  Matrix c = Matrix::Identity(n, n);
  Matrix best_c = c;
  double best_res = kInf;
  for (int it = 0; it <= opt.max_iter; ++it) {
    std::vector<Op> xs = detail::combine(e.basis(), c, alg);
    detail::DensityState st = detail::density_state(alg, xs, p, opt.eps_rel);
    if (!(st.trace_xp > 0.0)) throw SolverError("Lewis iteration: square function vanished");
    const double s = std::pow(n / st.trace_xp, 1.0 / p);
    c *= s;
    for (auto& x : xs) x *= s;
    st.d *= std::pow(s, p - 2.0);
    const Matrix g = detail::density_gram(alg, st.d, xs, xs);
    const double res = (g - Matrix::Identity(n, n)).norm();
    r.residual_trace.push_back(res);
    r.iterations = it;
    if (res < best_res) {
      best_res = res;
      best_c = c;
    }
    if (res < inner_tol || it == opt.max_iter) break;
    // Stalled at round-off level above inner_tol: stop once tol is met.
    if (res < opt.tol && it >= 5 && r.residual_trace[it - 5] <= 2.0 * res) break;
    c = c * detail::gram_power(g, -0.5 * damping);
  }
  detail::canonicalize(r, e.basis(), best_c, opt.eps_rel);
  r.converged = r.gram_residual < opt.tol;
  return r;
}

struct DetmaxOptions {
  int restarts = 8;
  std::uint64_t seed = 0;
  int max_iter = 20000;
  /// Refuse instances above these sizes (the oracle is for cross-checks).
  int max_algebra_dimension = 64;
  int max_subspace_dimension = 4;
  double eps_rel = kSupportEps;
};

/// Maximizes |det M| over bases x = x_in M subject to
/// ||(sum x_i^* x_i)^{1/2}||_p <= n^{1/p} by direct ascent on the
/// scale-invariant objective log|det M| - (n/p) log tau(X(M)^p), with
/// random restarts. The maximizer satisfies the Lewis conditions.
inline LewisBasisResult detmax_oracle(const Subspace& e, double p, const DetmaxOptions& opt = {}) {
  detail::check_lewis_exponent(p);
  const TracialAlgebra& alg = e.algebra();
  const int n = e.dim();
  if (alg.dimension() > opt.max_algebra_dimension || n > opt.max_subspace_dimension)
    throw DomainError("detmax_oracle: instance exceeds the oracle size cap");
  const std::vector<Op>& in = e.basis();

  auto objective = [&](const RVector& v, RVector* grad) -> double {
    const Matrix m = detail::unpack(v, 1, n, n)[0];
    Eigen::PartialPivLU<Matrix> lu(m);
    const cplx det = lu.determinant();
    if (!(std::abs(det) > 0.0)) {
      if (grad) *grad = RVector::Zero(v.size());
      return kInf;
    }
    const std::vector<Op> xs = detail::combine(in, m, alg);
    const HermitianSpectrum spec = column_spectrum(alg, xs);
    const double cut = opt.eps_rel * spec.max_abs_value();
    double f = 0.0;
    for (std::size_t b = 0; b < spec.values.size(); ++b)
      for (Eigen::Index j = 0; j < spec.values[b].size(); ++j)
        if (spec.values[b](j) > cut) f += alg.weight(b) * std::pow(spec.values[b](j), p);
    const double val = std::log(std::abs(det)) - (n / p) * std::log(f);
    if (grad) {
      // dJ = Re tr(Z dM), Z = M^{-1} - (n/F) N, N_ji = tau(X^{p-2} x_j^* x_in_i).
      const Op sr = spectral_map(spec, [&](double l) { return l > cut ? std::pow(l, p - 2.0) : 0.0; });
      Matrix nmat(n, n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) nmat(j, i) = trace(alg, sr * xs[j].adjoint() * in[i]);
      const Matrix z = lu.inverse() - (n / f) * nmat;
      *grad = -detail::pack(Family{z.adjoint()});
    }
    return -val;
  };

  MinimizeOptions mo;
  mo.max_iter = opt.max_iter;
  mo.ftol = 1e-16;
  mo.window = 200;
  double best_val = kInf;
  Matrix best_m = Matrix::Identity(n, n);
  for (int rs = 0; rs < std::max(1, opt.restarts); ++rs) {
    Matrix m0 = Matrix::Identity(n, n);
    if (rs > 0) {
      auto rng = make_rng(opt.seed, {0xde7u, std::uint64_t(rs)});
      m0 = random_gaussian(rng, n, n);
    }
    // Stationarity: Z M = I - (n/F) G vanishes at the maximizer.
    auto stop = [&](const RVector& x, double, const RVector& g) {
      const Matrix m = detail::unpack(x, 1, n, n)[0];
      const Matrix z = detail::unpack(-g, 1, n, n)[0].adjoint();
      return (z * m).norm() < 1e-13;
    };
    MinimizeResult res = minimize_bb(objective, detail::pack(Family{m0}), mo, stop);
    if (res.value < best_val) {
      best_val = res.value;
      best_m = detail::unpack(res.x, 1, n, n)[0];
    }
  }

  LewisBasisResult r;
  r.algebra = alg;
  r.p = p;
  const std::vector<Op> xs = detail::combine(in, best_m, alg);
  const detail::DensityState st = detail::density_state(alg, xs, p, opt.eps_rel);
  best_m *= std::pow(n / st.trace_xp, 1.0 / p);
  detail::canonicalize(r, in, best_m, opt.eps_rel);
  r.iterations = 0;
  r.converged = true;
  return r;
}

struct LewisResidualReport {
  double gram_residual = 0.0;           ///< ||[tau(D x_i^* x_j)] - I||_F
  double gram_hermitian_residual = 0.0; ///< ||G - G^*||_F
  double normalization_residual = 0.0;  ///< |tau(X^p) - n|
  double square_function_residual = 0.0;///< ||X^2 - sum x_i^* x_i||_inf
  double support_residual = 0.0;        ///< max_i ||x_i q - x_i||_inf / max_i ||x_i||_inf
};

/// Recomputes every Lewis condition from the basis alone.
inline LewisResidualReport verify_conditions(const LewisBasisResult& r, double p,
                                             double eps_rel = kSupportEps) {
  detail::check_lewis_exponent(p);
  const TracialAlgebra& alg = r.algebra;
  const int n = r.dim();
  LewisResidualReport rep;
  const Op s = column_square(alg, r.basis);
  const Op x = column_square_function(alg, r.basis);
  const Op d = power_on_support(alg, x, p - 2.0, eps_rel);
  const Matrix g = detail::density_gram(alg, d, r.basis, r.basis);
  rep.gram_residual = (g - Matrix::Identity(n, n)).norm();
  rep.gram_hermitian_residual = (g - g.adjoint()).norm();
  rep.normalization_residual = std::abs(trace(alg, power_on_support(alg, x, p, eps_rel)).real() - n);
  rep.square_function_residual = operator_norm(alg, r.square_function * r.square_function - s);
  const Op q = support(alg, x, eps_rel);
  double scale = 0.0, worst = 0.0;
  for (const auto& xi : r.basis) {
    scale = std::max(scale, operator_norm(alg, xi));
    worst = std::max(worst, operator_norm(alg, xi * q - xi));
  }
  rep.support_residual = scale > 0.0 ? worst / scale : 0.0;
  return rep;
}

}  // namespace nclp
