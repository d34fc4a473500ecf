#pragma once

// Matrix-coefficient (S_p^k-amplified) norms of row and column spaces,
// their intersection and sum, the opposite-transpose identity, and
// lower estimates of completely bounded norms by amplification.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nclp/algebra.hpp"
#include "nclp/optimize.hpp"
#include "nclp/random.hpp"

namespace nclp {

namespace detail {

inline void check_family(std::span<const Matrix> f) {
  if (f.empty()) return;
  const Eigen::Index k = f[0].rows();
  for (const auto& m : f)
    if (m.rows() != k || m.cols() != k)
      throw StructuralError("coefficient matrices must all be square of one size");
}

/// [alpha_1; ...; alpha_n], a kn x k matrix with Z^*Z = sum alpha_i^* alpha_i.
inline Matrix stack_column(std::span<const Matrix> f) {
  const Eigen::Index k = f[0].rows();
  Matrix z(k * Eigen::Index(f.size()), k);
  for (std::size_t i = 0; i < f.size(); ++i) z.middleRows(Eigen::Index(i) * k, k) = f[i];
  return z;
}

/// [alpha_1 ... alpha_n], a k x kn matrix with Z Z^* = sum alpha_i alpha_i^*.
inline Matrix stack_row(std::span<const Matrix> f) {
  const Eigen::Index k = f[0].rows();
  Matrix z(k, k * Eigen::Index(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) z.middleCols(Eigen::Index(i) * k, k) = f[i];
  return z;
}

inline double stacked_norm(std::span<const Matrix> f, double p, bool column, Family* grad) {
  check_family(f);
  if (f.empty()) {
    if (grad) grad->clear();
    return 0.0;
  }
  const Matrix z = column ? stack_column(f) : stack_row(f);
  const double one = 1.0;
  std::vector<Matrix> g;
  const double v = schatten_norm_with_gradient(std::span<const Matrix>(&z, 1),
                                               std::span<const double>(&one, 1), p,
                                               grad ? &g : nullptr);
  if (grad) {
    const Eigen::Index k = f[0].rows();
    grad->assign(f.size(), Matrix());
    for (std::size_t i = 0; i < f.size(); ++i)
      (*grad)[i] = column ? Matrix(g[0].middleRows(Eigen::Index(i) * k, k))
                          : Matrix(g[0].middleCols(Eigen::Index(i) * k, k));
  }
  return v;
}

/// Re sum_i Tr(a_i^* b_i).
inline double pairing(std::span<const Matrix> a, std::span<const Matrix> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i].conjugate()).sum().real();
  return s;
}

}  // namespace detail

/// ||(sum_i alpha_i^* alpha_i)^{1/2}||_{S_p^k}: the S_p^k[C_p^n] norm of
/// sum_i alpha_i (x) delta_i.
inline double column_norm(std::span<const Matrix> coeffs, double p, Family* grad = nullptr) {
  return detail::stacked_norm(coeffs, p, true, grad);
}

/// ||(sum_i alpha_i alpha_i^*)^{1/2}||_{S_p^k}: the S_p^k[R_p^n] norm.
inline double row_norm(std::span<const Matrix> coeffs, double p, Family* grad = nullptr) {
  return detail::stacked_norm(coeffs, p, false, grad);
}

/// R_p^n cap C_p^n with the l_infinity convention: max(row, column).
inline double intersection_norm(std::span<const Matrix> coeffs, double p, Family* grad = nullptr) {
  Family gr, gc;
  const double r = row_norm(coeffs, p, grad ? &gr : nullptr);
  const double c = column_norm(coeffs, p, grad ? &gc : nullptr);
  if (grad) *grad = r >= c ? gr : gc;
  return std::max(r, c);
}

/// Coset representative alpha_i = b_i + c_i realizing an R_p^n + C_p^n norm.
struct DecompositionWitness {
  Family row_part;     ///< b_i, measured in R_p^n
  Family column_part;  ///< c_i, measured in C_p^n
  double value = 0.0;  ///< row_norm(b) + column_norm(c)
};

struct SumNormOptions {
  double solver_tol = 1e-7;  ///< certified relative duality gap
  int restarts = 8;
  int max_iter = 5000;
  std::uint64_t seed = 0;
  /// Optional starting row part (e.g. from a nearby family).
  const Family* warm_start = nullptr;
};

struct SumNormResult {
  DecompositionWitness witness;
  double lower_bound = 0.0;  ///< dual certificate: true norm >= lower_bound
  bool converged = false;
  int iterations = 0;
  Family gradient;  ///< a subgradient of the sum norm at alpha (envelope)
};

/// Thrown by sum_norm when the duality gap does not close; carries the
/// best decomposition found.
class SumNormNotConverged : public SolverError {
 public:
  SumNormNotConverged(SumNormResult best)
      : SolverError("sum_norm: duality gap did not close within the iteration cap"),
        best_(std::move(best)) {}
  const SumNormResult& best() const { return best_; }

 private:
  SumNormResult best_;
};

namespace detail {

/// Lower bound Re<Z, alpha> / max(row_{p'}(Z), column_{p'}(Z)) from the
/// dual norm of R_p + C_p.
inline double sum_dual_bound(std::span<const Matrix> z, std::span<const Matrix> alpha, double p) {
  const double q = conjugate_exponent(p);
  const double d = std::max(row_norm(z, q), column_norm(z, q));
  if (!(d > 0.0)) return 0.0;
  return std::max(0.0, pairing(z, alpha) / d);
}

}  // namespace detail

/// inf over alpha_i = b_i + c_i of row_norm(b) + column_norm(c), by
/// Barzilai-Borwein descent in b with random restarts. The returned value
/// is an upper bound; `lower_bound` is a dual certificate, and
/// `converged` means their relative gap is below solver_tol.
inline SumNormResult sum_norm_solve(std::span<const Matrix> alpha, double p,
                                    const SumNormOptions& opt = {}) {
  detail::check_family(alpha);
  SumNormResult out;
  const int n = int(alpha.size());
  if (n == 0 || detail::family_frobenius(Family(alpha.begin(), alpha.end())) == 0.0) {
    for (const auto& a : alpha) {
      out.witness.row_part.push_back(Matrix::Zero(a.rows(), a.cols()));
      out.witness.column_part.push_back(Matrix::Zero(a.rows(), a.cols()));
      out.gradient.push_back(Matrix::Zero(a.rows(), a.cols()));
    }
    out.converged = true;
    return out;
  }
  const Eigen::Index k = alpha[0].rows();
  const Family a(alpha.begin(), alpha.end());
  const double scale = detail::family_frobenius(a);

  auto split = [&](const RVector& v) {
    Family b = detail::unpack(v, n, k, k);
    Family c(n);
    for (int i = 0; i < n; ++i) c[i] = a[i] - b[i];
    return std::make_pair(std::move(b), std::move(c));
  };
  auto objective = [&](const RVector& v, RVector* g) {
    auto [b, c] = split(v);
    Family gb, gc;
    const double val = row_norm(b, p, g ? &gb : nullptr) + column_norm(c, p, g ? &gc : nullptr);
    if (g) {
      for (int i = 0; i < n; ++i) gb[i] -= gc[i];
      *g = detail::pack(gb);
    }
    return val;
  };
  // Dual candidates: gradients of both parts and their midpoint.
  auto certify = [&](const RVector& v, Family* zbest) {
    auto [b, c] = split(v);
    Family gb, gc;
    row_norm(b, p, &gb);
    column_norm(c, p, &gc);
    double bound = 0.0;
    Family mid(n);
    for (int i = 0; i < n; ++i) mid[i] = 0.5 * (gb[i] + gc[i]);
    for (const Family* z : {&gc, &gb, &mid}) {
      const double l = detail::sum_dual_bound(*z, a, p);
      if (l > bound) {
        bound = l;
        if (zbest) *zbest = *z;
      }
    }
    return bound;
  };

  std::vector<RVector> starts;
  if (opt.warm_start && int(opt.warm_start->size()) == n) starts.push_back(detail::pack(*opt.warm_start));
  starts.push_back(RVector::Zero(2 * n * k * k));
  starts.push_back(detail::pack(a));
  auto rng = make_rng(opt.seed, {0x5u});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (int(starts.size()) < std::max(1, opt.restarts)) {
    Family b = random_family(rng, n, int(k));
    const double t = unif(rng);
    const double noise = 0.5 * scale / std::max(1e-300, detail::family_frobenius(b));
    for (int i = 0; i < n; ++i) b[i] = t * a[i] + noise * b[i];
    starts.push_back(detail::pack(b));
  }
  starts.resize(std::max(1, opt.restarts));

  MinimizeOptions mo;
  mo.max_iter = opt.max_iter;
  mo.ftol = 1e-15;
  mo.window = 50;
  double best_val = kInf;
  double best_lower = 0.0;
  RVector best_x;
  Family best_z;
  int total_it = 0;
  for (const auto& x0 : starts) {
    double lower_here = 0.0;
    int check = 0;
    auto stop = [&](const RVector& x, double fx, const RVector&) {
      if (++check % 10 != 1) return false;
      lower_here = std::max(lower_here, certify(x, nullptr));
      return fx - std::max(lower_here, best_lower) <= opt.solver_tol * fx;
    };
    MinimizeResult r = minimize_bb(objective, x0, mo, stop);
    total_it += r.iterations;
    Family z;
    const double l = certify(r.x, &z);
    if (l > best_lower) {
      best_lower = l;
      best_z = z;
    }
    best_lower = std::max(best_lower, lower_here);
    if (r.value < best_val) {
      best_val = r.value;
      best_x = r.x;
    }
    if (best_val - best_lower <= opt.solver_tol * best_val) break;
  }

  auto [b, c] = split(best_x);
  out.witness.row_part = std::move(b);
  out.witness.column_part = std::move(c);
  out.witness.value = best_val;
  out.lower_bound = std::min(best_lower, best_val);
  out.converged = best_val - best_lower <= opt.solver_tol * best_val;
  out.iterations = total_it;
  // Envelope subgradient: gradient of the column part at the optimum.
  column_norm(out.witness.column_part, p, &out.gradient);
  return out;
}

/// Value and witness of the R_p^n + C_p^n norm; throws SumNormNotConverged
/// (with the best witness) if the certified gap stays above solver_tol.
inline std::pair<double, DecompositionWitness> sum_norm(std::span<const Matrix> alpha, double p,
                                                        const SumNormOptions& opt = {}) {
  SumNormResult r = sum_norm_solve(alpha, p, opt);
  if (!r.converged) throw SumNormNotConverged(std::move(r));
  return {r.witness.value, std::move(r.witness)};
}

/// Both sides of the opposite identity for an N x N array (x_ij) of
/// elements of L_p(M): lhs = ||(x_ij^t)||_{S_p^N(E^op)}, realized as
/// ||sum e_ij (x) x_ij^t||_p, and rhs = ||sum e_ij (x) x_ji||_p.
inline std::pair<double, double> opposite_transpose_check(const TracialAlgebra& alg,
                                                          const std::vector<std::vector<Op>>& x,
                                                          double p) {
  const int N = int(x.size());
  if (N == 0) return {0.0, 0.0};
  for (const auto& row : x)
    if (int(row.size()) != N) throw StructuralError("opposite_transpose_check needs a square array");
  std::vector<Matrix> lhs_blocks, rhs_blocks;
  for (std::size_t b = 0; b < alg.num_blocks(); ++b) {
    const int m = alg.block_dim(b);
    Matrix l = Matrix::Zero(N * m, N * m), r = Matrix::Zero(N * m, N * m);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        check_shape(alg, x[i][j]);
        l.block(i * m, j * m, m, m) = x[i][j].block(b).transpose();
        r.block(i * m, j * m, m, m) = x[j][i].block(b);
      }
    lhs_blocks.push_back(std::move(l));
    rhs_blocks.push_back(std::move(r));
  }
  const TracialAlgebra amp = alg.amplified(N);
  return {schatten_norm(amp, Op(std::move(lhs_blocks)), p),
          schatten_norm(amp, Op(std::move(rhs_blocks)), p)};
}

/// Same check with entries given as coordinates in the basis of E.
inline std::pair<double, double> opposite_transpose_check(
    const Subspace& e, const std::vector<std::vector<CVector>>& coords, double p) {
  std::vector<std::vector<Op>> x;
  for (const auto& row : coords) {
    std::vector<Op> r;
    for (const auto& c : row) r.push_back(e.element(c));
    x.push_back(std::move(r));
  }
  return opposite_transpose_check(e.algebra(), x, p);
}

/// Smallest eigenvalue of 2 (sum alpha_i^* alpha_i) (x) (sum x_i^* x_i)
/// - |sum alpha_i (x) x_i|^2 over all blocks.
inline double tensor_cauchy_gap(const TracialAlgebra& alg, std::span<const Matrix> coeffs,
                                std::span<const Op> xs) {
  detail::check_family(coeffs);
  const Op t = amplify(alg, coeffs, xs);
  Matrix a = Matrix::Zero(coeffs[0].rows(), coeffs[0].cols());
  for (const auto& c : coeffs) a += c.adjoint() * c;
  const Op x2 = column_square(alg, xs);
  double lo = kInf;
  for (std::size_t b = 0; b < alg.num_blocks(); ++b) {
    const int m = alg.block_dim(b);
    const Eigen::Index k = a.rows();
    Matrix big(k * m, k * m);
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index s = 0; s < k; ++s) big.block(r * m, s * m, m, m) = 2.0 * a(r, s) * x2.block(b);
    big -= t.block(b).adjoint() * t.block(b);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (big + big.adjoint()), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Coordinatized spaces and cb-norm lower estimates.

/// A finite-dimensional space with coordinates, given by its amplified
/// norm: `norm(family, grad)` evaluates ||sum alpha_i (x) e_i||_{S_p^k[V]}
/// for a level-k family and optionally a (sub)gradient in alpha.
struct CoordinateSpace {
  std::string name;
  int dim = 0;
  std::function<double(std::span<const Matrix>, Family*)> norm;
};

inline CoordinateSpace column_space(int n, double p) {
  return {"C_p^" + std::to_string(n), n,
          [p](std::span<const Matrix> f, Family* g) { return column_norm(f, p, g); }};
}

inline CoordinateSpace row_space(int n, double p) {
  return {"R_p^" + std::to_string(n), n,
          [p](std::span<const Matrix> f, Family* g) { return row_norm(f, p, g); }};
}

inline CoordinateSpace intersection_space(int n, double p) {
  return {"R_p^" + std::to_string(n) + " cap C_p^" + std::to_string(n), n,
          [p](std::span<const Matrix> f, Family* g) { return intersection_norm(f, p, g); }};
}

/// R_p^n + C_p^n. Successive evaluations warm-start from the previous
/// witness, so one instance must not be shared between threads.
inline CoordinateSpace sum_space(int n, double p, SumNormOptions opt = {}) {
  auto warm = std::make_shared<Family>();
  return {"R_p^" + std::to_string(n) + " + C_p^" + std::to_string(n), n,
          [p, opt, warm](std::span<const Matrix> f, Family* g) {
            SumNormOptions o = opt;
            if (!warm->empty() && (*warm)[0].rows() == (f.empty() ? 0 : f[0].rows()))
              o.warm_start = warm.get();
            SumNormResult r = sum_norm_solve(f, p, o);
            *warm = r.witness.row_part;
            if (g) *g = std::move(r.gradient);
            return r.witness.value;
          }};
}

/// span{x_i} inside L_p(M): ||sum alpha_i (x) x_i||_{L_p(M_k (x) M)}.
inline CoordinateSpace subspace_space(const TracialAlgebra& alg, std::vector<Op> xs, double p,
                                      std::string name = "E") {
  const int n = int(xs.size());
  return {std::move(name), n,
          [alg, xs = std::move(xs), p](std::span<const Matrix> f, Family* grad) {
            const Op t = amplify(alg, f, xs);
            std::vector<Matrix> gz;
            const double v = schatten_norm_with_gradient(t.blocks(), alg.trace_weights(), p,
                                                         grad ? &gz : nullptr);
            if (grad) {
              const Eigen::Index k = f[0].rows();
              grad->assign(f.size(), Matrix::Zero(k, k));
              for (std::size_t i = 0; i < f.size(); ++i)
                for (std::size_t b = 0; b < alg.num_blocks(); ++b) {
                  const int m = alg.block_dim(b);
                  const Matrix xc = xs[i].block(b).conjugate();
                  for (Eigen::Index r = 0; r < k; ++r)
                    for (Eigen::Index s = 0; s < k; ++s)
                      (*grad)[i](r, s) += xc.cwiseProduct(gz[b].block(r * m, s * m, m, m)).sum();
                }
            }
            return v;
          }};
}

/// Matrix units of all blocks, row-major, matching Op::coordinates().
inline std::vector<Op> matrix_unit_basis(const TracialAlgebra& alg) {
  std::vector<Op> units;
  for (std::size_t b = 0; b < alg.num_blocks(); ++b)
    for (int r = 0; r < alg.block_dim(b); ++r)
      for (int s = 0; s < alg.block_dim(b); ++s) units.push_back(Op::matrix_unit(alg, b, r, s));
  return units;
}

/// All of L_p(M) in matrix-unit coordinates.
inline CoordinateSpace algebra_space(const TracialAlgebra& alg, double p) {
  return subspace_space(alg, matrix_unit_basis(alg), p, "L_p(M)");
}

/// Level-k amplified norm ratio of a linear map and the family attaining it.
struct CbEstimate {
  int level = 0;
  double value = 0.0;
  Family witness;
};

struct CbOptions {
  int trials = 200;
  std::uint64_t seed = 0;
  int max_iter = 300;
  /// Families tried before the random ones (e.g. known extremal witnesses).
  std::vector<Family> extra_starts;
};

namespace detail {

inline Family apply_map(const Matrix& t, std::span<const Matrix> beta) {
  const Eigen::Index k = beta[0].rows();
  Family out(t.rows(), Matrix::Zero(k, k));
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t(i, j) != 0.0) out[i] += t(i, j) * beta[j];
  return out;
}

inline Family apply_adjoint(const Matrix& t, std::span<const Matrix> g) {
  const Eigen::Index k = g[0].rows();
  Family out(t.cols(), Matrix::Zero(k, k));
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t(i, j) != 0.0) out[j] += std::conj(t(i, j)) * g[i];
  return out;
}

}  // namespace detail

/// Lower estimate of ||T : S_p^k[src] -> S_p^k[dst]|| at a fixed level k:
/// the best ratio ||T beta||_dst / ||beta||_src over random starts
/// refined by gradient ascent. `t` is dst.dim x src.dim.
inline CbEstimate cb_norm_lower_estimate(const Matrix& t, const CoordinateSpace& src,
                                         const CoordinateSpace& dst, int k,
                                         const CbOptions& opt = {}) {
  if (k < 1) throw DomainError("amplification level must be >= 1");
  if (opt.trials < 1 && opt.extra_starts.empty()) throw DomainError("need at least one trial");
  if (t.rows() != dst.dim || t.cols() != src.dim)
    throw StructuralError("map matrix does not match the space dimensions");
  const int n = src.dim;
  CbEstimate best{k, 0.0, Family(n, Matrix::Zero(k, k))};
  if (t.cwiseAbs().maxCoeff() == 0.0) return best;

  auto ratio = [&](const RVector& v, RVector* g) -> double {
    const Family beta = detail::unpack(v, n, k, k);
    Family gs, gd;
    const double ns = src.norm(beta, g ? &gs : nullptr);
    if (!(ns > 0.0)) {
      if (g) *g = RVector::Zero(v.size());
      return 0.0;
    }
    const Family img = detail::apply_map(t, beta);
    const double nd = dst.norm(img, g ? &gd : nullptr);
    const double r = nd / ns;
    if (g) {
      Family back = detail::apply_adjoint(t, gd);
      for (int j = 0; j < n; ++j) back[j] = (back[j] - r * gs[j]) / ns;
      *g = -detail::pack(back);
    }
    return -r;
  };

  MinimizeOptions mo;
  mo.max_iter = opt.max_iter;
  mo.ftol = 1e-12;
  mo.window = 20;
  auto run = [&](Family beta) {
    const double ns = src.norm(beta, nullptr);
    if (!(ns > 0.0)) return;
    beta = detail::scaled(std::move(beta), 1.0 / ns);
    MinimizeResult r = minimize_bb(ratio, detail::pack(beta), mo);
    if (-r.value > best.value) {
      best.value = -r.value;
      Family w = detail::unpack(r.x, n, k, k);
      best.witness = detail::scaled(w, 1.0 / src.norm(w, nullptr));
    }
  };
  for (const auto& s : opt.extra_starts) {
    if (int(s.size()) != n || s[0].rows() != k) throw StructuralError("extra start has wrong shape");
    run(s);
  }
  for (int trial = 0; trial < opt.trials; ++trial) {
    auto rng = make_rng(opt.seed, {std::uint64_t(k), std::uint64_t(trial)});
    run(random_family(rng, n, k));
  }
  return best;
}

/// Estimates at levels 1..k_max; each level also starts from the lifted
/// witness of the previous one, so the sequence is non-decreasing.
inline std::vector<CbEstimate> cb_norm_levels(const Matrix& t, const CoordinateSpace& src,
                                              const CoordinateSpace& dst, int k_max,
                                              const CbOptions& opt = {}) {
  std::vector<CbEstimate> out;
  for (int k = 1; k <= k_max; ++k) {
    CbOptions o = opt;
    o.extra_starts.clear();
    for (const auto& s : opt.extra_starts)
      if (s[0].rows() <= k) o.extra_starts.push_back(detail::lift(s, k));
    if (!out.empty()) o.extra_starts.push_back(detail::lift(out.back().witness, k));
    CbEstimate e = cb_norm_lower_estimate(t, src, dst, k, o);
    if (!out.empty() && out.back().value > e.value) {
      e.value = out.back().value;
      e.witness = detail::lift(out.back().witness, k);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace nclp
