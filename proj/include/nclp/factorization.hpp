#pragma once

// Change-of-density factorizations L_p(M) --A--> C_p^n --B--> E through the
// Lewis basis, the projection P = BA, the quotient (adjoint) version, and
// distance certificates against the row/column proxies of RC_{p'}^n built
// on the doubled algebra M (+) M^op.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nclp/algebra.hpp"
#include "nclp/lewis.hpp"
#include "nclp/opspace.hpp"
#include "nclp/random.hpp"

namespace nclp {

/// Relative slack allowed between a measured norm and its proven bound.
inline constexpr double kBoundRelTol = 1e-6;

/// One measured norm of a map, per amplification level (a single level-1
/// entry for Banach-space norms).
struct MeasuredNorm {
  std::string name;
  std::string map;
  bool amplified = false;
  std::vector<std::pair<int, double>> levels;
  double bound = kInf;
  /// Whether a negative margin counts as a certificate failure; rate-only
  /// quantities with non-explicit constants are reported, not enforced.
  bool enforced = true;

  double measured() const {
    double v = 0.0;
    for (const auto& [k, x] : levels) v = std::max(v, x);
    return v;
  }
  double margin() const { return bound * (1.0 + kBoundRelTol) - measured(); }
  bool ok() const { return !enforced || margin() >= 0.0; }
};

/// A scalar residual with the threshold it must stay below.
struct Residual {
  std::string name;
  double value = 0.0;
  double threshold = kInf;
  bool ok() const { return value < threshold; }
};

struct Certificate {
  std::string kind;  ///< factorization | quotient | projection | rc_distance
  double p = 0.0;
  int n = 0;
  std::vector<int> block_dims;
  std::vector<double> trace_weights;
  std::uint64_t seed = 0;
  std::vector<MeasuredNorm> norms;
  std::vector<Residual> residuals;
  /// Derived scalars (rates, implied constants, certificate values).
  std::vector<std::pair<std::string, double>> values;

  bool margins_ok() const {
    return std::all_of(norms.begin(), norms.end(), [](const auto& m) { return m.ok(); });
  }
  bool residuals_ok() const {
    return std::all_of(residuals.begin(), residuals.end(), [](const auto& r) { return r.ok(); });
  }
  bool ok() const { return margins_ok() && residuals_ok(); }

  double value(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return v;
    throw std::out_of_range("certificate has no value '" + key + "'");
  }
  const MeasuredNorm& norm(const std::string& key) const {
    for (const auto& m : norms)
      if (m.name == key) return m;
    throw std::out_of_range("certificate has no norm '" + key + "'");
  }
};

struct MeasureOptions {
  int k_max = 4;
  /// Random starts per level for norm ascents.
  int trials = 16;
  /// Random coefficient families per level for direct inequality checks.
  int random_families = 200;
  int max_iter = 300;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_open_exponent(double p) {
  if (!(p > 1.0) || std::isinf(p)) throw DomainError("factorizations need 1 < p < inf");
}

inline Certificate make_certificate(std::string kind, const TracialAlgebra& alg, double p, int n,
                                    std::uint64_t seed) {
  Certificate c;
  c.kind = std::move(kind);
  c.p = p;
  c.n = n;
  c.block_dims = alg.block_dims();
  c.trace_weights = alg.trace_weights();
  c.seed = seed;
  return c;
}

inline CbOptions cb_options(const MeasureOptions& m, std::uint64_t salt) {
  CbOptions o;
  o.trials = m.trials;
  o.seed = m.seed ^ (salt * 0x9E3779B97F4A7C15ull);
  o.max_iter = m.max_iter;
  return o;
}

inline MeasuredNorm measure(std::string name, std::string map, const Matrix& t,
                            const CoordinateSpace& src, const CoordinateSpace& dst, int k_max,
                            double bound, bool enforced, const CbOptions& opt) {
  MeasuredNorm m{std::move(name), std::move(map), k_max > 1, {}, bound, enforced};
  for (const auto& e : cb_norm_levels(t, src, dst, k_max, opt)) m.levels.emplace_back(e.level, e.value);
  return m;
}

/// Max over random families at levels <= k of ||alpha (x) ys||_q / col_q(alpha)
/// (a level-k family lifts to level k + 1 with the same ratio).
inline MeasuredNorm random_family_ratio(std::string name, std::string map, const TracialAlgebra& alg,
                                        const std::vector<Op>& ys, double q, double bound,
                                        const MeasureOptions& opt, std::uint64_t salt) {
  MeasuredNorm m{std::move(name), std::move(map), true, {}, bound, true};
  const int n = int(ys.size());
  double worst = 0.0;
  for (int k = 1; k <= opt.k_max; ++k) {
    for (int t = 0; t < opt.random_families; ++t) {
      auto rng = make_rng(opt.seed, {salt, std::uint64_t(k), std::uint64_t(t)});
      const Family a = random_family(rng, n, k);
      const double c = column_norm(a, q);
      if (c > 0.0) worst = std::max(worst, schatten_norm(alg.amplified(k), amplify(alg, a, ys), q) / c);
    }
    m.levels.emplace_back(k, worst);
  }
  return m;
}

}  // namespace detail

/// Factorization of the identity of E through C_p^n in matrix-unit
/// coordinates of L_p(M): A is n x dim(M), B is dim(M) x n.
struct Factorization {
  LewisBasisResult lewis;
  Matrix a;
  Matrix b;
  Certificate certificate;
};

/// A(y)_i = tau(x_i^* y D) for the Lewis basis x_i with density D, and
/// B(c) = sum_i c_i x_i, so BA restricted to E is the identity.
inline std::pair<Matrix, Matrix> change_of_density_maps(const LewisBasisResult& lb) {
  const TracialAlgebra& alg = lb.algebra;
  const int n = lb.dim();
  const int N = alg.dimension();
  Matrix a(n, N), b(N, n);
  for (int i = 0; i < n; ++i) {
    const Op& x = lb.basis[i];
    b.col(i) = x.coordinates();
    // tau(x^* y D) = sum_b lambda_b sum_rs (D x^*)_{sr} y_rs.
    Eigen::Index at = 0;
    for (std::size_t blk = 0; blk < alg.num_blocks(); ++blk) {
      const Matrix dx = lb.density.block(blk) * x.block(blk).adjoint();
      const int m = alg.block_dim(blk);
      for (int r = 0; r < m; ++r)
        for (int s = 0; s < m; ++s) a(i, at++) = alg.weight(blk) * dx(s, r);
    }
  }
  return {a, b};
}

/// Factorization L_p(M) -> C_p^n -> E with BA|_E = I_E. For p >= 2 the
/// certificate checks ||A|| <= n^{1/2-1/p} and ||B||_cb <= 2^{1/2-1/p};
/// for p < 2, ||B|| <= n^{1/p-1/2} and ||A||_cb <= 2^{1/p-1/2}.
inline Factorization factorize_subspace(const Subspace& e, double p, const LewisOptions& lopt = {},
                                        const MeasureOptions& mopt = {}) {
  detail::check_open_exponent(p);
  const TracialAlgebra& alg = e.algebra();
  const int n = e.dim();
  Factorization f;
  f.lewis = lewis_basis(e, p, lopt);
  if (!f.lewis.converged) throw SolverError("factorize_subspace: Lewis iteration did not converge");
  std::tie(f.a, f.b) = change_of_density_maps(f.lewis);
  Certificate& cert = f.certificate = detail::make_certificate("factorization", alg, p, n, mopt.seed);

  cert.residuals.push_back({"BA_minus_identity_on_E", (f.a * f.b - Matrix::Identity(n, n)).norm(), 1e-9});
  cert.residuals.push_back({"lewis_gram_residual", f.lewis.gram_residual, lopt.tol});
  cert.residuals.push_back({"lewis_normalization_residual", f.lewis.normalization_residual, 1e-8});

  const double r = rate_exponent(p);
  const double n_bound = std::pow(double(n), r);
  const double two_bound = std::pow(2.0, r);
  cert.values.emplace_back("rate_n", n_bound);
  cert.values.emplace_back("rate_2", two_bound);
  const CoordinateSpace lp = algebra_space(alg, p);
  const CoordinateSpace ep = subspace_space(alg, f.lewis.basis, p);
  const CoordinateSpace cp = column_space(n, p);
  if (p >= 2.0) {
    cert.norms.push_back(detail::measure("A", "L_p(M) -> C_p^n", f.a, lp, cp, 1, n_bound, true,
                                         detail::cb_options(mopt, 1)));
    cert.norms.push_back(detail::measure("B", "C_p^n -> E", Matrix::Identity(n, n), cp, ep, mopt.k_max,
                                         two_bound, true, detail::cb_options(mopt, 2)));
    cert.norms.push_back(detail::random_family_ratio("B_random_families", "C_p^n -> E", alg,
                                                     f.lewis.basis, p, two_bound, mopt, 3));
  } else {
    cert.norms.push_back(detail::measure("A", "L_p(M) -> C_p^n", f.a, lp, cp, mopt.k_max, two_bound,
                                         true, detail::cb_options(mopt, 1)));
    cert.norms.push_back(detail::measure("B", "C_p^n -> E", Matrix::Identity(n, n), cp, ep, 1, n_bound,
                                         true, detail::cb_options(mopt, 2)));
    // Adjoint form of the amplified A-inequality: ||sum alpha_i (x) x_i D||_{p'}
    // <= 2^{1/p-1/2} column_{p'}(alpha).
    std::vector<Op> xd;
    for (const auto& x : f.lewis.basis) xd.push_back(x * f.lewis.density);
    cert.norms.push_back(detail::random_family_ratio("A_adjoint_random_families", "C_p'^n -> L_p'(M)",
                                                     alg, xd, conjugate_exponent(p), two_bound, mopt, 3));
  }
  return f;
}

struct Projection {
  Factorization factorization;
  Matrix p;  ///< dim(M) x dim(M), P = B A
  Certificate certificate;
};

/// P = BA, a projection of L_p(M) onto E, with measured ||P|| and
/// amplified levels against 2^{|1/2-1/p|} n^{|1/2-1/p|}.
inline Projection build_projection(const Subspace& e, double p, const LewisOptions& lopt = {},
                                   const MeasureOptions& mopt = {}) {
  MeasureOptions no_measure = mopt;
  no_measure.k_max = 1;
  no_measure.trials = 1;
  no_measure.random_families = 0;
  Projection pr;
  pr.factorization = factorize_subspace(e, p, lopt, no_measure);
  const Factorization& f = pr.factorization;
  pr.p = f.b * f.a;
  const TracialAlgebra& alg = e.algebra();
  const int n = e.dim();
  Certificate& cert = pr.certificate = detail::make_certificate("projection", alg, p, n, mopt.seed);

  const Matrix basis_coords = [&] {
    Matrix m(alg.dimension(), n);
    for (int i = 0; i < n; ++i) m.col(i) = e.basis()[i].coordinates();
    return m;
  }();
  const double scale = std::max(1.0, pr.p.norm());
  cert.residuals.push_back({"idempotency", (pr.p * pr.p - pr.p).norm() / scale, 1e-8});
  cert.residuals.push_back({"fixes_E", (pr.p * basis_coords - basis_coords).norm() /
                                           std::max(1.0, basis_coords.norm()), 1e-9});
  Eigen::JacobiSVD<Matrix> svd(pr.p);
  const RVector& sv = svd.singularValues();
  const int rank = int((sv.array() > 1e-9 * sv(0)).count());
  cert.residuals.push_back({"rank_minus_n", double(std::abs(rank - n)), 0.5});

  const double r = rate_exponent(p);
  const double bound = std::pow(2.0, r) * std::pow(double(n), r);
  cert.values.emplace_back("bound", bound);
  const CoordinateSpace lp = algebra_space(alg, p);
  cert.norms.push_back(detail::measure("P", "L_p(M) -> L_p(M)", pr.p, lp, lp, mopt.k_max, bound, true,
                                       detail::cb_options(mopt, 4)));
  return pr;
}

/// Quotient factorization for E = L_p(M) / (E*)^perp given E* in L_{p'}(M):
/// E --A--> C_p^n --B--> L_p(M) --Q--> E with QBA = I_E. Coordinates on E
/// are the pairings with the Lewis basis u_i of E*, so A = I_n,
/// B(c) = sum c_i u_i D_u and Q(y)_i = tau(u_i^* y).
struct QuotientFactorization {
  Factorization dual;  ///< factorization of E* inside L_{p'}(M)
  Matrix a;            ///< n x n
  Matrix b;            ///< dim(M) x n
  Matrix q;            ///< n x dim(M)
  Certificate certificate;
};

inline QuotientFactorization factorize_quotient(const Subspace& estar, double p,
                                                const LewisOptions& lopt = {},
                                                const MeasureOptions& mopt = {}) {
  detail::check_open_exponent(p);
  const double pc = conjugate_exponent(p);
  MeasureOptions no_measure = mopt;
  no_measure.k_max = 1;
  no_measure.trials = 1;
  no_measure.random_families = 0;
  QuotientFactorization qf;
  qf.dual = factorize_subspace(estar, pc, lopt, no_measure);
  const LewisBasisResult& lb = qf.dual.lewis;
  const TracialAlgebra& alg = estar.algebra();
  const int n = estar.dim();
  const int N = alg.dimension();

  qf.a = Matrix::Identity(n, n);
  // Adjoint under the trace pairing of C(z)_i = tau(u_i^* z D_u).
  qf.b.resize(N, n);
  for (int i = 0; i < n; ++i) qf.b.col(i) = (lb.basis[i] * lb.density).coordinates();
  qf.q.resize(n, N);
  for (int i = 0; i < n; ++i) {
    Eigen::Index at = 0;
    for (std::size_t blk = 0; blk < alg.num_blocks(); ++blk) {
      const Matrix& u = lb.basis[i].block(blk);
      for (Eigen::Index r = 0; r < u.rows(); ++r)
        for (Eigen::Index s = 0; s < u.cols(); ++s) qf.q(i, at++) = alg.weight(blk) * std::conj(u(r, s));
    }
  }
  Certificate& cert = qf.certificate = detail::make_certificate("quotient", alg, p, n, mopt.seed);
  cert.residuals.push_back({"QBA_minus_identity", (qf.q * qf.b * qf.a - Matrix::Identity(n, n)).norm(), 1e-9});
  cert.residuals.push_back({"lewis_gram_residual", lb.gram_residual, lopt.tol});

  const double r = rate_exponent(p);
  const double n_bound = std::pow(double(n), r);
  const double two_bound = std::pow(2.0, r);
  cert.values.emplace_back("rate_n", n_bound);
  cert.values.emplace_back("rate_2", two_bound);
  const CoordinateSpace lp = algebra_space(alg, p);
  const CoordinateSpace cp = column_space(n, p);
  const CoordinateSpace cpc = column_space(n, pc);
  // D : C_{p'}^n -> E*, delta_i -> u_i; ||A||_(cb) = ||D||_(cb) since A = D^*.
  const CoordinateSpace estar_space = subspace_space(alg, lb.basis, pc, "E*");
  const Matrix id = Matrix::Identity(n, n);
  if (p < 2.0) {
    cert.norms.push_back(detail::measure("B", "C_p^n -> L_p(M)", qf.b, cp, lp, 1, n_bound, true,
                                         detail::cb_options(mopt, 5)));
    cert.norms.push_back(detail::measure("A", "E -> C_p^n (via D: C_p'^n -> E*)", id, cpc, estar_space,
                                         mopt.k_max, two_bound, true, detail::cb_options(mopt, 6)));
  } else {
    cert.norms.push_back(detail::measure("B", "C_p^n -> L_p(M)", qf.b, cp, lp, mopt.k_max, two_bound,
                                         true, detail::cb_options(mopt, 5)));
    cert.norms.push_back(detail::measure("A", "E -> C_p^n (via D: C_p'^n -> E*)", id, cpc, estar_space, 1,
                                         n_bound, true, detail::cb_options(mopt, 6)));
  }
  return qf;
}

/// Distance certificate between E and the proxy of RC_{p'}^n: R_p^n + C_p^n
/// for p >= 2, R_p^n cap C_p^n for p < 2. The factorization runs on the
/// doubled subspace {(x, x^t)} of L_p(M (+) M^op); with x_i the first
/// components of its Lewis basis, the two legs are
///   A-leg: E cap_p E^op -> proxy, (x_i, x_i^t) -> delta_i
///   B-leg: proxy -> E,            delta_i -> x_i
/// The leg with an explicit constant (B for p >= 2, A for p < 2) is
/// checked against 2 * 2^{|1/2-1/p|}; the other leg and the product
/// d = ||A-leg|| ||B-leg|| are reported against the rate n^{|1/2-1/p|}.
inline Certificate rc_distance_certificate(const Subspace& e, double p, const LewisOptions& lopt = {},
                                           const MeasureOptions& mopt = {}) {
  detail::check_open_exponent(p);
  const Subspace doubled = e.doubled();
  const LewisBasisResult lb = lewis_basis(doubled, p, lopt);
  if (!lb.converged) throw SolverError("rc_distance_certificate: Lewis iteration did not converge");
  const TracialAlgebra& alg = e.algebra();
  const int n = e.dim();
  std::vector<Op> first;
  for (const auto& x : lb.basis) first.emplace_back(std::vector<Matrix>(x.blocks().begin(), x.blocks().begin() + alg.num_blocks()));

  Certificate cert = detail::make_certificate("rc_distance", alg, p, n, mopt.seed);
  cert.residuals.push_back({"lewis_gram_residual", lb.gram_residual, lopt.tol});

  const double r = rate_exponent(p);
  const double rate = std::pow(double(n), r);
  const double explicit_bound = 2.0 * std::pow(2.0, r);
  const Matrix id = Matrix::Identity(n, n);
  const CoordinateSpace e_space = subspace_space(alg, first, p, "E");
  const CoordinateSpace doubled_space = subspace_space(doubled.algebra(), lb.basis, p, "E cap_p E^op");

  double a_leg = 0.0, b_leg = 0.0;
  if (p >= 2.0) {
    // ||T : R + C -> F||_cb = max(||T|_R||_cb, ||T|_C||_cb).
    MeasuredNorm br = detail::measure("B_leg_row", "R_p^n -> E", id, row_space(n, p), e_space, mopt.k_max,
                                      explicit_bound, true, detail::cb_options(mopt, 7));
    MeasuredNorm bc = detail::measure("B_leg_column", "C_p^n -> E", id, column_space(n, p), e_space,
                                      mopt.k_max, explicit_bound, true, detail::cb_options(mopt, 8));
    MeasuredNorm b{"B_leg", "R_p^n + C_p^n -> E", true, {}, explicit_bound, true};
    for (std::size_t i = 0; i < br.levels.size(); ++i)
      b.levels.emplace_back(br.levels[i].first, std::max(br.levels[i].second, bc.levels[i].second));
    SumNormOptions so;
    so.solver_tol = 1e-6;
    so.restarts = 1;
    so.max_iter = 400;
    so.seed = mopt.seed;
    MeasuredNorm a = detail::measure("A_leg", "E cap_p E^op -> R_p^n + C_p^n", id, doubled_space,
                                     sum_space(n, p, so), mopt.k_max, rate, false,
                                     detail::cb_options(mopt, 9));
    b_leg = b.measured();
    a_leg = a.measured();
    cert.norms.push_back(std::move(br));
    cert.norms.push_back(std::move(bc));
    cert.norms.push_back(std::move(b));
    cert.norms.push_back(std::move(a));
  } else {
    MeasuredNorm a = detail::measure("A_leg", "E cap_p E^op -> R_p^n cap C_p^n", id, doubled_space,
                                     intersection_space(n, p), mopt.k_max, explicit_bound, true,
                                     detail::cb_options(mopt, 9));
    MeasuredNorm b = detail::measure("B_leg", "R_p^n cap C_p^n -> E", id, intersection_space(n, p), e_space,
                                     mopt.k_max, rate, false, detail::cb_options(mopt, 10));
    a_leg = a.measured();
    b_leg = b.measured();
    cert.norms.push_back(std::move(a));
    cert.norms.push_back(std::move(b));
  }
  const double value = a_leg * b_leg;
  cert.values.emplace_back("rate", rate);
  cert.values.emplace_back("explicit_leg_bound", explicit_bound);
  cert.values.emplace_back("a_leg", a_leg);
  cert.values.emplace_back("b_leg", b_leg);
  cert.values.emplace_back("certificate_value", value);
  cert.values.emplace_back("implied_constant", value / rate);
  return cert;
}

/// E = R_p^n = span{e_{1i}} inside S_p^n.
inline Subspace row_subspace(int n) {
  const TracialAlgebra alg = TracialAlgebra::matrices(n);
  std::vector<Op> xs;
  for (int i = 0; i < n; ++i) xs.push_back(Op::matrix_unit(alg, 0, 0, i));
  return Subspace(alg, std::move(xs));
}

/// E = C_p^n = span{e_{i1}} inside S_p^n.
inline Subspace column_subspace(int n) {
  const TracialAlgebra alg = TracialAlgebra::matrices(n);
  std::vector<Op> xs;
  for (int i = 0; i < n; ++i) xs.push_back(Op::matrix_unit(alg, 0, i, 0));
  return Subspace(alg, std::move(xs));
}

struct SharpnessRow {
  int n = 0;
  double upper_value = 0.0;    ///< rc_distance certificate value
  double upper_ratio = 0.0;    ///< upper_value / n^{1/2-1/p}
  double lower_witness = 0.0;  ///< ||id : R_p^n + C_p^n -> R_p^n||_cb estimate at level n
  double lower_ratio = 0.0;    ///< lower_witness / n^{1/2-1/p}
  Certificate certificate;
};

/// Certificate values for E = R_p^n, n in n_list (measured up to level
/// max(k_max, n)), together with the amplified lower witness of the identity from the R + C proxy onto
/// R_p^n at level k = n (seeded with alpha_i = e_{1i}).
inline std::vector<SharpnessRow> sharpness_probe(const std::vector<int>& n_list, double p,
                                                 const MeasureOptions& mopt = {},
                                                 const LewisOptions& lopt = {}) {
  if (!(p > 2.0) || std::isinf(p)) throw DomainError("sharpness_probe needs 2 < p < inf");
  std::vector<SharpnessRow> rows;
  for (int n : n_list) {
    if (n < 1) throw DomainError("sharpness_probe: n must be >= 1");
    SharpnessRow row;
    row.n = n;
    const Subspace e = row_subspace(n);
    // The column leg only reaches its extremal value at level n.
    MeasureOptions m = mopt;
    m.k_max = std::max(mopt.k_max, n);
    row.certificate = rc_distance_certificate(e, p, lopt, m);
    const double rate = std::pow(double(n), rate_exponent(p));
    row.upper_value = row.certificate.value("certificate_value");
    row.upper_ratio = row.upper_value / rate;

    Family witness;
    for (int i = 0; i < n; ++i) {
      Matrix m = Matrix::Zero(n, n);
      m(0, i) = 1.0;
      witness.push_back(m);
    }
    CbOptions o = detail::cb_options(mopt, 11);
    o.extra_starts = {witness};
    SumNormOptions so;
    so.seed = mopt.seed;
    const CbEstimate est = cb_norm_lower_estimate(Matrix::Identity(n, n), sum_space(n, p, so),
                                                  subspace_space(e.algebra(), e.basis(), p, "R_p^n"), n, o);
    row.lower_witness = est.value;
    row.lower_ratio = est.value / rate;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nclp
