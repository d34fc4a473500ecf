#include <gtest/gtest.h>

#include <cmath>

#include "nclp/factorization.hpp"
#include "nclp/random.hpp"
#include "oracles.hpp"

using namespace nclp;

namespace {

Subspace random_subspace(std::uint64_t seed, const TracialAlgebra& alg, int n) {
  auto rng = make_rng(seed, {});
  return Subspace(alg, random_basis(rng, alg, n));
}

Subspace corner_subspace(std::uint64_t seed, int m, int rank, int n) {
  const auto alg = TracialAlgebra::matrices(m);
  Matrix e = Matrix::Zero(m, m);
  for (int i = 0; i < rank; ++i) e(i, i) = 1.0;
  const Op q({e});
  auto rng = make_rng(seed, {});
  std::vector<Op> xs;
  for (int i = 0; i < n; ++i) xs.push_back(q * random_op(rng, alg) * q);
  return Subspace(alg, std::move(xs));
}

MeasureOptions quick(int k_max = 2) {
  MeasureOptions m;
  m.k_max = k_max;
  m.trials = 3;
  m.random_families = 20;
  m.max_iter = 150;
  return m;
}

// Trace weight of every matrix-unit coordinate.
oracle::Vec coordinate_weights(const TracialAlgebra& alg) {
  oracle::Vec w(alg.dimension());
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < alg.num_blocks(); ++b)
    for (int j = 0; j < alg.block_dims()[b] * alg.block_dims()[b]; ++j) w(at++) = alg.weight(b);
  return w;
}

}  // namespace

TEST(Factorization, HilbertCase) {
  const auto alg = TracialAlgebra({2, 2}, {1.0, 2.0});
  const Factorization f = factorize_subspace(random_subspace(81, alg, 2), 2.0, {}, quick());
  EXPECT_TRUE(f.certificate.ok());
  for (const auto& m : f.certificate.norms) {
    EXPECT_NEAR(m.bound, 1.0, 1e-15);
    EXPECT_LE(m.measured(), 1.0 + 1e-6) << m.name;
    if (m.name != "B_random_families") EXPECT_GT(m.measured(), 1.0 - 1e-6) << m.name;
  }
}

TEST(Factorization, LargeBlockPFour) {
  const auto alg = TracialAlgebra::matrices(4);
  const Factorization f = factorize_subspace(random_subspace(82, alg, 2), 4.0, {}, quick(4));
  const double b = std::pow(2.0, 0.25);
  EXPECT_LE(f.certificate.norm("A").measured(), b + 1e-8);
  EXPECT_LE(f.certificate.norm("B").measured(), b + 1e-8);
  EXPECT_EQ(f.certificate.norm("B").levels.size(), 4u);
  EXPECT_TRUE(f.certificate.ok());
}

TEST(Factorization, CornerSmallP) {
  const Factorization f = factorize_subspace(corner_subspace(83, 4, 2, 2), 1.5, {}, quick());
  EXPECT_LT((f.a * f.b - Matrix::Identity(2, 2)).norm(), 1e-8);
  EXPECT_TRUE(f.certificate.ok());
}

TEST(Factorization, DomainErrors) {
  const Subspace e = random_subspace(84, TracialAlgebra::matrices(2), 1);
  EXPECT_THROW(factorize_subspace(e, 1.0), DomainError);
  EXPECT_THROW(factorize_subspace(e, kInf), DomainError);
}

TEST(Factorization, AmplifiedBInequalityAgainstKronecker) {
  // ||sum alpha_i (x) x_i||_p <= 2^{1/2-1/p} ||(sum alpha_i^* alpha_i)^{1/2}||_p for p >= 2.
  const auto alg = TracialAlgebra({2, 1}, {1.0, 0.5});
  for (double p : {2.5, 4.0}) {
    const LewisBasisResult lb = lewis_basis(random_subspace(85, alg, 2), p);
    ASSERT_TRUE(lb.converged);
    const double c = std::pow(2.0, 0.5 - 1.0 / p);
    for (int k = 1; k <= 3; ++k)
      for (int t = 0; t < 20; ++t) {
        auto rng = make_rng(85, {std::uint64_t(k), std::uint64_t(t)});
        const std::vector<Matrix> alpha = random_family(rng, 2, k);
        std::vector<oracle::Mat> blocks;
        for (std::size_t b = 0; b < alg.num_blocks(); ++b)
          blocks.push_back(oracle::kron(alpha[0], lb.basis[0].block(b)) + oracle::kron(alpha[1], lb.basis[1].block(b)));
        oracle::Mat stacked(2 * k, k);
        stacked << alpha[0], alpha[1];
        const double lhs = oracle::schatten(blocks, alg.trace_weights(), p);
        const double rhs = c * oracle::schatten(stacked, p);
        EXPECT_LE(lhs, rhs * (1.0 + 1e-6)) << "p=" << p << " k=" << k;
      }
  }
}

TEST(FactorizationProperty, IdentityOnEAndBanachBound) {
  for (int t = 0; t < 6; ++t) {
    const auto alg = t % 2 ? TracialAlgebra::matrices(3) : TracialAlgebra({2, 1, 1}, {1.0, 2.0, 0.5});
    const double p = t < 3 ? 3.0 : 1.5;
    const int n = 1 + t % 3;
    MeasureOptions m = quick(1);
    m.random_families = 0;
    const Factorization f = factorize_subspace(random_subspace(86 + t, alg, n), p, {}, m);
    EXPECT_LT((f.a * f.b - Matrix::Identity(n, n)).norm(), 1e-9);
    const double nb = std::pow(double(n), rate_exponent(p));
    const MeasuredNorm& banach = f.certificate.norm(p >= 2.0 ? "A" : "B");
    EXPECT_LE(banach.measured(), nb * (1.0 + 1e-6)) << t;
  }
}

TEST(FactorizationProperty, LevelsNonDecreasing) {
  const Factorization f = factorize_subspace(random_subspace(87, TracialAlgebra::matrices(2), 2), 3.0, {}, quick(3));
  for (const auto& m : f.certificate.norms)
    for (std::size_t i = 1; i < m.levels.size(); ++i)
      EXPECT_GE(m.levels[i].second, m.levels[i - 1].second - 1e-12) << m.name;
}

TEST(Projection, HilbertCaseIsOrthogonalProjection) {
  const auto alg = TracialAlgebra({2, 1}, {1.0, 3.0});
  const Subspace e = random_subspace(88, alg, 2);
  const Projection pr = build_projection(e, 2.0, {}, quick(1));
  oracle::Mat v(alg.dimension(), 2);
  for (int i = 0; i < 2; ++i) v.col(i) = e.basis()[i].coordinates();
  const oracle::Mat w = coordinate_weights(alg).cast<oracle::cplx>().asDiagonal();
  const oracle::Mat expect = v * (v.adjoint() * w * v).inverse() * v.adjoint() * w;
  EXPECT_LT((pr.p - expect).norm(), 1e-10);
  EXPECT_NEAR(pr.certificate.norm("P").measured(), 1.0, 1e-6);
}

TEST(Projection, OneDimensional) {
  for (double p : {1.5, 3.0}) {
    const Projection pr = build_projection(random_subspace(89, TracialAlgebra::matrices(2), 1), p, {}, quick(1));
    EXPECT_LE(pr.certificate.norm("P").measured(), std::pow(2.0, rate_exponent(p)) + 1e-8);
    EXPECT_TRUE(pr.certificate.ok());
  }
}

TEST(Projection, IdempotentWithRangeE) {
  const auto alg = TracialAlgebra({2, 2}, {1.0, 1.0});
  const Subspace e = random_subspace(90, alg, 3);
  const Projection pr = build_projection(e, 3.0, {}, quick(2));
  EXPECT_LT((pr.p * pr.p - pr.p).norm(), 1e-8);
  for (const auto& x : e.basis()) EXPECT_LT((pr.p * x.coordinates() - x.coordinates()).norm(), 1e-9);
  EXPECT_TRUE(pr.certificate.ok());
}

TEST(Quotient, HilbertCase) {
  const QuotientFactorization qf = factorize_quotient(random_subspace(91, TracialAlgebra::matrices(2), 2), 2.0, {}, quick());
  for (const auto& m : qf.certificate.norms) {
    EXPECT_NEAR(m.bound, 1.0, 1e-15);
    EXPECT_LE(m.measured(), 1.0 + 1e-6);
  }
}

TEST(Quotient, SmallPBound) {
  const QuotientFactorization qf = factorize_quotient(random_subspace(92, TracialAlgebra::matrices(3), 2), 1.5, {}, quick());
  EXPECT_LE(qf.certificate.norm("B").measured(), std::pow(2.0, 1.0 / 6.0) + 1e-8);
  EXPECT_LT((qf.q * qf.b * qf.a - Matrix::Identity(2, 2)).norm(), 1e-9);
  EXPECT_TRUE(qf.certificate.ok());
}

TEST(Quotient, AdjointConsistency) {
  // <Q y, c> = tau((sum c_i u_i)^* y) for the Lewis basis u of E*.
  const auto alg = TracialAlgebra({2, 1}, {0.5, 2.0});
  const QuotientFactorization qf = factorize_quotient(random_subspace(93, alg, 2), 3.0, {}, quick(1));
  const auto& u = qf.dual.lewis.basis;
  for (int t = 0; t < 10; ++t) {
    auto rng = make_rng(93, {std::uint64_t(t)});
    const Op y = random_op(rng, alg);
    const CVector c = random_gaussian(rng, 2, 1).col(0);
    const Op s = c(0) * u[0] + c(1) * u[1];
    const cplx lhs = c.dot(qf.q * y.coordinates());
    EXPECT_LT(std::abs(lhs - trace(alg, s.adjoint() * y)), 1e-10);
    for (int i = 0; i < 2; ++i)
      EXPECT_LT((qf.b.col(i) - (u[i] * qf.dual.lewis.density).coordinates()).norm(), 1e-10);
  }
}

TEST(RcDistance, OneDimensional) {
  for (double p : {1.5, 3.0}) {
    const Certificate c = rc_distance_certificate(random_subspace(94, TracialAlgebra::matrices(2), 1), p, {}, quick());
    const double a_leg = c.value("a_leg");
    EXPECT_LE(a_leg, 1.0 + 1e-5) << p;
    EXPECT_LE(c.value("certificate_value"), c.value("explicit_leg_bound") * a_leg * (1.0 + 1e-6));
    EXPECT_TRUE(c.ok());
  }
}

TEST(RcDistance, ColumnSpacePFour) {
  const Certificate c = rc_distance_certificate(column_subspace(3), 4.0, {}, quick(3));
  EXPECT_LE(c.norm("B_leg").measured(), 2.0 * std::pow(2.0, 0.25) + 1e-8);
  EXPECT_TRUE(c.ok());
}

TEST(RcDistance, HilbertCase) {
  const Certificate c = rc_distance_certificate(random_subspace(95, TracialAlgebra::matrices(2), 2), 2.0, {}, quick());
  EXPECT_GE(c.value("certificate_value"), 0.5);
  EXPECT_LE(c.value("certificate_value"), 2.0);
}

TEST(Sharpness, SmallTable) {
  const auto rows = sharpness_probe({1, 2, 3}, 4.0, quick());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GE(rows[0].upper_ratio, 0.5);
  EXPECT_LE(rows[0].upper_ratio, 2.0);
  EXPECT_GE(rows[0].lower_ratio, 0.5);
  EXPECT_LE(rows[0].lower_ratio, 2.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i].upper_value, rows[i - 1].upper_value - 1e-9);
    EXPECT_GE(rows[i].lower_ratio, 0.3);
    EXPECT_LE(rows[i].lower_ratio, 3.0);
  }
  EXPECT_THROW(sharpness_probe({2}, 2.0), DomainError);
}
