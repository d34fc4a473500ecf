#include <gtest/gtest.h>

#include <cmath>

#include "nclp/lewis.hpp"
#include "nclp/random.hpp"
#include "oracles.hpp"

using namespace nclp;

namespace {

Subspace random_subspace(std::uint64_t seed, const TracialAlgebra& alg, int n) {
  auto rng = make_rng(seed, {});
  return Subspace(alg, random_basis(rng, alg, n));
}

double density_distance(const LewisBasisResult& a, const LewisBasisResult& b) {
  return operator_norm(a.algebra, a.density_power() - b.density_power());
}

// Diagonal operators with x_i(t) = u(t, i) over 1x1 blocks.
Subspace commutative_subspace(const oracle::Mat& u, const std::vector<double>& mu) {
  const TracialAlgebra alg = TracialAlgebra::diagonal(mu);
  std::vector<Op> xs;
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    std::vector<Matrix> b;
    for (Eigen::Index t = 0; t < u.rows(); ++t) b.push_back(Matrix::Constant(1, 1, u(t, i)));
    xs.emplace_back(std::move(b));
  }
  return Subspace(alg, std::move(xs));
}

}  // namespace

TEST(Lewis, OneDimensionalIsNormalizedGenerator) {
  const auto alg = TracialAlgebra({2, 3}, {1.0, 0.5});
  auto rng = make_rng(61, {});
  const Op a = random_op(rng, alg);
  for (double p : {1.0, 1.5, 3.0}) {
    const LewisBasisResult r = lewis_basis(Subspace(alg, {a}), p);
    ASSERT_TRUE(r.converged);
    const Op expect = (1.0 / schatten_norm(alg, a, p)) * a;
    EXPECT_LT(operator_norm(alg, r.basis[0] - expect), 1e-12) << p;
    EXPECT_LT(r.gram_residual, 1e-12);
    EXPECT_LT(r.normalization_residual, 1e-12);
  }
}

TEST(Lewis, PTwoGivesTraceOrthonormalBasis) {
  const auto alg = TracialAlgebra({3, 2}, {2.0, 1.0});
  const LewisBasisResult r = lewis_basis(random_subspace(62, alg, 3), 2.0);
  ASSERT_TRUE(r.converged);
  const Matrix g = trace_gram(alg, r.basis, r.basis);
  EXPECT_LT((g - Matrix::Identity(3, 3)).norm(), 1e-10);
}

TEST(Lewis, CommutativeMatchesScalarLewisWeights) {
  for (double p : {1.5, 3.0, 4.0}) {
    auto rng = make_rng(63, {std::uint64_t(p * 2)});
    const oracle::Mat u = random_gaussian(rng, 5, 2);
    const std::vector<double> mu{1.0, 0.5, 2.0, 1.5, 0.25};
    const oracle::Vec v = oracle::scalar_lewis_squares(u, Eigen::Map<const oracle::Vec>(mu.data(), 5), p);
    const LewisBasisResult r = lewis_basis(commutative_subspace(u, mu), p);
    ASSERT_TRUE(r.converged);
    for (int t = 0; t < 5; ++t) {
      const double dt = r.density.blocks()[t](0, 0).real();
      EXPECT_NEAR(dt, std::pow(v(t), (p - 2.0) / 2.0), 1e-6) << "p=" << p << " t=" << t;
    }
  }
}

TEST(Lewis, CommutativeZeroRowsStayOutsideSupport) {
  oracle::Mat u(4, 2);
  u << 1.0, 0.5, 0.0, 0.0, -0.3, 2.0, 0.7, 0.1;
  const std::vector<double> mu{1.0, 1.0, 1.0, 1.0};
  const double p = 1.5;
  const oracle::Vec v = oracle::scalar_lewis_squares(u, Eigen::Map<const oracle::Vec>(mu.data(), 4), p);
  const LewisBasisResult r = lewis_basis(commutative_subspace(u, mu), p);
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.density.blocks()[1](0, 0), 0.0);
  for (int t : {0, 2, 3}) EXPECT_NEAR(r.density.blocks()[t](0, 0).real(), std::pow(v(t), (p - 2.0) / 2.0), 1e-6);
}

TEST(Lewis, DetmaxOneDimensional) {
  const auto alg = TracialAlgebra::matrices(2);
  const Subspace e = random_subspace(64, alg, 1);
  const LewisBasisResult a = lewis_basis(e, 3.0), b = detmax_oracle(e, 3.0);
  EXPECT_LT(density_distance(a, b), 1e-8);
}

TEST(Lewis, DetmaxPTwo) {
  const auto alg = TracialAlgebra::matrices(2);
  const LewisBasisResult r = detmax_oracle(random_subspace(65, alg, 2), 2.0);
  EXPECT_LT(r.gram_residual, 1e-6);
}

TEST(Lewis, DetmaxAgreesWithFixedPoint) {
  const auto alg = TracialAlgebra::matrices(2);
  for (double p : {1.5, 3.0}) {
    const Subspace e = random_subspace(66 + std::uint64_t(p), alg, 2);
    const LewisBasisResult a = lewis_basis(e, p), b = detmax_oracle(e, p);
    EXPECT_LT(density_distance(a, b), 1e-5) << p;
    EXPECT_LT(verify_conditions(b, p).gram_residual, 1e-6);
  }
}

TEST(Lewis, DetmaxRefusesLargeInstances) {
  const auto alg = TracialAlgebra::matrices(9);
  EXPECT_THROW(detmax_oracle(random_subspace(67, alg, 2), 3.0), DomainError);
}

TEST(Lewis, VerifyConditionsOnConvergedOutput) {
  const auto alg = TracialAlgebra({2, 2}, {1.0, 3.0});
  for (double p : {1.25, 2.0, 3.0, 4.0}) {
    LewisOptions opt;
    const LewisBasisResult r = lewis_basis(random_subspace(68, alg, 3), p, opt);
    ASSERT_TRUE(r.converged) << p;
    const LewisResidualReport rep = verify_conditions(r, p);
    EXPECT_LT(rep.gram_residual, opt.tol) << p;
    EXPECT_LT(rep.gram_hermitian_residual, opt.tol);
    EXPECT_LT(rep.normalization_residual, 1e-8);
    EXPECT_LT(rep.square_function_residual, 1e-10);
    EXPECT_LT(rep.support_residual, 1e-9);
  }
}

TEST(Lewis, VerifyConditionsDetectsPerturbation) {
  const auto alg = TracialAlgebra::matrices(3);
  LewisBasisResult r = lewis_basis(random_subspace(69, alg, 2), 3.0);
  auto rng = make_rng(69, {1});
  for (auto& x : r.basis) x = x + 1e-3 * random_op(rng, alg);
  EXPECT_GT(verify_conditions(r, 3.0).gram_residual, 1e-4);
}

TEST(Lewis, CornerSupportForSmallP) {
  const auto alg = TracialAlgebra::matrices(4);
  Matrix corner = Matrix::Zero(4, 4);
  corner(0, 0) = corner(1, 1) = 1.0;
  const Op q({corner});
  auto rng = make_rng(70, {});
  std::vector<Op> xs;
  for (int i = 0; i < 2; ++i) xs.push_back(q * random_op(rng, alg) * q);
  for (double p : {1.0, 1.25, 1.5}) {
    const LewisBasisResult r = lewis_basis(Subspace(alg, xs), p);
    ASSERT_TRUE(r.converged) << p;
    const LewisResidualReport rep = verify_conditions(r, p);
    EXPECT_LT(rep.support_residual, 1e-9);
    EXPECT_LT(rep.gram_residual, 1e-8);
    EXPECT_EQ(numerical_rank(alg, r.square_function), 2);
  }
}

TEST(Lewis, NonConvergenceReportsBestIterate) {
  LewisOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-15;
  const LewisBasisResult r = lewis_basis(random_subspace(71, TracialAlgebra::matrices(3), 2), 3.0, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.dim(), 2);
}

TEST(Lewis, DomainErrors) {
  const Subspace e = random_subspace(72, TracialAlgebra::matrices(2), 1);
  EXPECT_THROW(lewis_basis(e, 0.5), DomainError);
  EXPECT_THROW(lewis_basis(e, kInf), DomainError);
  LewisOptions opt;
  opt.damping = 1.5;
  EXPECT_THROW(lewis_basis(e, 3.0, opt), DomainError);
}

// Invariants: the density X^p depends on E alone.

TEST(LewisProperty, RepresentationIndependence) {
  const auto alg = TracialAlgebra({2, 1}, {1.0, 2.0});
  for (double p : {1.5, 3.0, 4.0})
    for (int t = 0; t < 5; ++t) {
      const Subspace e = random_subspace(73 + t, alg, 2);
      auto rng = make_rng(73, {std::uint64_t(t)});
      const Matrix c = random_gaussian(rng, 2, 2) + 2.0 * Matrix::Identity(2, 2);
      const Subspace f(alg, e.transformed_basis(c));
      EXPECT_LT(density_distance(lewis_basis(e, p), lewis_basis(f, p)), 1e-7) << p;
    }
}

TEST(LewisProperty, ScaleInvariance) {
  const auto alg = TracialAlgebra::matrices(3);
  const Subspace e = random_subspace(74, alg, 2);
  std::vector<Op> scaled;
  for (const auto& x : e.basis()) scaled.push_back(7.5 * x);
  for (double p : {1.25, 3.0})
    EXPECT_LT(density_distance(lewis_basis(e, p), lewis_basis(Subspace(alg, scaled), p)), 1e-8);
}

TEST(LewisProperty, UnitaryCovariance) {
  // x -> u x v gives X -> v^* X v.
  const auto alg = TracialAlgebra({2, 2}, {1.0, 0.5});
  for (double p : {1.5, 3.0}) {
    auto rng = make_rng(75, {std::uint64_t(p * 2)});
    const Subspace e = random_subspace(75, alg, 2);
    const Op u = random_unitary_op(rng, alg), v = random_unitary_op(rng, alg);
    std::vector<Op> moved;
    for (const auto& x : e.basis()) moved.push_back(u * x * v);
    const LewisBasisResult a = lewis_basis(e, p), b = lewis_basis(Subspace(alg, moved), p);
    EXPECT_LT(operator_norm(alg, v.adjoint() * a.density_power() * v - b.density_power()), 1e-7);
  }
}

TEST(LewisProperty, DensityIsPositive) {
  for (int t = 0; t < 10; ++t) {
    const auto alg = t % 2 ? TracialAlgebra::matrices(3) : TracialAlgebra({1, 2}, {3.0, 1.0});
    const double p = 1.25 + 0.4 * t;
    const LewisBasisResult r = lewis_basis(random_subspace(76 + t, alg, 1 + t % 3), p);
    const HermitianSpectrum s = eigh(alg, r.density);
    for (const auto& vals : s.values) EXPECT_GE(vals.minCoeff(), -1e-12);
    EXPECT_NEAR(trace(alg, r.density_power()).real(), r.dim(), 1e-8);
  }
}
