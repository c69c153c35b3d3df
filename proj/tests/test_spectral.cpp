#include <gtest/gtest.h>

#include <random>

#include "clbm/spectral.hpp"

using namespace clbm;

TEST(Spectral, DiagonalMatrixHasUnitCondition) {
  Eigen::MatrixXd M = Eigen::VectorXd::LinSpaced(4, -3.0, 0.0).asDiagonal();
  const SpectralReport rep = spectral_report(M);
  EXPECT_NEAR(rep.kappa_J, 1.0, 1e-12);
  EXPECT_NEAR(rep.spectral_abscissa, 0.0, 1e-14);
  EXPECT_NEAR(rep.log_norm, 0.0, 1e-14);
  EXPECT_TRUE(rep.stable);
  EXPECT_NEAR(rep.norm2_bound, 3.0, 1e-14);
}

TEST(Spectral, TwoByTwoConditionNumberMatchesClosedForm) {
  // eigenvectors (1,0) and (1,-1)/sqrt2 (unit columns); kappa = cot(pi/8)
  Eigen::MatrixXd M(2, 2);
  M << -1.0, 1.0, 0.0, -2.0;
  const EigenDecomposition dec = eigendecompose(M);
  EXPECT_NEAR(condition_number(dec), 1.0 / std::tan(std::acos(-1.0) / 8.0), 1e-10);
  EXPECT_LE(dec.residual, 1e-14);
}

TEST(Spectral, DefectiveMatrixIsNumericalError) {
  Eigen::MatrixXd M(2, 2);
  M << -1.0, 1.0, 0.0, -1.0;
  EXPECT_THROW(eigendecompose(M), NumericalError);
}

TEST(Spectral, DimensionCapIsResourceError) {
  EigenOptions opt;
  opt.max_dim = 3;
  EXPECT_THROW(eigendecompose(Eigen::MatrixXd::Identity(4, 4), opt), ResourceError);
}

TEST(Spectral, NormBoundDominatesSpectralNorm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd M(6, 6);
    for (int i = 0; i < 36; ++i) M.data()[i] = nd(rng);
    EXPECT_LE(spectral_norm(M), norm2_bound(M) * (1 + 1e-12));
    const SparseMatrix S = M.sparseView();
    EXPECT_NEAR(norm2_bound(S), norm2_bound(M), 1e-12);
    EXPECT_NEAR(largest_singular_value(S), spectral_norm(M), 1e-9);
  }
}

// exp(alpha t) <= ||exp(M t)|| <= exp(mu t) for random stable matrices.
TEST(Spectral, ExponentialChainInequality) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd M(5, 5);
    for (int i = 0; i < 25; ++i) M.data()[i] = nd(rng);
    M -= (spectral_abscissa(M) + 0.1) * Eigen::MatrixXd::Identity(5, 5);
    ASSERT_LT(spectral_abscissa(M), 0.0);
    for (double s : {0.1, 1.0, 3.0}) {
      const double e = expm_norm(M, s);
      EXPECT_LE(std::exp(spectral_abscissa(M) * s), e * (1 + 1e-10));
      EXPECT_LE(e, std::exp(log_norm(M) * s) * (1 + 1e-10));
    }
  }
}

TEST(Spectral, HistogramCountsEveryValueOnce) {
  std::vector<cd> v{{-0.01, 0.0}, {-1.0, 0.0}, {-1.0, 0.0}, {-2.99, 0.0}, {5.0, 0.0}};
  const auto h = eigenvalue_histogram(v, 1.0, -3.5, 0.5, 4);
  std::int64_t total = 0;
  for (const auto& b : h) total += b.count;
  EXPECT_EQ(total, 4);
  EXPECT_EQ(h[2].count, 2);
  EXPECT_THROW(eigenvalue_histogram(v, 1.0, 1.0, 0.0, 4), UsageError);
}

TEST(Spectral, SinglePointSpectrumIsDiscrete) {
  const double kt = 0.2;
  const auto ops = build_collision_operators(make_lattice("D1Q3"), {kt, 1.0});
  const auto sys = build_single_point(ops, 3);
  const Eigen::VectorXcd ev = eigenvalues(sys.dense());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double x = -ev(i).real() * kt;
    EXPECT_NEAR(x, std::round(x), 1e-10);
    EXPECT_LE(std::abs(ev(i).imag()), 1e-11);
  }
}

TEST(Spectral, StructuredKappaAgreesWithDenseForDiagonalizableCase) {
  const auto ops = build_collision_operators(make_lattice("D1Q3"), {1.0, 1.0});
  const StructuredKappa sk = structured_kappa(ops);
  const auto dec = eigendecompose(build_single_point(ops, 3).dense());
  // both normalize eigenvector columns; dense uses orthonormal eigenspace bases
  EXPECT_TRUE(sk.converged);
  EXPECT_LE(sk.defect, 1e-10);
  EXPECT_GE(sk.kappa, 1.0);
  EXPECT_NEAR(sk.kappa / condition_number(dec), 1.0, 0.1);
}

TEST(Spectral, StabilityOfStreamingOperator) {
  const Lattice lat = make_lattice("D1Q3");
  for (double tau : {0.6, 1.0}) {
    const auto ops = build_collision_operators(lat, {0.1, tau});
    const auto sys = build_npoint(ops, build_streaming(lat, 8), 2, 8);
    const StabilityVerdict v = stability_check(sys);
    EXPECT_TRUE(v.stable);
    EXPECT_LE(v.abscissa_linear, 1e-10);
  }
}

TEST(QuadraticReduction, ReproducesCubicDynamics) {
  const Lattice lat = make_lattice("D1Q3");
  const auto ops = build_collision_operators(lat, {0.5, 0.8});
  const QuadraticReduction red = reduce_quadratic(ops);
  Eigen::VectorXd f(3);
  f << 0.62, 0.21, 0.15;
  const Eigen::VectorXd g = quadratic_rhs(red, f);
  const Eigen::VectorXd fdot = poly_collision_rhs(ops, f);
  EXPECT_LE((g.head(3) - fdot).norm(), 1e-13);
  const Eigen::VectorXd f2dot = kron(fdot, f) + kron(f, fdot);
  EXPECT_LE((g.tail(9) - f2dot).norm(), 1e-13);
  EXPECT_EQ(red.F2_hat.rows(), 12);
  EXPECT_EQ(red.F2_hat.cols(), 144);
}

TEST(QuadraticReduction, BoundHoldsAndGrowsWithTime) {
  const auto ops = build_collision_operators(make_lattice("D1Q3"), {1.0, 1.0});
  const QuadraticReduction red = reduce_quadratic(ops);
  const Eigen::MatrixXd C = build_single_point(ops, 3).dense();
  double prev = 0.0;
  for (double t : {0.1, 1.0}) {
    const ExpmBound b = expm_norm_bound(red, 3, t, C, 10);
    EXPECT_GE(b.bound, b.measured);
    EXPECT_GT(b.bound, prev);
    prev = b.bound;
  }
  EXPECT_THROW(expm_norm_bound(red, 3, -1.0), UsageError);
}

TEST(Fits, LogLogSlope) {
  EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
  EXPECT_THROW(loglog_slope({1}, {1}), UsageError);
  EXPECT_THROW(loglog_slope({1, 2}, {0, 1}), DomainError);
}
