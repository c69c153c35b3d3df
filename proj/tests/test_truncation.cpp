#include <gtest/gtest.h>

#include <random>

#include "clbm/truncation.hpp"

using namespace clbm;

namespace {

// (phi_1 (x) ... (x) phi_m) A^m_{m+j-1}(Fj) f^[m+j-1], by explicit assembly.
double contract(const Eigen::MatrixXd& Fj, int m, const std::vector<Eigen::RowVectorXd>& phis,
                const Eigen::VectorXd& f) {
  const auto Q = static_cast<std::int64_t>(f.size());
  const SparseMatrix A = transfer_matrix(Fj, m, Q);
  int deg = 0;
  for (std::int64_t p = 1; p < A.cols(); p *= Q) ++deg;
  const Eigen::VectorXd y = A * kron_power(f, deg);
  Eigen::VectorXd row = phis[0].transpose();
  for (std::size_t i = 1; i < phis.size(); ++i) row = kron(row, Eigen::VectorXd(phis[i].transpose()));
  return row.dot(y);
}

}  // namespace

TEST(Truncation, EquilibriumStartIsReproduced) {
  const Lattice lat = make_lattice("D1Q3");
  TruncationConfig cfg;
  cfg.k_values = {3, 4, 5};
  const auto rep = run_single_point_experiment(lat, {1.0, 1.0}, cfg);
  ASSERT_EQ(rep.runs.size(), 3u);
  for (const auto& r : rep.runs) {
    EXPECT_LE(r.max_rel_error, 1e-12) << "k=" << r.k;
    EXPECT_EQ(r.epsilon.rows(), 101);
  }
  EXPECT_EQ(rep.summary()["runs"].size(), 3u);
}

TEST(Truncation, SecondOrderTruncationIsVisible) {
  TruncationConfig cfg;
  cfg.k_values = {2};
  const auto rep = run_single_point_experiment(make_lattice("D1Q3"), {1.0, 1.0}, cfg);
  EXPECT_GT(rep.runs[0].max_rel_error, 1e-3);
}

TEST(Truncation, Validation) {
  const Lattice lat = make_lattice("D1Q3");
  TruncationConfig cfg;
  cfg.k_values = {7};
  EXPECT_THROW(run_single_point_experiment(lat, {1.0, 1.0}, cfg), ConfigError);
  cfg.k_values = {3};
  cfg.u0 = 0.5;
  EXPECT_THROW(run_single_point_experiment(lat, {1.0, 1.0}, cfg), DomainError);
}

TEST(Moments, ZetaChannelsCancel) {
  for (const char* name : {"D1Q3", "D2Q9", "D3Q27"}) {
    const Lattice lat = make_lattice(name);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(lat.D, 0.07);
    const ZetaCoefficients z = zeta_coefficients(lat, {0.3, 1.0}, u);
    EXPECT_NE(z.zeta2_c, 0.0);
    EXPECT_NEAR(z.zeta2(), 0.0, 1e-15);
    EXPECT_NEAR(z.zeta3(), 0.0, 1e-15);
    EXPECT_NEAR(z.zeta2_c, -2.0 * z.zeta3_c, 1e-15);
  }
}

TEST(Moments, ZetaMatchesContractionOfEquilibrium) {
  const Lattice lat = make_lattice("D2Q9");
  const RelaxParams rp{0.5, 1.0};
  Eigen::VectorXd u(2);
  u << 0.05, -0.02;
  const double rho = 1.1;
  const Eigen::VectorXd f = equilibrium(lat, rho, u);
  const auto ops = build_collision_operators(lat, rp);
  const double z2 = (Eigen::RowVectorXd::Ones(9) * ops.F2 * kron_power(f, 2))(0);
  const double z3 = (Eigen::RowVectorXd::Ones(9) * ops.F3 * kron_power(f, 3))(0);
  EXPECT_NEAR(z2, 0.0, 1e-14);
  EXPECT_NEAR(z3, 0.0, 1e-14);
}

// A lattice with c = 0 keeps only the d channel, so brute-force contraction
// must equal that channel of the closed form.
TEST(Moments, CorrectionMatchesBruteForceContraction) {
  Lattice lat = make_lattice("D1Q3");
  const RelaxParams rp{0.4, 1.0};
  const double rho = 1.05;
  const double u = 0.06;
  for (bool d_only : {false, true}) {
    Lattice l = lat;
    if (d_only) l.c = 0.0;
    const auto ops = build_collision_operators(l, rp);
    // moments of f are (rho, rho u) whatever channels the operators keep
    const Eigen::VectorXd f = equilibrium(lat, rho, u);
    const Eigen::RowVectorXd phi = Eigen::RowVectorXd::Ones(3);
    for (int k : {3, 4, 5}) {
      const MomentCorrection mc = moment_correction(l, rp, rho, u, k);
      const std::vector<Eigen::RowVectorXd> pk1(static_cast<std::size_t>(k - 1), phi);
      const std::vector<Eigen::RowVectorXd> pk(static_cast<std::size_t>(k), phi);
      const double bf_km1 = contract(ops.F3, k - 1, pk1, f);
      const double bf_k = contract(ops.F2, k, pk, f);
      EXPECT_NEAR(bf_km1, mc.rho_km1(), 1e-12) << "k=" << k << " d_only=" << d_only;
      EXPECT_NEAR(bf_k, mc.rho_k(), 1e-12) << "k=" << k << " d_only=" << d_only;
      if (d_only) {
        EXPECT_NE(mc.rho_k(), 0.0);
      }
    }
  }
}

TEST(Moments, MixedCorrectionVanishes) {
  const Lattice lat = make_lattice("D1Q3");
  const auto ops = build_collision_operators(lat, {0.4, 1.0});
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ud(0.1, 0.7);
  Eigen::VectorXd f(3);
  for (int m = 0; m < 3; ++m) f(m) = ud(rng);
  const Eigen::RowVectorXd phi_rho = Eigen::RowVectorXd::Ones(3);
  const Eigen::RowVectorXd phi_u = lat.e.row(0);
  for (int k : {3, 4, 5}) {
    std::vector<Eigen::RowVectorXd> phis(static_cast<std::size_t>(k - 1), phi_rho);
    phis[0] = phi_u;
    EXPECT_NEAR(contract(ops.F3, k - 1, phis, f), 0.0, 1e-13);
    EXPECT_EQ(moment_correction(lat, {0.4, 1.0}, 1.0, 0.1, k).mixed, 0.0);
  }
}

TEST(Symmetry, CancellationOnAllLattices) {
  for (const char* name : {"D1Q3", "D2Q9", "D3Q27"}) {
    const Lattice lat = make_lattice(name);
    const auto ops = build_collision_operators(lat, {1.0, 1.0});
    EXPECT_LE(symmetry_cancellation(lat, ops, 20), 1e-13) << name;
  }
}

TEST(Symmetry, BrokenWeightsAreDetected) {
  Lattice lat = make_lattice("D1Q3");
  lat.w << 0.5, 0.3, 0.2;
  const auto ops = build_collision_operators(lat, {1.0, 1.0});
  EXPECT_GT(symmetry_cancellation(lat, ops, 20), 1e-6);
}

TEST(Dissipation, MaxOverFinal) {
  EXPECT_DOUBLE_EQ(dissipation_g(std::vector<double>{1.0, 2.0, 0.5}), 4.0);
  EXPECT_DOUBLE_EQ(dissipation_g(std::vector<double>{3.0, 3.0}), 1.0);
  EXPECT_THROW(dissipation_g(std::vector<double>{}), UsageError);
  EXPECT_THROW(dissipation_g(std::vector<double>{1.0, 0.0}), DomainError);
}

TEST(Dissipation, CarlemanTrajectoryWithinBound) {
  const Lattice lat = make_lattice("D1Q3");
  const auto ops = build_collision_operators(lat, {1.0, 1.0});
  Eigen::VectorXd f0(3);
  f0 << 0.7, 0.2, 0.1;
  for (int k : {3, 4}) {
    const auto traj = integrate(build_single_point(ops, k), lift(f0, k), 10.0, 0.1);
    const double g = dissipation_g(traj);
    EXPECT_GE(g, 1.0);
    EXPECT_LE(g, 3.0 * std::sqrt(k));
  }
}
