#ifndef CLBM_TRUNCATION_HPP_
#define CLBM_TRUNCATION_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clbm/carleman.hpp"
#include "clbm/collision.hpp"
#include "clbm/errors.hpp"
#include "clbm/lattice.hpp"

namespace clbm {

// ---------------------------------------------------------------------------
// Single-point truncation experiment

struct TruncationConfig {
  std::vector<int> k_values{3, 4, 5};
  double u0 = 0.1;
  double T = 10.0;   // absolute time; callers usually pass 10 * kn_tau
  double dt = 0.1;   // callers usually pass kn_tau / 10
  bool taylor_oracle = false;
};

/// Errors of one truncation order.
struct TruncationRun {
  int k = 3;
  double max_rel_error = 0.0;    // max over m and every step
  double final_rel_error = 0.0;  // max over m at t = T
  std::int64_t excluded = 0;     // entries skipped because f_m < 1e-30
  std::vector<double> times;
  Eigen::MatrixXd epsilon;       // steps+1 x Q
};

struct TruncationReport {
  std::string lattice;
  RelaxParams relax;
  TruncationConfig config;
  std::vector<TruncationRun> runs;

  [[nodiscard]] std::vector<int> k_values() const {
    std::vector<int> out;
    for (const auto& r : runs) out.push_back(r.k);
    return out;
  }

  [[nodiscard]] nlohmann::json summary() const {
    nlohmann::json j;
    j["lattice"] = lattice;
    j["kn_tau"] = relax.kn_tau;
    j["tau"] = relax.tau;
    j["u0"] = config.u0;
    j["T"] = config.T;
    j["dt"] = config.dt;
    j["oracle"] = config.taylor_oracle ? "taylor" : "exact";
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : runs) {
      rs.push_back({{"k", r.k},
                    {"max_rel_error", r.max_rel_error},
                    {"final_rel_error", r.final_rel_error},
                    {"excluded", r.excluded}});
    }
    j["runs"] = rs;
    return j;
  }
};

inline constexpr double kEpsilonGuard = 1e-30;

/// Single-node CLBM at each k against the nonlinear BGK relaxation, both
/// integrated with the same RK4 step from f0 = equilibrium(1, u0).
/// epsilon_m = |f^CLBM_m - f_m| / f_m is evaluated at every step.
inline TruncationReport run_single_point_experiment(const Lattice& lat, const RelaxParams& rp,
                                                    const TruncationConfig& cfg) {
  rp.validate();
  if (std::abs(cfg.u0) > 0.3) throw DomainError("run_single_point_experiment: |u0| must not exceed 0.3");
  for (int k : cfg.k_values) {
    if (k < 2 || k > 6) throw ConfigError("run_single_point_experiment: k must lie in 2..6");
  }
  const CollisionOperators ops = build_collision_operators(lat, rp);
  const Eigen::VectorXd f0 = equilibrium(lat, 1.0, cfg.u0);

  // oracle trajectory, shared by all k
  auto oracle_rhs = [&](const Eigen::VectorXd& f) -> Eigen::VectorXd {
    return cfg.taylor_oracle ? bgk_rhs_taylor(lat, rp, f) : bgk_rhs(lat, rp, f);
  };
  const Trajectory oracle = integrate_rk4(oracle_rhs, f0, cfg.T, cfg.dt);

  TruncationReport rep;
  rep.lattice = to_string(lat.name);
  rep.relax = rp;
  rep.config = cfg;
  for (int k : cfg.k_values) {
    const CarlemanSystem sys = build_single_point(ops, k);
    const Trajectory traj = integrate(sys, lift(f0, k), cfg.T, cfg.dt);
    TruncationRun run;
    run.k = k;
    run.times = traj.times;
    run.epsilon = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(traj.states.size()), lat.Q);
    for (std::size_t s = 0; s < traj.states.size(); ++s) {
      const Eigen::VectorXd& ref = oracle.states[s];
      for (int m = 0; m < lat.Q; ++m) {
        if (std::abs(ref(m)) < kEpsilonGuard) {
          ++run.excluded;
          continue;
        }
        const double e = std::abs(traj.states[s](m) - ref(m)) / std::abs(ref(m));
        run.epsilon(static_cast<Eigen::Index>(s), m) = e;
      }
    }
    run.max_rel_error = run.epsilon.maxCoeff();
    run.final_rel_error = run.epsilon.bottomRows(1).maxCoeff();
    rep.runs.push_back(std::move(run));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Moment hierarchy

/// Collision moments split into the c channel (from c (e_m.u)^2) and the
/// d channel (from d u^2). Lattice isotropy makes the channels cancel, so
/// the totals vanish identically.
struct ZetaCoefficients {
  double zeta2_c = 0.0;
  double zeta2_d = 0.0;
  double zeta3_c = 0.0;
  double zeta3_d = 0.0;
  [[nodiscard]] double zeta2() const { return zeta2_c + zeta2_d; }
  [[nodiscard]] double zeta3() const { return zeta3_c + zeta3_d; }
};

/// zeta2 rho^2 = Phi_rho F2 f^[2], zeta3 rho^3 = Phi_rho F3 f^[3] at velocity u.
inline ZetaCoefficients zeta_coefficients(const Lattice& lat, const RelaxParams& rp,
                                          const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != lat.D) throw UsageError("zeta_coefficients: velocity dimension does not match lattice");
  double sc = 0.0;
  double sd = 0.0;
  const double usq = u.squaredNorm();
  for (int m = 0; m < lat.Q; ++m) {
    const double eu = lat.e.col(m).dot(u);
    sc += lat.w(m) * lat.c * eu * eu;
    sd += lat.w(m) * lat.d * usq;
  }
  ZetaCoefficients z;
  z.zeta2_c = 2.0 / rp.kn_tau * sc;
  z.zeta2_d = 2.0 / rp.kn_tau * sd;
  z.zeta3_c = -1.0 / rp.kn_tau * sc;
  z.zeta3_d = -1.0 / rp.kn_tau * sd;
  return z;
}

inline ZetaCoefficients zeta_coefficients(const Lattice& lat, const RelaxParams& rp, double u1d) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(lat.D);
  u(0) = u1d;
  return zeta_coefficients(lat, rp, u);
}

/// Leading corrections to d(rho^{k-1})/dt and d(rho^k)/dt from the first
/// neglected Carleman degree k+1, per channel, and the mixed rho-u
/// corrections (zero by lattice symmetry).
struct MomentCorrection {
  int k = 3;
  double rho_km1_c = 0.0;
  double rho_km1_d = 0.0;
  double rho_k_c = 0.0;
  double rho_k_d = 0.0;
  double mixed = 0.0;
  [[nodiscard]] double rho_km1() const { return rho_km1_c + rho_km1_d; }
  [[nodiscard]] double rho_k() const { return rho_k_c + rho_k_d; }
};

inline MomentCorrection moment_correction(const Lattice& lat, const RelaxParams& rp, double rho,
                                          const Eigen::Ref<const Eigen::VectorXd>& u, int k) {
  if (k < 3) throw UsageError("moment_correction: k must be >= 3");
  if (u.size() != lat.D) throw UsageError("moment_correction: velocity dimension does not match lattice");
  double sc = 0.0;
  double sd = 0.0;
  const double usq = u.squaredNorm();
  for (int m = 0; m < lat.Q; ++m) {
    const double eu = lat.e.col(m).dot(u);
    sc += lat.w(m) * lat.c * eu * eu;
    sd += lat.w(m) * lat.d * usq;
  }
  MomentCorrection mc;
  mc.k = k;
  // Phi_rho^[k-1] A^{k-1}_{k+1} f^[k+1]: k-1 slots carry F3 f^[3] (order rho^3)
  const double km1 = -(k - 1) / rp.kn_tau * std::pow(rho, k + 1);
  mc.rho_km1_c = km1 * sc;
  mc.rho_km1_d = km1 * sd;
  // Phi_rho^[k] A^k_{k+1} f^[k+1]: k slots carry F2 f^[2] (order rho^2)
  const double kk = 2.0 * k / rp.kn_tau * std::pow(rho, k + 1);
  mc.rho_k_c = kk * sc;
  mc.rho_k_d = kk * sd;
  mc.mixed = 0.0;
  return mc;
}

inline MomentCorrection moment_correction(const Lattice& lat, const RelaxParams& rp, double rho, double u1d, int k) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(lat.D);
  u(0) = u1d;
  return moment_correction(lat, rp, rho, u, k);
}

// ---------------------------------------------------------------------------
// Symmetry cancellation

/// max over `trials` random f (entries uniform in [0,1), scaled to ||f|| = 1)
/// of |Phi_rhou F2 f^[2]| and |Phi_rhou F3 f^[3]|.
inline double symmetry_cancellation(const Lattice& lat, const CollisionOperators& ops, int trials = 100,
                                    std::uint64_t seed = 7) {
  if (trials < 1) throw UsageError("symmetry_cancellation: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const Eigen::MatrixXd P2 = lat.e * ops.F2;
  const Eigen::MatrixXd P3 = lat.e * ops.F3;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd f(lat.Q);
    for (int m = 0; m < lat.Q; ++m) f(m) = ud(rng);
    f /= f.norm();
    const Eigen::VectorXd f2 = kron_power(f, 2);
    const Eigen::VectorXd f3 = kron(f2, f);
    worst = std::max(worst, (P2 * f2).cwiseAbs().maxCoeff());
    worst = std::max(worst, (P3 * f3).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Dissipation parameter

/// g = max_t ||V(t)|| / ||V(T)||.
inline double dissipation_g(const std::vector<double>& norms) {
  if (norms.empty()) throw UsageError("dissipation_g: empty trajectory");
  const double last = norms.back();
  if (!(last > 0.0)) throw DomainError("dissipation_g: final norm is zero");
  return *std::max_element(norms.begin(), norms.end()) / last;
}

inline double dissipation_g(const Trajectory& traj) {
  std::vector<double> norms;
  norms.reserve(traj.states.size());
  for (const auto& s : traj.states) norms.push_back(s.norm());
  return dissipation_g(norms);
}

}  // namespace clbm

#endif  // CLBM_TRUNCATION_HPP_
