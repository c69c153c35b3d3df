#ifndef CLBM_TURBULENCE_HPP_
#define CLBM_TURBULENCE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "clbm/collision.hpp"
#include "clbm/errors.hpp"
#include "clbm/lattice.hpp"

namespace clbm {

/// Distribution functions on a periodic nx x ny grid, point-major with
/// velocity fastest: f[(x * ny + y) * Q + m].
struct FlowField {
  Lattice lat;
  int nx = 0;
  int ny = 0;
  std::vector<double> f;
  std::int64_t t = 0;

  [[nodiscard]] std::int64_t points() const { return static_cast<std::int64_t>(nx) * ny; }
  [[nodiscard]] double* at(int x, int y) { return f.data() + (static_cast<std::int64_t>(x) * ny + y) * lat.Q; }
  [[nodiscard]] const double* at(int x, int y) const {
    return f.data() + (static_cast<std::int64_t>(x) * ny + y) * lat.Q;
  }

  [[nodiscard]] double mass() const {
    double s = 0.0;
    for (double v : f) s += v;
    return s;
  }

  [[nodiscard]] Eigen::Vector2d momentum() const {
    Eigen::Vector2d j = Eigen::Vector2d::Zero();
    for (std::int64_t p = 0; p < points(); ++p) {
      for (int m = 0; m < lat.Q; ++m) {
        j(0) += f[static_cast<std::size_t>(p * lat.Q + m)] * lat.e(0, m);
        j(1) += f[static_cast<std::size_t>(p * lat.Q + m)] * lat.e(1, m);
      }
    }
    return j;
  }

  /// Global L2 norm over all points and velocities.
  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (double v : f) s += v * v;
    return std::sqrt(s);
  }

  /// Spatial mean of rho |u|^2 / 2.
  [[nodiscard]] double energy() const {
    double s = 0.0;
    for (std::int64_t p = 0; p < points(); ++p) {
      const double* g = f.data() + p * lat.Q;
      double rho = 0.0, jx = 0.0, jy = 0.0;
      for (int m = 0; m < lat.Q; ++m) {
        rho += g[m];
        jx += g[m] * lat.e(0, m);
        jy += g[m] * lat.e(1, m);
      }
      s += 0.5 * (jx * jx + jy * jy) / rho;
    }
    return s / static_cast<double>(points());
  }

  /// Spatial mean of f_m.
  [[nodiscard]] Eigen::VectorXd mean_distribution() const {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(lat.Q);
    for (std::int64_t p = 0; p < points(); ++p) {
      for (int m = 0; m < lat.Q; ++m) mean(m) += f[static_cast<std::size_t>(p * lat.Q + m)];
    }
    return mean / static_cast<double>(points());
  }
};

struct DecayConfig {
  int nx = 64;
  int ny = 64;
  /// Relaxation time; 0 derives it from Re0.
  double tau = 0.0;
  double Ma0 = 0.03;
  double Re0 = 400.0;
  std::int64_t steps = 20000;
  std::int64_t sample_every = 100;
  /// Optional Kolmogorov-forced spin-up before the free decay.
  bool forced_spinup = false;
  std::int64_t spinup_steps = 2000;
  double forcing_amplitude = 1e-6;
  int forcing_wavenumber = 4;
  std::uint64_t seed = 1;

  /// Peak velocity in lattice units, Ma0 * c_s.
  [[nodiscard]] double u0() const { return Ma0 * std::sqrt(Lattice::cs2); }

  /// Kinematic viscosity from Re0 = u0 nx / nu.
  [[nodiscard]] double viscosity() const { return u0() * nx / Re0; }

  /// tau if set, else 1/2 + nu / c_s^2.
  [[nodiscard]] double effective_tau() const { return tau > 0.0 ? tau : 0.5 + viscosity() / Lattice::cs2; }

  void validate() const {
    if (nx < 2 || ny < 2 || nx % 2 != 0 || ny % 2 != 0) throw ConfigError("turbulence: nx, ny must be even and >= 2");
    if (!(Ma0 >= 0.0 && Ma0 <= 0.1)) throw ConfigError("turbulence: Ma0 must lie in [0, 0.1]");
    if (!(Re0 > 0.0)) throw ConfigError("turbulence: Re0 must be positive");
    const double t = effective_tau();
    if (!(t > 0.5 && t <= 1.0)) {
      std::ostringstream os;
      os << "turbulence: tau=" << t << " outside (0.5, 1]";
      throw ConfigError(os.str());
    }
    if (steps < 1 || sample_every < 1) throw ConfigError("turbulence: steps and sample_every must be >= 1");
    if (forced_spinup && spinup_steps < 0) throw ConfigError("turbulence: spinup_steps must be >= 0");
  }
};

/// Taylor-Green vortex u = u0 (sin x cos y, -cos x sin y), x = 2 pi i / nx,
/// at unit density and equilibrium.
inline FlowField init_taylor_green(const DecayConfig& cfg) {
  cfg.validate();
  FlowField fl;
  fl.lat = make_lattice(LatticeName::D2Q9);
  fl.nx = cfg.nx;
  fl.ny = cfg.ny;
  fl.f.resize(static_cast<std::size_t>(fl.points() * fl.lat.Q));
  const double u0 = cfg.u0();
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::VectorXd u(2);
  for (int x = 0; x < cfg.nx; ++x) {
    const double X = two_pi * x / cfg.nx;
    for (int y = 0; y < cfg.ny; ++y) {
      const double Y = two_pi * y / cfg.ny;
      u << u0 * std::sin(X) * std::cos(Y), -u0 * std::cos(X) * std::sin(Y);
      const Eigen::VectorXd feq = equilibrium(fl.lat, 1.0, u);
      std::copy(feq.data(), feq.data() + fl.lat.Q, fl.at(x, y));
    }
  }
  return fl;
}

/// Body force (per unit mass) added during a step.
struct BodyForce {
  double amplitude = 0.0;
  int wavenumber = 0;
};

namespace detail {

inline void check_field_finite(const FlowField& fl) {
  for (double v : fl.f) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "step_lbm: non-finite distribution at step " << fl.t;
      throw NumericalError(os.str());
    }
  }
}

}  // namespace detail

/// `steps` collide-then-stream updates with BGK relaxation time tau (exact
/// 1/rho). An optional Kolmogorov force F_x = A sin(2 pi k y / ny) enters
/// through the equilibrium velocity shift u + tau F / rho.
inline void step_lbm(FlowField& fl, double tau, std::int64_t steps, const BodyForce& force = {}) {
  if (!(tau > 0.5)) throw ConfigError("step_lbm: tau must exceed 0.5");
  const Lattice& lat = fl.lat;
  const int Q = lat.Q;
  const int nx = fl.nx;
  const int ny = fl.ny;
  std::vector<int> ex(Q), ey(Q);
  std::vector<double> w(Q);
  for (int m = 0; m < Q; ++m) {
    ex[m] = static_cast<int>(lat.e(0, m));
    ey[m] = static_cast<int>(lat.e(1, m));
    w[m] = lat.w(m);
  }
  const double omega = 1.0 / tau;
  std::vector<double> fx(static_cast<std::size_t>(ny), 0.0);
  if (force.amplitude != 0.0) {
    for (int y = 0; y < ny; ++y) {
      fx[static_cast<std::size_t>(y)] = force.amplitude * std::sin(2.0 * std::numbers::pi * force.wavenumber * y / ny);
    }
  }
  std::vector<double> next(fl.f.size());
  for (std::int64_t s = 0; s < steps; ++s) {
    for (int x = 0; x < nx; ++x) {
      for (int y = 0; y < ny; ++y) {
        double* g = fl.at(x, y);
        double rho = 0.0, jx = 0.0, jy = 0.0;
        for (int m = 0; m < Q; ++m) {
          rho += g[m];
          jx += g[m] * ex[m];
          jy += g[m] * ey[m];
        }
        const double ux = jx / rho + tau * fx[static_cast<std::size_t>(y)];
        const double uy = jy / rho;
        const double usq = ux * ux + uy * uy;
        for (int m = 0; m < Q; ++m) {
          const double eu = ex[m] * ux + ey[m] * uy;
          const double feq = rho * w[m] * (lat.a + lat.b * eu + lat.c * eu * eu + lat.d * usq);
          const double post = g[m] - omega * (g[m] - feq);
          const int xd = (x + ex[m] + nx) % nx;
          const int yd = (y + ey[m] + ny) % ny;
          next[static_cast<std::size_t>((static_cast<std::int64_t>(xd) * ny + yd) * Q + m)] = post;
        }
      }
    }
    fl.f.swap(next);
    ++fl.t;
  }
  detail::check_field_finite(fl);
}

struct DecaySeries {
  std::vector<std::int64_t> t;
  std::vector<double> f_norm;
  std::vector<double> energy;
  std::vector<double> g_f_running;  // max_{s<=t} ||f(s)|| / ||f(t)||
  double g_f = 1.0;
  double tau = 1.0;
  double nu = 0.0;
  double mass_drift = 0.0;  // |M(T) - M(0)| / M(0)
  Eigen::VectorXd final_mean;
};

/// Decaying run from the Taylor-Green state (optionally after a forced
/// spin-up seeded with a random perturbation), sampled every sample_every
/// steps including t = 0 and the final step.
inline DecaySeries run_decaying(const DecayConfig& cfg, FlowField* final_field = nullptr) {
  cfg.validate();
  FlowField fl = init_taylor_green(cfg);
  DecaySeries out;
  out.tau = cfg.effective_tau();
  out.nu = (out.tau - 0.5) * Lattice::cs2;

  if (cfg.forced_spinup) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const double eps = 1e-3 * cfg.u0();
    for (int x = 0; x < fl.nx; ++x) {
      for (int y = 0; y < fl.ny; ++y) {
        double* g = fl.at(x, y);
        // small random shear in the moving populations keeps mass fixed
        const double d = eps * ud(rng);
        g[3] += d;
        g[6] -= d;
      }
    }
    step_lbm(fl, out.tau, cfg.spinup_steps, BodyForce{cfg.forcing_amplitude, cfg.forcing_wavenumber});
    fl.t = 0;
  }

  const double m0 = fl.mass();
  double running_max = 0.0;
  auto sample = [&]() {
    const double nf = fl.norm();
    running_max = std::max(running_max, nf);
    out.t.push_back(fl.t);
    out.f_norm.push_back(nf);
    out.energy.push_back(fl.energy());
    out.g_f_running.push_back(running_max / nf);
  };
  sample();
  std::int64_t done = 0;
  while (done < cfg.steps) {
    const std::int64_t chunk = std::min(cfg.sample_every, cfg.steps - done);
    step_lbm(fl, out.tau, chunk);
    done += chunk;
    sample();
  }
  out.g_f = out.g_f_running.back();
  out.mass_drift = std::abs(fl.mass() - m0) / m0;
  out.final_mean = fl.mean_distribution();
  if (final_field != nullptr) *final_field = std::move(fl);
  return out;
}

struct DecayFit {
  double exponent = 0.0;   // slope of log E vs log t
  double r2_power = 0.0;   // fit quality in log-log axes
  double r2_exp = 0.0;     // fit quality of log E vs t
  bool power_law = false;  // log-log fits at least as well as semi-log
  std::size_t samples = 0;
};

/// Least-squares power-law exponent of energy(t) over samples with t >= t_min.
inline DecayFit energy_decay_fit(const std::vector<double>& t, const std::vector<double>& energy, double t_min = 0.0) {
  if (t.size() != energy.size()) throw UsageError("energy_decay_fit: series lengths differ");
  std::vector<double> lx, lt, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > 0.0 && t[i] >= t_min && energy[i] > 0.0) {
      lx.push_back(std::log(t[i]));
      lt.push_back(t[i]);
      ly.push_back(std::log(energy[i]));
    }
  }
  if (lx.size() < 20) throw UsageError("energy_decay_fit: need at least 20 samples past the transient");
  auto fit = [](const std::vector<double>& x, const std::vector<double>& y, double& slope) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
      syy += y[i] * y[i];
    }
    const double vx = n * sxx - sx * sx;
    const double vy = n * syy - sy * sy;
    const double cxy = n * sxy - sx * sy;
    slope = cxy / vx;
    return vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  };
  DecayFit out;
  double s_exp = 0.0;
  out.r2_power = fit(lx, ly, out.exponent);
  out.r2_exp = fit(lt, ly, s_exp);
  out.power_law = out.r2_power >= out.r2_exp;
  out.samples = lx.size();
  return out;
}

}  // namespace clbm

#endif  // CLBM_TURBULENCE_HPP_
