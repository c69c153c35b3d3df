#ifndef CLBM_COLLISION_HPP_
#define CLBM_COLLISION_HPP_

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <iostream>
#include <sstream>

#include "clbm/errors.hpp"
#include "clbm/kron.hpp"
#include "clbm/lattice.hpp"

namespace clbm {

/// Relaxation parameters. Only the product Kn*tau enters the collision
/// operator; tau alone is kept for the (0.5, 1] stability window.
struct RelaxParams {
  double kn_tau = 1.0;
  double tau = 1.0;

  void validate() const {
    if (!(kn_tau > 0.0) || !std::isfinite(kn_tau)) {
      throw DomainError("kn_tau must be positive and finite");
    }
    if (!(tau > 0.5 && tau <= 1.0)) {
      std::ostringstream os;
      os << "tau=" << tau << " outside (0.5, 1]";
      throw DomainError(os.str());
    }
  }
};

inline void warn_large_velocity(double speed) {
  if (speed > 0.3) {
    std::clog << "clbm: warning: |u|=" << speed << " exceeds 0.3; low-Mach expansion is inaccurate\n";
  }
}

/// Second-order Maxwell equilibrium
/// f_eq_m = rho w_m [a + b e_m.u + c (e_m.u)^2 + d |u|^2].
inline Eigen::VectorXd equilibrium(const Lattice& lat, double rho, const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (!(rho > 0.0)) throw DomainError("equilibrium: density must be positive");
  if (u.size() != lat.D) throw UsageError("equilibrium: velocity dimension does not match lattice");
  warn_large_velocity(u.norm());
  const double usq = u.squaredNorm();
  Eigen::VectorXd feq(lat.Q);
  for (int m = 0; m < lat.Q; ++m) {
    const double eu = lat.e.col(m).dot(u);
    feq(m) = rho * lat.w(m) * (lat.a + lat.b * eu + lat.c * eu * eu + lat.d * usq);
  }
  return feq;
}

inline Eigen::VectorXd equilibrium(const Lattice& lat, double rho, double u1d) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(lat.D);
  u(0) = u1d;
  return equilibrium(lat, rho, u);
}

/// BGK collision term -(f - f_eq(rho(f), u(f))) / (Kn tau) with exact 1/rho.
inline Eigen::VectorXd bgk_rhs(const Lattice& lat, const RelaxParams& rp, const Eigen::Ref<const Eigen::VectorXd>& f) {
  if (f.size() != lat.Q) throw UsageError("bgk_rhs: f has wrong length");
  const double rho = f.sum();
  if (!(rho > 0.0)) throw DomainError("bgk_rhs: non-positive density");
  const Eigen::VectorXd u = momentum(lat, f) / rho;
  const double usq = u.squaredNorm();
  Eigen::VectorXd out(lat.Q);
  for (int m = 0; m < lat.Q; ++m) {
    const double eu = lat.e.col(m).dot(u);
    const double feq = rho * lat.w(m) * (lat.a + lat.b * eu + lat.c * eu * eu + lat.d * usq);
    out(m) = -(f(m) - feq) / rp.kn_tau;
  }
  return out;
}

/// BGK collision term with 1/rho replaced by 2 - rho, evaluated before any
/// grouping into polynomial degrees. This is the oracle the polynomial
/// operators must reproduce exactly.
inline Eigen::VectorXd bgk_rhs_taylor(const Lattice& lat, const RelaxParams& rp,
                                      const Eigen::Ref<const Eigen::VectorXd>& f) {
  if (f.size() != lat.Q) throw UsageError("bgk_rhs_taylor: f has wrong length");
  const double rho = f.sum();
  const Eigen::VectorXd j = momentum(lat, f);
  const double jsq = j.squaredNorm();
  Eigen::VectorXd out(lat.Q);
  for (int m = 0; m < lat.Q; ++m) {
    const double ej = lat.e.col(m).dot(j);
    const double feq = lat.w(m) * (lat.a * rho + lat.b * ej + (lat.c * ej * ej + lat.d * jsq) * (2.0 - rho));
    out(m) = -(f(m) - feq) / rp.kn_tau;
  }
  return out;
}

/// Coefficient matrices of the cubic collision polynomial
/// df/dt = F1 f + F2 f^[2] + F3 f^[3].
struct CollisionOperators {
  Lattice lattice;
  RelaxParams relax;
  Eigen::MatrixXd F1;  // Q x Q
  Eigen::MatrixXd F2;  // Q x Q^2
  Eigen::MatrixXd F3;  // Q x Q^3
  bool includes_streaming = false;

  [[nodiscard]] int Q() const { return lattice.Q; }

  /// F^(j) for j in {1, 2, 3}.
  [[nodiscard]] const Eigen::MatrixXd& F(int j) const {
    switch (j) {
      case 1: return F1;
      case 2: return F2;
      case 3: return F3;
      default: throw UsageError("collision operator degree must be 1, 2 or 3");
    }
  }
};

/// Groups the Taylor-expanded BGK term by polynomial degree:
///   linear    (1/kt) [-f_m + w_m (a rho + b e_m.j)]
///   quadratic (2/kt) w_m [c (e_m.j)^2 + d j^2]
///   cubic    -(1/kt) w_m rho [c (e_m.j)^2 + d j^2]
/// with rho = sum f and j = sum e f. Cubic coefficients are averaged over
/// the 3! orderings of each monomial; quadratic ones are symmetric already.
inline CollisionOperators build_collision_operators(const Lattice& lat, const RelaxParams& rp) {
  rp.validate();
  const int Q = lat.Q;
  const double inv = 1.0 / rp.kn_tau;
  const Eigen::MatrixXd ee = lat.e.transpose() * lat.e;  // e_i . e_j

  CollisionOperators ops;
  ops.lattice = lat;
  ops.relax = rp;
  ops.F1.resize(Q, Q);
  for (int m = 0; m < Q; ++m) {
    for (int n = 0; n < Q; ++n) {
      ops.F1(m, n) = inv * ((m == n ? -1.0 : 0.0) + lat.w(m) * (lat.a + lat.b * ee(m, n)));
    }
  }

  const Eigen::Index Q2 = static_cast<Eigen::Index>(Q) * Q;
  ops.F2 = Eigen::MatrixXd::Zero(Q, Q2);
  ops.F3 = Eigen::MatrixXd::Zero(Q, Q2 * Q);
  for (int m = 0; m < Q; ++m) {
    for (int i = 0; i < Q; ++i) {
      for (int j = 0; j < Q; ++j) {
        const double quad = lat.w(m) * (lat.c * ee(m, i) * ee(m, j) + lat.d * ee(i, j));
        ops.F2(m, static_cast<Eigen::Index>(i) * Q + j) = 2.0 * inv * quad;
        // rho factor l sits in each of the three slots with weight 1/3;
        // (i, j) is already symmetric, so this equals the full 3! average.
        const double cub = -inv * quad / 3.0;
        for (int l = 0; l < Q; ++l) {
          const std::array<Eigen::Index, 3> slots[3] = {{l, i, j}, {i, l, j}, {i, j, l}};
          for (const auto& s : slots) {
            ops.F3(m, (s[0] * Q + s[1]) * Q + s[2]) += cub;
          }
        }
      }
    }
  }
  return ops;
}

/// F1 f + F2 f^[2] + F3 f^[3].
inline Eigen::VectorXd poly_collision_rhs(const CollisionOperators& ops, const Eigen::Ref<const Eigen::VectorXd>& f) {
  if (f.size() != ops.Q()) throw UsageError("poly_collision_rhs: f has wrong length");
  const Eigen::VectorXd f2 = kron_power(f, 2);
  const Eigen::VectorXd f3 = kron(f2, f);
  return ops.F1 * f + ops.F2 * f2 + ops.F3 * f3;
}

}  // namespace clbm

#endif  // CLBM_COLLISION_HPP_
