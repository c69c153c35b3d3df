#ifndef CLBM_LATTICE_HPP_
#define CLBM_LATTICE_HPP_

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "clbm/errors.hpp"

namespace clbm {

enum class LatticeName { D1Q3, D2Q9, D3Q27 };

inline std::string to_string(LatticeName name) {
  switch (name) {
    case LatticeName::D1Q3: return "D1Q3";
    case LatticeName::D2Q9: return "D2Q9";
    case LatticeName::D3Q27: return "D3Q27";
  }
  return "?";
}

inline LatticeName parse_lattice_name(std::string_view name) {
  if (name == "D1Q3") return LatticeName::D1Q3;
  if (name == "D2Q9") return LatticeName::D2Q9;
  if (name == "D3Q27") return LatticeName::D3Q27;
  throw ConfigError("unknown lattice '" + std::string(name) + "' (expected D1Q3, D2Q9 or D3Q27)");
}

/// Discrete velocity set with Maxwell weights and the equilibrium Taylor
/// constants a, b, c, d. Velocities are stored column-wise (D x Q).
///
/// Plain aggregate so test fixtures can build deliberately broken lattices;
/// `make_lattice` is the only producer of valid ones.
struct Lattice {
  LatticeName name = LatticeName::D1Q3;
  int D = 1;
  int Q = 3;
  Eigen::MatrixXd e;  // D x Q
  Eigen::VectorXd w;  // Q
  double a = 1.0;
  double b = 3.0;
  double c = 4.5;
  double d = -1.5;

  /// Squared speed of sound of the isotropic lattices.
  static constexpr double cs2 = 1.0 / 3.0;

  [[nodiscard]] Eigen::VectorXd velocity(int m) const { return e.col(m); }

  /// Index of the velocity opposite to m, or -1 when absent.
  [[nodiscard]] int opposite(int m) const {
    for (int k = 0; k < Q; ++k) {
      if ((e.col(k) + e.col(m)).cwiseAbs().maxCoeff() == 0.0) return k;
    }
    return -1;
  }
};

namespace detail {
// D1Q3 building block: rest, +1, -1.
inline constexpr std::array<int, 3> kVel1D{0, 1, -1};
inline constexpr std::array<double, 3> kW1D{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
}  // namespace detail

/// Builds D1Q3, D2Q9 or D3Q27 as a tensor product of the D1Q3 set. The first
/// axis varies slowest, so velocity 0 is always the rest particle.
inline Lattice make_lattice(LatticeName name) {
  Lattice lat;
  lat.name = name;
  lat.D = name == LatticeName::D1Q3 ? 1 : name == LatticeName::D2Q9 ? 2 : 3;
  lat.Q = 1;
  for (int i = 0; i < lat.D; ++i) lat.Q *= 3;
  lat.e.resize(lat.D, lat.Q);
  lat.w.resize(lat.Q);
  for (int m = 0; m < lat.Q; ++m) {
    int rem = m;
    double weight = 1.0;
    for (int axis = lat.D - 1; axis >= 0; --axis) {
      const int k = rem % 3;
      rem /= 3;
      lat.e(axis, m) = detail::kVel1D[static_cast<std::size_t>(k)];
      weight *= detail::kW1D[static_cast<std::size_t>(k)];
    }
    lat.w(m) = weight;
  }
  return lat;
}

inline Lattice make_lattice(std::string_view name) { return make_lattice(parse_lattice_name(name)); }

/// Moment extraction rows: rho = phi_rho . f, rho*u = phi_rho_u * f.
struct MomentVectors {
  Eigen::RowVectorXd phi_rho;  // 1 x Q
  Eigen::MatrixXd phi_rho_u;   // D x Q
};

inline MomentVectors moment_vectors(const Lattice& lat) {
  return {Eigen::RowVectorXd::Ones(lat.Q), lat.e};
}

inline double density(const Lattice& lat, const Eigen::Ref<const Eigen::VectorXd>& f) {
  (void)lat;
  return f.sum();
}

inline Eigen::VectorXd momentum(const Lattice& lat, const Eigen::Ref<const Eigen::VectorXd>& f) {
  return lat.e * f;
}

}  // namespace clbm

#endif  // CLBM_LATTICE_HPP_
