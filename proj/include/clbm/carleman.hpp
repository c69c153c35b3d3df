#ifndef CLBM_CARLEMAN_HPP_
#define CLBM_CARLEMAN_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "clbm/collision.hpp"
#include "clbm/errors.hpp"
#include "clbm/kron.hpp"
#include "clbm/lattice.hpp"

namespace clbm {

enum class StreamScheme { Central2, Upwind1 };

inline std::string to_string(StreamScheme s) { return s == StreamScheme::Central2 ? "central2" : "upwind1"; }

inline StreamScheme parse_stream_scheme(const std::string& s) {
  if (s == "central2" || s == "central") return StreamScheme::Central2;
  if (s == "upwind1" || s == "upwind") return StreamScheme::Upwind1;
  throw ConfigError("unknown stencil '" + s + "' (expected central2 or upwind1)");
}

/// Sizes of the Carleman-degree blocks: base^1, ..., base^k.
struct BlockLayout {
  int k = 3;
  std::int64_t base = 3;
  std::vector<std::int64_t> offsets;  // k + 1 entries, offsets[k] == dim

  BlockLayout() = default;
  BlockLayout(int degree, std::int64_t base_dim) : k(degree), base(base_dim) {
    offsets.assign(static_cast<std::size_t>(k) + 1, 0);
    std::int64_t size = 1;
    for (int i = 1; i <= k; ++i) {
      size *= base;
      offsets[static_cast<std::size_t>(i)] = offsets[static_cast<std::size_t>(i) - 1] + size;
    }
  }
  [[nodiscard]] std::int64_t dim() const { return offsets.back(); }
  /// Start of block i (1-based degree).
  [[nodiscard]] std::int64_t offset(int i) const { return offsets[static_cast<std::size_t>(i) - 1]; }
  [[nodiscard]] std::int64_t size(int i) const { return ipow(base, i); }
};

/// Truncated Carleman matrix in compressed-row storage.
struct CarlemanSystem {
  int k = 3;
  std::int64_t n = 1;  // grid points (1 for single-point)
  BlockLayout layout;
  SparseMatrix matrix;
  double kn_tau = 1.0;
  LatticeName lattice = LatticeName::D1Q3;
  bool has_streaming = false;
  StreamScheme scheme = StreamScheme::Central2;

  [[nodiscard]] std::int64_t base_dim() const { return layout.base; }
  [[nodiscard]] std::int64_t dim() const { return layout.dim(); }
  [[nodiscard]] const std::vector<std::int64_t>& block_offsets() const { return layout.offsets; }

  /// Block (i, j) in Carleman degree, 1-based.
  [[nodiscard]] SparseMatrix block(int i, int j) const {
    return matrix.block(layout.offset(i), layout.offset(j), layout.size(i), layout.size(j));
  }

  [[nodiscard]] Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// Carleman vector (phi, phi^[2], ..., phi^[k]).
struct CarlemanVector {
  int k = 3;
  std::int64_t n = 1;
  BlockLayout layout;
  Eigen::VectorXd data;

  [[nodiscard]] auto block(int i) const { return data.segment(layout.offset(i), layout.size(i)); }
  [[nodiscard]] auto block(int i) { return data.segment(layout.offset(i), layout.size(i)); }
};

inline CarlemanVector lift(const Eigen::Ref<const Eigen::VectorXd>& phi, int k, std::int64_t n = 1) {
  if (k < 1) throw UsageError("lift: degree must be >= 1");
  CarlemanVector v;
  v.k = k;
  v.n = n;
  v.layout = BlockLayout(k, phi.size());
  v.data.resize(v.layout.dim());
  Eigen::VectorXd power = phi;
  v.block(1) = power;
  for (int i = 2; i <= k; ++i) {
    power = kron(power, phi);
    v.block(i) = power;
  }
  return v;
}

inline Eigen::VectorXd project(const CarlemanVector& v) { return v.block(1); }

/// Default cap on assembled nonzeros.
inline constexpr std::int64_t kDefaultNnzCap = 20'000'000;

namespace detail {

/// Upper bound on the nonzeros produced by `assemble_carleman`.
inline std::int64_t estimate_nnz(const std::vector<SparseMatrix>& F, const SparseMatrix* S, int k, std::int64_t base) {
  std::int64_t total = 0;
  for (int i = 1; i <= k; ++i) {
    for (int j = 1; j <= static_cast<int>(F.size()); ++j) {
      if (i + j - 1 > k) continue;
      total += i * F[static_cast<std::size_t>(j) - 1].nonZeros() * ipow(base, i - 1);
    }
    if (S != nullptr) total += i * S->nonZeros() * ipow(base, i - 1);
  }
  return total;
}

inline SparseMatrix assemble_carleman(const std::vector<SparseMatrix>& F, const SparseMatrix* S, int k,
                                      std::int64_t base, std::int64_t nnz_cap) {
  if (k < 1) throw UsageError("Carleman degree must be >= 1");
  const BlockLayout layout(k, base);
  if (layout.dim() > std::numeric_limits<int>::max()) throw ResourceError("Carleman dimension overflows index type");
  const std::int64_t est = estimate_nnz(F, S, k, base);
  if (est > nnz_cap) {
    std::ostringstream os;
    os << "Carleman matrix needs ~" << est << " nonzeros, cap is " << nnz_cap;
    throw ResourceError(os.str());
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(est));
  for (int i = 1; i <= k; ++i) {
    for (int j = 1; j <= static_cast<int>(F.size()); ++j) {
      if (i + j - 1 > k) continue;
      append_transfer_triplets(F[static_cast<std::size_t>(j) - 1], i, base, layout.offset(i), layout.offset(i + j - 1),
                               trips);
    }
    if (S != nullptr) {
      const SparseMatrix negS = -(*S);
      append_transfer_triplets(negS, i, base, layout.offset(i), layout.offset(i), trips);
    }
  }
  SparseMatrix M(static_cast<Eigen::Index>(layout.dim()), static_cast<Eigen::Index>(layout.dim()));
  M.setFromTriplets(trips.begin(), trips.end());
  M.prune(0.0);
  return M;
}

}  // namespace detail

/// Single-point C^(k): blocks (i, i+j-1) = A^i_{i+j-1}(F^(j)).
inline CarlemanSystem build_single_point(const CollisionOperators& ops, int k) {
  if (k < 2) throw UsageError("build_single_point: degree must be >= 2");
  std::vector<SparseMatrix> F{SparseMatrix(ops.F1.sparseView()), SparseMatrix(ops.F2.sparseView()),
                              SparseMatrix(ops.F3.sparseView())};
  CarlemanSystem sys;
  sys.k = k;
  sys.n = 1;
  sys.layout = BlockLayout(k, ops.Q());
  sys.matrix = detail::assemble_carleman(F, nullptr, k, ops.Q(), kDefaultNnzCap);
  sys.kn_tau = ops.relax.kn_tau;
  sys.lattice = ops.lattice.name;
  return sys;
}

/// Number of grid points for n points per axis.
inline std::int64_t grid_points(const Lattice& lat, std::int64_t n_per_axis) { return ipow(n_per_axis, lat.D); }

/// Finite-difference matrix of e_m . grad on a periodic grid with spacing dx.
/// Rows and columns are ordered grid-major, velocity-minor; the first axis
/// varies slowest over grid points.
inline SparseMatrix build_streaming(const Lattice& lat, std::int64_t n, StreamScheme scheme = StreamScheme::Central2,
                                    double dx = 1.0) {
  const std::int64_t min_n = scheme == StreamScheme::Central2 ? 3 : 2;
  if (n < min_n) {
    std::ostringstream os;
    os << "build_streaming: n=" << n << " too small for " << to_string(scheme) << " stencil (need >= " << min_n << ")";
    throw ConfigError(os.str());
  }
  const std::int64_t points = grid_points(lat, n);
  const std::int64_t Q = lat.Q;
  std::vector<std::int64_t> stride(static_cast<std::size_t>(lat.D));
  for (int ax = 0; ax < lat.D; ++ax) stride[static_cast<std::size_t>(ax)] = ipow(n, lat.D - 1 - ax);

  auto shifted = [&](std::int64_t p, int axis, std::int64_t delta) {
    const std::int64_t s = stride[static_cast<std::size_t>(axis)];
    const std::int64_t coord = (p / s) % n;
    const std::int64_t moved = ((coord + delta) % n + n) % n;
    return p + (moved - coord) * s;
  };

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(points * Q * lat.D * 2));
  for (std::int64_t p = 0; p < points; ++p) {
    for (std::int64_t m = 0; m < Q; ++m) {
      const auto row = static_cast<int>(p * Q + m);
      for (int ax = 0; ax < lat.D; ++ax) {
        const double em = lat.e(ax, static_cast<Eigen::Index>(m));
        if (em == 0.0) continue;
        if (scheme == StreamScheme::Central2) {
          trips.emplace_back(row, static_cast<int>(shifted(p, ax, +1) * Q + m), em / (2.0 * dx));
          trips.emplace_back(row, static_cast<int>(shifted(p, ax, -1) * Q + m), -em / (2.0 * dx));
        } else if (em > 0.0) {
          trips.emplace_back(row, row, em / dx);
          trips.emplace_back(row, static_cast<int>(shifted(p, ax, -1) * Q + m), -em / dx);
        } else {
          trips.emplace_back(row, static_cast<int>(shifted(p, ax, +1) * Q + m), em / dx);
          trips.emplace_back(row, row, -em / dx);
        }
      }
    }
  }
  SparseMatrix S(static_cast<Eigen::Index>(points * Q), static_cast<Eigen::Index>(points * Q));
  S.setFromTriplets(trips.begin(), trips.end());
  S.prune(0.0);
  return S;
}

/// n-point F^(j): the single-point F^(j) repeated at every grid point, acting
/// only on monomials whose factors all sit at the same point.
inline SparseMatrix npoint_collision_operator(const Eigen::MatrixXd& Fj, int j, std::int64_t points) {
  const std::int64_t Q = Fj.rows();
  const std::int64_t N = points * Q;
  std::vector<Triplet> trips;
  for (std::int64_t p = 0; p < points; ++p) {
    for (Eigen::Index r = 0; r < Fj.rows(); ++r) {
      for (Eigen::Index c = 0; c < Fj.cols(); ++c) {
        const double v = Fj(r, c);
        if (v == 0.0) continue;
        // decompose c into j base-Q digits (most significant first)
        std::int64_t col = 0;
        std::int64_t rem = c;
        std::int64_t place = ipow(Q, j - 1);
        for (int t = 0; t < j; ++t) {
          const std::int64_t digit = rem / place;
          rem %= place;
          place = place > 1 ? place / Q : 1;
          col = col * N + p * Q + digit;
        }
        trips.emplace_back(static_cast<int>(p * Q + r), static_cast<int>(col), v);
      }
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(ipow(N, j)));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// n-point truncated Carleman matrix C = C_s + C_c. `S` is the streaming
/// matrix over nQ (pass an empty/zero matrix for collision only).
inline CarlemanSystem build_npoint(const CollisionOperators& ops, const SparseMatrix& S, int k, std::int64_t points,
                                   std::int64_t nnz_cap = kDefaultNnzCap) {
  if (k < 1) throw UsageError("build_npoint: degree must be >= 1");
  const std::int64_t N = points * ops.Q();
  if (S.rows() != N || S.cols() != N) throw UsageError("build_npoint: streaming matrix has wrong dimension");
  std::vector<SparseMatrix> F{npoint_collision_operator(ops.F1, 1, points), npoint_collision_operator(ops.F2, 2, points),
                              npoint_collision_operator(ops.F3, 3, points)};
  CarlemanSystem sys;
  sys.k = k;
  sys.n = points;
  sys.layout = BlockLayout(k, N);
  sys.has_streaming = S.nonZeros() > 0;
  sys.matrix = detail::assemble_carleman(F, sys.has_streaming ? &S : nullptr, k, N, nnz_cap);
  sys.kn_tau = ops.relax.kn_tau;
  sys.lattice = ops.lattice.name;
  return sys;
}

/// Largest number of stored entries in any row.
inline std::int64_t max_row_nonzeros(const SparseMatrix& M) {
  std::int64_t best = 0;
  for (Eigen::Index r = 0; r < M.outerSize(); ++r) {
    best = std::max<std::int64_t>(best, M.outerIndexPtr()[r + 1] - M.outerIndexPtr()[r]);
  }
  return best;
}

inline std::int64_t max_col_nonzeros(const SparseMatrix& M) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(M.cols()), 0);
  for (Eigen::Index r = 0; r < M.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(M, r); it; ++it) ++counts[static_cast<std::size_t>(it.col())];
  }
  std::int64_t best = 0;
  for (auto c : counts) best = std::max(best, c);
  return best;
}

// ---------------------------------------------------------------------------
// Time integration

/// Classical RK4 step for y' = rhs(y).
template <typename Rhs>
Eigen::VectorXd rk4_step(const Rhs& rhs, const Eigen::VectorXd& y, double dt) {
  const Eigen::VectorXd k1 = rhs(y);
  const Eigen::VectorXd k2 = rhs(y + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = rhs(y + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = rhs(y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void check_finite(const Eigen::VectorXd& y, double t) {
  if (!y.allFinite()) {
    std::ostringstream os;
    os << "integration became non-finite at t=" << t << " (unstable system or step)";
    throw NumericalError(os.str());
  }
}

/// Number of RK4 steps covering duration T at step dt.
inline std::int64_t step_count(double T, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (T < 0.0) throw ConfigError("duration must be non-negative");
  return static_cast<std::int64_t>(std::llround(T / dt));
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;

  [[nodiscard]] bool empty() const { return states.empty(); }
  [[nodiscard]] const Eigen::VectorXd& back() const { return states.back(); }
};

/// Integrates y' = rhs(y) with RK4 and records every `sample_every`-th state
/// (the initial and final states are always recorded).
template <typename Rhs>
Trajectory integrate_rk4(const Rhs& rhs, const Eigen::VectorXd& y0, double T, double dt, std::int64_t sample_every = 1) {
  const std::int64_t steps = step_count(T, dt);
  if (sample_every < 1) sample_every = 1;
  Trajectory traj;
  Eigen::VectorXd y = y0;
  traj.times.push_back(0.0);
  traj.states.push_back(y);
  for (std::int64_t s = 1; s <= steps; ++s) {
    y = rk4_step(rhs, y, dt);
    const double t = static_cast<double>(s) * dt;
    check_finite(y, t);
    if (s % sample_every == 0 || s == steps) {
      traj.times.push_back(t);
      traj.states.push_back(y);
    }
  }
  return traj;
}

/// Integrates dV/dt = C V with RK4. dt must not exceed kn_tau/10.
inline Trajectory integrate(const CarlemanSystem& sys, const CarlemanVector& V0, double T, double dt,
                            std::int64_t sample_every = 1) {
  if (V0.data.size() != sys.dim()) throw UsageError("integrate: initial vector dimension mismatch");
  if (dt > sys.kn_tau / 10.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "integrate: dt=" << dt << " exceeds stability guard kn_tau/10=" << sys.kn_tau / 10.0;
    throw ConfigError(os.str());
  }
  const SparseMatrix& C = sys.matrix;
  auto rhs = [&C](const Eigen::VectorXd& v) -> Eigen::VectorXd { return C * v; };
  return integrate_rk4(rhs, V0.data, T, dt, sample_every);
}

/// Nonlinear n-point LBM right-hand side -S phi + BGK(phi) evaluated point by
/// point, with exact 1/rho or its 2 - rho Taylor form.
inline Eigen::VectorXd nonlinear_npoint_rhs(const Lattice& lat, const RelaxParams& rp, const SparseMatrix& S,
                                            const Eigen::VectorXd& phi, bool taylor = false) {
  const Eigen::Index Q = lat.Q;
  const Eigen::Index points = phi.size() / Q;
  Eigen::VectorXd out(phi.size());
  for (Eigen::Index p = 0; p < points; ++p) {
    const Eigen::VectorXd f = phi.segment(p * Q, Q);
    out.segment(p * Q, Q) = taylor ? bgk_rhs_taylor(lat, rp, f) : bgk_rhs(lat, rp, f);
  }
  if (S.nonZeros() > 0) out -= S * phi;
  return out;
}

}  // namespace clbm

#endif  // CLBM_CARLEMAN_HPP_
