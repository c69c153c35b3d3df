#ifndef CLBM_SPECTRAL_HPP_
#define CLBM_SPECTRAL_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clbm/carleman.hpp"
#include "clbm/collision.hpp"
#include "clbm/errors.hpp"
#include "clbm/kron.hpp"

namespace clbm {

using cd = std::complex<double>;
using CSparseMatrix = Eigen::SparseMatrix<cd, Eigen::RowMajor>;

/// Seed of every power iteration start vector.
inline constexpr std::uint64_t kPowerSeed = 20240607;

// ---------------------------------------------------------------------------
// Basic quantities

/// sqrt(||M||_1 ||M||_inf), an upper bound on ||M||_2.
template <typename Derived>
double norm2_bound(const Eigen::MatrixBase<Derived>& M) {
  if (M.size() == 0) return 0.0;
  const double one = M.cwiseAbs().colwise().sum().maxCoeff();
  const double inf = M.cwiseAbs().rowwise().sum().maxCoeff();
  return std::sqrt(one * inf);
}

inline double norm2_bound(const SparseMatrix& M) {
  Eigen::VectorXd col = Eigen::VectorXd::Zero(M.cols());
  double inf = 0.0;
  for (Eigen::Index r = 0; r < M.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(M, r); it; ++it) {
      row += std::abs(it.value());
      col(it.col()) += std::abs(it.value());
    }
    inf = std::max(inf, row);
  }
  return std::sqrt((col.size() ? col.maxCoeff() : 0.0) * inf);
}

/// Largest singular value, as sqrt(lambda_max(M^H M)).
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& M) {
  if (M.size() == 0) return 0.0;
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Mat G = M.rows() >= M.cols() ? Mat(M.adjoint() * M) : Mat(M * M.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_norm: eigensolver failed");
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// mu(M) = largest eigenvalue of the Hermitian part.
inline double log_norm(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw UsageError("log_norm: matrix must be square");
  const Eigen::MatrixXd H = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("log_norm: symmetric eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

inline Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw UsageError("eigenvalues: matrix must be square");
  if (!M.allFinite()) throw NumericalError("eigenvalues: matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalues: QR iteration did not converge");
  return es.eigenvalues();
}

/// alpha(M) = largest real part of the spectrum.
inline double spectral_abscissa(const Eigen::MatrixXd& M) { return eigenvalues(M).real().maxCoeff(); }

/// ||exp(M t)||_2.
inline double expm_norm(const Eigen::MatrixXd& M, double t) {
  const Eigen::MatrixXd E = (M * t).exp();
  return spectral_norm(E);
}

// ---------------------------------------------------------------------------
// Eigendecomposition with orthonormal bases inside each eigenspace

struct EigenOptions {
  std::int64_t max_dim = 5000;
  /// Eigenvalues closer than cluster_tol * max(1, max|lambda|) form one eigenspace.
  double cluster_tol = 1e-6;
  /// Largest admissible ||(M - lambda I) B|| / ||M - lambda I|| for an eigenspace basis B.
  double null_tol = 1e-8;
};

struct EigenDecomposition {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd J;
  Eigen::MatrixXcd J_inv;
  std::vector<int> cluster_sizes;
  double residual = 0.0;  // ||M J - J D|| / ||M||
};

namespace detail {

/// Groups indices of `vals` into clusters of nearly equal values, in order of
/// decreasing real part (ties: increasing imaginary part).
inline std::vector<std::vector<Eigen::Index>> cluster_values(const Eigen::VectorXcd& vals, double tol) {
  const Eigen::Index n = vals.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (vals(a).real() != vals(b).real()) return vals(a).real() > vals(b).real();
    return vals(a).imag() < vals(b).imag();
  });
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<Eigen::Index>> clusters;
  for (auto i : order) {
    if (used[static_cast<std::size_t>(i)]) continue;
    std::vector<Eigen::Index> cl{i};
    used[static_cast<std::size_t>(i)] = 1;
    // grow transitively so chains of close values end up together
    for (std::size_t p = 0; p < cl.size(); ++p) {
      for (auto j : order) {
        if (!used[static_cast<std::size_t>(j)] && std::abs(vals(j) - vals(cl[p])) <= tol) {
          used[static_cast<std::size_t>(j)] = 1;
          cl.push_back(j);
        }
      }
    }
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

}  // namespace detail

/// Eigendecomposition M = J D J^{-1}. Each eigenspace gets an orthonormal
/// basis of null(M - lambda I) from a pivoted QR of (M - lambda I)^H, so J is orthonormal inside every eigenspace and kappa(J) does not
/// depend on an arbitrary basis choice. Throws NumericalError if an
/// eigenspace is deficient (M not diagonalizable at working precision).
inline EigenDecomposition eigendecompose(const Eigen::MatrixXd& M, const EigenOptions& opt = {}) {
  if (M.rows() != M.cols()) throw UsageError("eigendecompose: matrix must be square");
  if (M.rows() > opt.max_dim) {
    std::ostringstream os;
    os << "eigendecompose: dimension " << M.rows() << " exceeds dense cap " << opt.max_dim;
    throw ResourceError(os.str());
  }
  const Eigen::Index n = M.rows();
  const Eigen::VectorXcd raw = eigenvalues(M);
  const double scale = std::max(1.0, raw.cwiseAbs().maxCoeff());
  const auto clusters = detail::cluster_values(raw, opt.cluster_tol * scale);

  EigenDecomposition out;
  out.values.resize(n);
  out.J.resize(n, n);
  Eigen::Index col = 0;
  for (const auto& cl : clusters) {
    const auto m = static_cast<Eigen::Index>(cl.size());
    cd center(0.0, 0.0);
    for (auto i : cl) center += raw(i);
    center /= static_cast<double>(m);
    if (std::abs(center.imag()) <= opt.cluster_tol * scale) center = cd(center.real(), 0.0);
    Eigen::MatrixXcd A = M.cast<cd>();
    A.diagonal().array() -= center;
    // null(A) is the orthogonal complement of range(A^H)
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A.adjoint());
    const Eigen::MatrixXcd Qfull = qr.householderQ();
    const Eigen::MatrixXcd basis = Qfull.rightCols(m);
    const double ratio = (A * basis).norm() / std::max(1e-300, A.norm());
    if (ratio > opt.null_tol) {
      std::ostringstream os;
      os << "eigendecompose: eigenvalue " << center << " has algebraic multiplicity " << m
         << " but a deficient eigenspace (residual " << ratio << "); matrix is not diagonalizable";
      throw NumericalError(os.str());
    }
    for (Eigen::Index c = 0; c < m; ++c) {
      out.values(col + c) = center;
    }
    out.J.middleCols(col, m) = basis;
    out.cluster_sizes.push_back(static_cast<int>(m));
    col += m;
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(out.J);
  out.J_inv = lu.inverse();
  const Eigen::MatrixXcd Mc = M.cast<cd>();
  const double mnorm = std::max(spectral_norm(M), 1e-300);
  out.residual = (Mc * out.J - out.J * out.values.asDiagonal()).norm() / mnorm;
  const double inv_res = (out.J_inv * out.J - Eigen::MatrixXcd::Identity(n, n)).norm();
  if (!std::isfinite(inv_res) || inv_res > 1e-6) {
    std::ostringstream os;
    os << "eigendecompose: eigenvector matrix is numerically singular (||J^-1 J - I|| = " << inv_res << ")";
    throw NumericalError(os.str());
  }
  return out;
}

/// ||J||_2 ||J^-1||_2.
inline double condition_number(const Eigen::MatrixXcd& J, const Eigen::MatrixXcd& J_inv) {
  return spectral_norm(J) * spectral_norm(J_inv);
}

inline double condition_number(const EigenDecomposition& dec) { return condition_number(dec.J, dec.J_inv); }

/// sqrt(||J||_1 ||J||_inf) * sqrt(||J^-1||_1 ||J^-1||_inf), an upper bound on kappa_J.
inline double condition_number_bound(const EigenDecomposition& dec) {
  return norm2_bound(dec.J) * norm2_bound(dec.J_inv);
}

// ---------------------------------------------------------------------------
// Reports

struct SpectralReport {
  std::vector<cd> eigenvalues;
  double kappa_J = 0.0;
  double kappa_J_bound = 0.0;
  double norm2_bound = 0.0;
  double log_norm = 0.0;
  double spectral_abscissa = 0.0;
  bool stable = false;
  double max_imag = 0.0;
  double residual = 0.0;
  std::vector<int> cluster_sizes;

  [[nodiscard]] nlohmann::json to_json(bool include_eigenvalues = true) const {
    nlohmann::json j;
    j["kappa_J"] = kappa_J;
    j["kappa_J_bound"] = kappa_J_bound;
    j["norm2_bound"] = norm2_bound;
    j["log_norm"] = log_norm;
    j["spectral_abscissa"] = spectral_abscissa;
    j["stable"] = stable;
    j["max_imag"] = max_imag;
    j["residual"] = residual;
    j["cluster_sizes"] = cluster_sizes;
    if (include_eigenvalues) {
      nlohmann::json ev = nlohmann::json::array();
      for (const auto& v : eigenvalues) ev.push_back({v.real(), v.imag()});
      j["eigenvalues"] = ev;
    }
    return j;
  }
};

/// Full dense report. `raw_eigenvalues` are the unrefined QR eigenvalues;
/// the eigenvector part uses `eigendecompose`.
inline SpectralReport spectral_report(const Eigen::MatrixXd& M, double stable_tol = 1e-10,
                                      const EigenOptions& opt = {}) {
  SpectralReport rep;
  const Eigen::VectorXcd raw = eigenvalues(M);
  rep.eigenvalues.assign(raw.data(), raw.data() + raw.size());
  rep.spectral_abscissa = raw.real().maxCoeff();
  rep.max_imag = raw.imag().cwiseAbs().maxCoeff();
  rep.stable = rep.spectral_abscissa <= stable_tol;
  rep.log_norm = log_norm(M);
  rep.norm2_bound = norm2_bound(M);
  const EigenDecomposition dec = eigendecompose(M, opt);
  rep.kappa_J = condition_number(dec);
  rep.kappa_J_bound = condition_number_bound(dec);
  rep.residual = dec.residual;
  rep.cluster_sizes = dec.cluster_sizes;
  return rep;
}

struct HistogramBin {
  double center;
  std::int64_t count;
};

/// Histogram of Re(lambda) * scale over [lo, hi) with `bins` equal bins.
inline std::vector<HistogramBin> eigenvalue_histogram(const std::vector<cd>& values, double scale, double lo,
                                                      double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw UsageError("eigenvalue_histogram: need bins >= 1 and hi > lo");
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) out[static_cast<std::size_t>(b)] = {lo + (b + 0.5) * width, 0};
  for (const auto& v : values) {
    const double x = v.real() * scale;
    auto b = static_cast<std::int64_t>(std::floor((x - lo) / width));
    if (b < 0 || b >= bins) continue;
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stability

struct StabilityVerdict {
  bool stable = false;
  double abscissa_linear = 0.0;  // alpha(F1 - S)
  double abscissa_full = 0.0;    // max_i alpha(A^i_i) = max_i i * alpha(F1 - S)
  double log_norm_linear = 0.0;
};

/// Verdict from the degree-1 diagonal block F1 - S. The degree-i diagonal
/// blocks are Kronecker sums of it, so their spectra are i-fold sums of its
/// eigenvalues.
inline StabilityVerdict stability_check(const CarlemanSystem& sys, double tol = 1e-10, std::int64_t max_dim = 5000) {
  if (sys.base_dim() > max_dim) {
    std::ostringstream os;
    os << "stability_check: degree-1 block dimension " << sys.base_dim() << " exceeds dense cap " << max_dim;
    throw ResourceError(os.str());
  }
  const Eigen::MatrixXd L = Eigen::MatrixXd(sys.block(1, 1));
  StabilityVerdict v;
  v.abscissa_linear = spectral_abscissa(L);
  v.abscissa_full = v.abscissa_linear;
  for (int i = 2; i <= sys.k; ++i) v.abscissa_full = std::max(v.abscissa_full, i * v.abscissa_linear);
  v.log_norm_linear = log_norm(L);
  v.stable = v.abscissa_linear <= tol;
  return v;
}

// ---------------------------------------------------------------------------
// Power iteration

struct PowerResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value of an implicit operator from products with A and
/// A^H, by power iteration on A^H A from a fixed-seed start vector.
template <typename Apply, typename ApplyAdj>
PowerResult power_singular_value(const Apply& apply, const ApplyAdj& apply_adj, Eigen::Index cols, double tol = 1e-10,
                                 int max_iter = 20000) {
  std::mt19937_64 rng(kPowerSeed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXcd x(cols);
  for (Eigen::Index i = 0; i < cols; ++i) x(i) = cd(nd(rng), nd(rng));
  x.normalize();
  PowerResult res;
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXcd y = apply(x);
    const double sigma = y.norm();
    Eigen::VectorXcd z = apply_adj(y);
    const double zn = z.norm();
    if (!(zn > 0.0) || !std::isfinite(zn)) throw NumericalError("power iteration collapsed");
    x = z / zn;
    res.value = sigma;
    res.iterations = it;
    if (it > 1 && std::abs(sigma - prev) <= tol * sigma) {
      res.converged = true;
      break;
    }
    prev = sigma;
  }
  return res;
}

inline double largest_singular_value(const SparseMatrix& A, double tol = 1e-12, int max_iter = 20000) {
  if (A.rows() * A.cols() <= 4'000'000) return spectral_norm(Eigen::MatrixXd(A));
  const Eigen::SparseMatrix<double, Eigen::RowMajor> At = A.transpose();
  auto ap = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return (A * x.real()).cast<cd>() + cd(0, 1) * (A * x.imag()).cast<cd>();
  };
  auto ad = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return (At * x.real()).cast<cd>() + cd(0, 1) * (At * x.imag()).cast<cd>();
  };
  return power_singular_value(ap, ad, A.cols(), tol, max_iter).value;
}

// ---------------------------------------------------------------------------
// Quadratic reduction of the cubic system

struct QuadraticReduction {
  Eigen::VectorXd F0_hat;  // Q + Q^2
  Eigen::MatrixXd F1_hat;  // (Q + Q^2) x (Q + Q^2)
  SparseMatrix F2_hat;     // (Q + Q^2) x (Q + Q^2)^2
  double mu_F1 = 0.0;
  double mu_F0 = 0.0;
  double sigma_max_F2 = 0.0;
  int Q = 0;

  /// rho = mu(F1_hat) + mu(F0_hat) + sigma_max(F2_hat).
  [[nodiscard]] double varrho() const { return mu_F1 + mu_F0 + sigma_max_F2; }
};

/// Rewrites df/dt = F1 f + F2 f^2 + F3 f^3 as a quadratic system in
/// fhat = (f, f^[2]): dfhat/dt = F1_hat fhat + F2_hat fhat^[2].
inline QuadraticReduction reduce_quadratic(const CollisionOperators& ops) {
  const std::int64_t Q = ops.Q();
  const std::int64_t Q2 = Q * Q;
  const std::int64_t Q3 = Q2 * Q;
  const std::int64_t M = Q + Q2;
  const SparseMatrix F1 = ops.F1.sparseView();
  const SparseMatrix F2 = ops.F2.sparseView();
  const SparseMatrix F3 = ops.F3.sparseView();

  QuadraticReduction red;
  red.Q = static_cast<int>(Q);
  red.F0_hat = Eigen::VectorXd::Zero(M);
  red.F1_hat = Eigen::MatrixXd::Zero(M, M);
  red.F1_hat.topLeftCorner(Q, Q) = ops.F1;
  red.F1_hat.block(0, Q, Q, Q2) = ops.F2;
  red.F1_hat.bottomRightCorner(Q2, Q2) = Eigen::MatrixXd(transfer_matrix(F1, 2, Q));

  // Columns of fhat^[2] = fhat (x) fhat, in four groups by factor block:
  // (f,f) Q^2 | (f,f2) Q^3 | (f2,f) Q^3 | (f2,f2) Q^4. Group (a,b) of column
  // index (x, y) sits at x * M + y with x, y local to fhat.
  std::vector<Triplet> trips;
  auto place = [&](const SparseMatrix& A, std::int64_t row0, int first_block_deg) {
    // A acts on f2 (x) f (cols Q3) or f2 (x) f2 (cols Q4); first factor is f2
    (void)first_block_deg;
    const std::int64_t right = A.cols() / Q2;  // Q for f2(x)f, Q2 for f2(x)f2
    const std::int64_t y0 = right == Q ? 0 : Q;
    for (Eigen::Index r = 0; r < A.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
        const std::int64_t x = Q + it.col() / right;
        const std::int64_t y = y0 + it.col() % right;
        trips.emplace_back(static_cast<int>(row0 + it.row()), static_cast<int>(x * M + y), it.value());
      }
    }
  };
  place(F3, 0, 2);                              // A^1_3 on f2 (x) f
  place(transfer_matrix(F2, 2, Q), Q, 2);       // A^2_3 on f2 (x) f
  place(transfer_matrix(F3, 2, Q), Q, 2);       // A^2_4 on f2 (x) f2
  (void)Q3;
  red.F2_hat.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M * M));
  red.F2_hat.setFromTriplets(trips.begin(), trips.end());

  red.mu_F1 = log_norm(red.F1_hat);
  red.mu_F0 = red.F0_hat.norm();
  red.sigma_max_F2 = largest_singular_value(red.F2_hat);
  return red;
}

/// F1_hat fhat + F2_hat fhat^[2] with fhat = (f, f^[2]).
inline Eigen::VectorXd quadratic_rhs(const QuadraticReduction& red, const Eigen::Ref<const Eigen::VectorXd>& f) {
  Eigen::VectorXd fhat(red.F1_hat.rows());
  fhat << f, kron_power(f, 2);
  return red.F0_hat + red.F1_hat * fhat + red.F2_hat * kron_power(fhat, 2);
}

struct ExpmBound {
  double bound = 1.0;     // exp(varrho k t)
  double varrho = 0.0;
  double measured = 1.0;  // sup_{s<=t} ||exp(C s)||, when a matrix was given
};

/// exp((mu(F1_hat) + mu(F0_hat) + sigma_max(F2_hat)) k t).
inline ExpmBound expm_norm_bound(const QuadraticReduction& red, int k, double t) {
  if (t < 0.0) throw UsageError("expm_norm_bound: t must be non-negative");
  ExpmBound b;
  b.varrho = red.varrho();
  b.bound = std::exp(b.varrho * k * t);
  return b;
}

/// Same bound plus sup over `samples` equally spaced s in [0, t] of
/// ||exp(C s)||_2 for a dense C.
inline ExpmBound expm_norm_bound(const QuadraticReduction& red, int k, double t, const Eigen::MatrixXd& C,
                                 int samples = 50) {
  ExpmBound b = expm_norm_bound(red, k, t);
  b.measured = 1.0;
  for (int s = 1; s <= samples; ++s) {
    b.measured = std::max(b.measured, expm_norm(C, t * s / samples));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Structured eigenvector condition number of degree-3 Carleman matrices

namespace detail {

/// Applies A (x) A (x) ... (x) A (p factors, A square N x N) to z in place.
inline void apply_kron_power(const Eigen::MatrixXcd& A, int p, Eigen::VectorXcd& z) {
  const Eigen::Index N = A.rows();
  using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int mode = 0; mode < p; ++mode) {
    const Eigen::Index left = ipow(N, mode);
    const Eigen::Index right = ipow(N, p - 1 - mode);
    for (Eigen::Index l = 0; l < left; ++l) {
      Eigen::Map<RowMat> blk(z.data() + l * N * right, N, right);
      blk = (A * blk).eval();
    }
  }
}

/// F (x-applied) V^{(x)j}: rows of F (N x N^j, sparse) contracted with V in
/// every factor, i.e. F (V (x) ... (x) V).
inline Eigen::MatrixXcd contract_rows(const SparseMatrix& F, const Eigen::MatrixXcd& V, int j) {
  const Eigen::Index N = V.rows();
  const Eigen::MatrixXcd Vt = V.transpose();
  Eigen::MatrixXcd out(F.rows(), F.cols());
  for (Eigen::Index r = 0; r < F.outerSize(); ++r) {
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(F.cols());
    for (SparseMatrix::InnerIterator it(F, r); it; ++it) x(it.col()) = it.value();
    apply_kron_power(Vt, j, x);
    out.row(r) = x.transpose();
  }
  (void)N;
  return out;
}

}  // namespace detail

struct StructuredKappaOptions {
  double degenerate_tol = 1e-9;  // relative to max|lambda|
  double power_tol = 1e-10;
  int max_iter = 20000;
  std::int64_t max_entries = 60'000'000;
};

struct StructuredKappa {
  double kappa = 0.0;
  double norm_J = 0.0;
  double norm_J_inv = 0.0;
  /// Largest coupling left at an exactly degenerate eigenvalue pair; nonzero
  /// means the matrix is defective there.
  double defect = 0.0;
  /// Smallest nonzero eigenvalue gap that was inverted.
  double min_gap = 0.0;
  double eig_residual = 0.0;
  int iterations_J = 0;
  int iterations_J_inv = 0;
  bool converged = false;
};

/// Eigenvector condition number of a degree-3 Carleman matrix with diagonal
/// blocks the Kronecker sums of L and off-diagonal blocks built from F2, F3
/// (L, F2, F3 over the same base of size N). The eigenvectors are assembled
/// from the eigenbasis V of L: J = blockdiag(V, V(x)V, V(x)V(x)V) Jhat with
/// Jhat unit block upper triangular. Columns of J are scaled to unit 2-norm.
inline StructuredKappa structured_kappa(const Eigen::MatrixXd& L, const SparseMatrix& F2, const SparseMatrix& F3,
                                        const StructuredKappaOptions& opt = {}) {
  const Eigen::Index N = L.rows();
  const Eigen::Index N2 = N * N;
  const Eigen::Index N3 = N2 * N;
  if (F2.rows() != N || F2.cols() != N2 || F3.rows() != N || F3.cols() != N3) {
    throw UsageError("structured_kappa: operator dimensions do not match L");
  }
  if (N3 * N2 > opt.max_entries * 16) throw ResourceError("structured_kappa: system too large");

  // eigenbasis of L, orthonormal inside each eigenspace
  Eigen::EigenSolver<Eigen::MatrixXd> es(L);
  if (es.info() != Eigen::Success) throw NumericalError("structured_kappa: eigensolver failed");
  const Eigen::VectorXcd raw = es.eigenvalues();
  const Eigen::MatrixXcd rawV = es.eigenvectors();
  const double scale = std::max(1.0, raw.cwiseAbs().maxCoeff());
  const double gap_tol = opt.degenerate_tol * scale;
  const auto clusters = detail::cluster_values(raw, 1e-8 * scale);
  Eigen::VectorXcd lam(N);
  Eigen::MatrixXcd V(N, N);
  Eigen::Index col = 0;
  for (const auto& cl : clusters) {
    const auto m = static_cast<Eigen::Index>(cl.size());
    Eigen::MatrixXcd B(N, m);
    cd center(0.0, 0.0);
    for (Eigen::Index c = 0; c < m; ++c) {
      B.col(c) = rawV.col(cl[static_cast<std::size_t>(c)]);
      center += raw(cl[static_cast<std::size_t>(c)]);
    }
    center /= static_cast<double>(m);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(B);
    V.middleCols(col, m) = qr.householderQ() * Eigen::MatrixXcd::Identity(N, m);
    lam.segment(col, m).setConstant(center);
    col += m;
  }
  StructuredKappa res;
  res.eig_residual = (L.cast<cd>() * V - V * lam.asDiagonal()).norm() / std::max(1e-300, L.norm());
  const Eigen::MatrixXcd Vinv = V.partialPivLu().inverse();

  // coefficients in the eigenbasis
  const Eigen::MatrixXcd G2 = Vinv * detail::contract_rows(F2, V, 2);
  const Eigen::MatrixXcd G3 = Vinv * detail::contract_rows(F3, V, 3);

  double defect = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  auto solve = [&](cd num, cd den) -> cd {
    if (std::abs(den) <= gap_tol) {
      defect = std::max(defect, std::abs(num));
      return cd(0.0, 0.0);
    }
    min_gap = std::min(min_gap, std::abs(den));
    return -num / den;
  };

  // Y12 = -G2 o R12
  Eigen::MatrixXcd Y12(N, N2);
  for (Eigen::Index a = 0; a < N; ++a) {
    for (Eigen::Index c = 0; c < N; ++c) {
      for (Eigen::Index d = 0; d < N; ++d) {
        Y12(a, c * N + d) = solve(G2(a, c * N + d), lam(a) - lam(c) - lam(d));
      }
    }
  }

  // Y23 = -Ahat23 o R23 with Ahat23 = G2 (x) I + I (x) G2
  std::vector<Eigen::Triplet<cd>> trips;
  trips.reserve(static_cast<std::size_t>(2 * N2 * N2));
  for (Eigen::Index a = 0; a < N; ++a) {
    for (Eigen::Index b = 0; b < N; ++b) {
      const Eigen::Index row = a * N + b;
      for (Eigen::Index cd_ = 0; cd_ < N2; ++cd_) {
        // G2[a,(c,d)] delta(b,e): column (c,d,b)
        if (G2(a, cd_) != cd(0.0, 0.0)) trips.emplace_back(row, cd_ * N + b, G2(a, cd_));
        // delta(a,c) G2[b,(d,e)]: column (a,d,e)
        if (G2(b, cd_) != cd(0.0, 0.0)) trips.emplace_back(row, a * N2 + cd_, G2(b, cd_));
      }
    }
  }
  CSparseMatrix Y23(N2, N3);
  Y23.setFromTriplets(trips.begin(), trips.end());
  trips.clear();
  trips.shrink_to_fit();
  for (Eigen::Index r = 0; r < Y23.outerSize(); ++r) {
    const cd lr = lam(r / N) + lam(r % N);
    for (CSparseMatrix::InnerIterator it(Y23, r); it; ++it) {
      const Eigen::Index c = it.col();
      const cd lc = lam(c / N2) + lam((c / N) % N) + lam(c % N);
      it.valueRef() = solve(it.value(), lr - lc);
    }
  }

  // Y13 = -(G2 Y23 + G3) o R13
  Eigen::MatrixXcd Y13 = G2 * Y23;
  Y13 += G3;
  for (Eigen::Index a = 0; a < N; ++a) {
    for (Eigen::Index c = 0; c < N3; ++c) {
      const cd lc = lam(c / N2) + lam((c / N) % N) + lam(c % N);
      Y13(a, c) = solve(Y13(a, c), lam(a) - lc);
    }
  }
  res.defect = defect;
  res.min_gap = std::isfinite(min_gap) ? min_gap : 0.0;

  // unit column scaling of J = T Jhat
  const Eigen::VectorXd vn = V.colwise().norm();
  Eigen::VectorXd cn(N + N2 + N3);
  cn.head(N) = vn;
  {
    const Eigen::MatrixXcd VY12 = V * Y12;
    for (Eigen::Index c = 0; c < N2; ++c) {
      const double t = vn(c / N) * vn(c % N);
      cn(N + c) = std::sqrt(VY12.col(c).squaredNorm() + t * t);
    }
    const Eigen::MatrixXcd VY13 = V * Y13;
    const Eigen::MatrixXcd VV = Eigen::kroneckerProduct(V, V).eval();
    Eigen::VectorXd mid(N3);
    // (V (x) V) Y23, column chunks to bound memory
    const Eigen::SparseMatrix<cd> Y23c = Y23;
    const Eigen::Index chunk = 1024;
    for (Eigen::Index c0 = 0; c0 < N3; c0 += chunk) {
      const Eigen::Index w = std::min(chunk, N3 - c0);
      const Eigen::MatrixXcd P = VV * Y23c.middleCols(c0, w);
      mid.segment(c0, w) = P.colwise().squaredNorm().transpose();
    }
    for (Eigen::Index c = 0; c < N3; ++c) {
      const double t = vn(c / N2) * vn((c / N) % N) * vn(c % N);
      cn(N + N2 + c) = std::sqrt(VY13.col(c).squaredNorm() + mid(c) + t * t);
    }
  }

  const Eigen::MatrixXcd Vh = V.adjoint();
  const Eigen::MatrixXcd Vinvh = Vinv.adjoint();
  const Eigen::Index dim = N + N2 + N3;
  auto T_apply = [&](const Eigen::MatrixXcd& A, Eigen::VectorXcd& z) {
    Eigen::VectorXcd b1 = z.head(N), b2 = z.segment(N, N2), b3 = z.tail(N3);
    detail::apply_kron_power(A, 1, b1);
    detail::apply_kron_power(A, 2, b2);
    detail::apply_kron_power(A, 3, b3);
    z << b1, b2, b3;
  };
  // J x = T Jhat (x ./ cn)
  auto applyJ = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    Eigen::VectorXcd y = x.cwiseQuotient(cn.cast<cd>());
    const Eigen::VectorXcd y3 = y.tail(N3);
    const Eigen::VectorXcd y2 = y.segment(N, N2);
    y.head(N) += Y12 * y2 + Y13 * y3;
    y.segment(N, N2) += Y23 * y3;
    T_apply(V, y);
    return y;
  };
  // J^H x = (Jhat^H T^H x) ./ cn
  auto applyJh = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    Eigen::VectorXcd y = x;
    T_apply(Vh, y);
    const Eigen::VectorXcd y1 = y.head(N);
    const Eigen::VectorXcd y2 = y.segment(N, N2);
    y.segment(N, N2) += Y12.adjoint() * y1;
    y.tail(N3) += Y13.adjoint() * y1 + Y23.adjoint() * y2;
    return y.cwiseQuotient(cn.cast<cd>());
  };
  // J^-1 x = cn .* (Jhat^-1 T^-1 x)
  auto applyJi = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    Eigen::VectorXcd y = x;
    T_apply(Vinv, y);
    const Eigen::VectorXcd y3 = y.tail(N3);
    y.segment(N, N2) -= Y23 * y3;
    const Eigen::VectorXcd y2 = y.segment(N, N2);
    y.head(N) -= Y12 * y2 + Y13 * y3;
    return y.cwiseProduct(cn.cast<cd>());
  };
  // J^-H x = T^-H Jhat^-H (cn .* x)
  auto applyJih = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    Eigen::VectorXcd y = x.cwiseProduct(cn.cast<cd>());
    const Eigen::VectorXcd y1 = y.head(N);
    y.segment(N, N2) -= Y12.adjoint() * y1;
    const Eigen::VectorXcd y2 = y.segment(N, N2);
    y.tail(N3) -= Y13.adjoint() * y1 + Y23.adjoint() * y2;
    T_apply(Vinvh, y);
    return y;
  };

  const PowerResult pj = power_singular_value(applyJ, applyJh, dim, opt.power_tol, opt.max_iter);
  const PowerResult pi = power_singular_value(applyJi, applyJih, dim, opt.power_tol, opt.max_iter);
  res.norm_J = pj.value;
  res.norm_J_inv = pi.value;
  res.kappa = pj.value * pi.value;
  res.iterations_J = pj.iterations;
  res.iterations_J_inv = pi.iterations;
  res.converged = pj.converged && pi.converged;
  return res;
}

/// Structured kappa of the single-point C^(3).
inline StructuredKappa structured_kappa(const CollisionOperators& ops, const StructuredKappaOptions& opt = {}) {
  return structured_kappa(ops.F1, SparseMatrix(ops.F2.sparseView()), SparseMatrix(ops.F3.sparseView()), opt);
}

/// Structured kappa of the n-point degree-3 matrix with streaming S (pass
/// an all-zero S for the collision-only matrix).
inline StructuredKappa structured_kappa(const CollisionOperators& ops, const SparseMatrix& S, std::int64_t points,
                                        const StructuredKappaOptions& opt = {}) {
  const SparseMatrix F1 = npoint_collision_operator(ops.F1, 1, points);
  const Eigen::MatrixXd L = Eigen::MatrixXd(F1) - Eigen::MatrixXd(S);
  return structured_kappa(L, npoint_collision_operator(ops.F2, 2, points), npoint_collision_operator(ops.F3, 3, points),
                          opt);
}

// ---------------------------------------------------------------------------
// Fits

/// Least-squares slope of log|y| against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("loglog_slope: need at least two matching samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(std::abs(y[i]) > 0.0)) throw DomainError("loglog_slope: non-positive sample");
    const double lx = std::log(x[i]);
    const double ly = std::log(std::abs(y[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DomainError("loglog_slope: x values are all equal");
  return (n * sxy - sx * sy) / den;
}

}  // namespace clbm

#endif  // CLBM_SPECTRAL_HPP_
