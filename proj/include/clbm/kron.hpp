#ifndef CLBM_KRON_HPP_
#define CLBM_KRON_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

#include "clbm/errors.hpp"

namespace clbm {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

inline std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// x (x) y with lexicographic ordering (x index slowest).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kron(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& x,
                                              const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& y) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(x.size() * y.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.segment(i * y.size(), y.size()) = x(i) * y;
  return out;
}

inline Eigen::VectorXd kron(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  return kron<double>(x, y);
}

/// v^[degree] = v (x) v (x) ... (x) v.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kron_power(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& v,
                                                    int degree) {
  if (degree < 1) throw UsageError("kron_power: degree must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = v;
  for (int i = 1; i < degree; ++i) out = kron<Scalar>(out, v);
  return out;
}

inline Eigen::VectorXd kron_power(const Eigen::Ref<const Eigen::VectorXd>& v, int degree) {
  return kron_power<double>(v, degree);
}

/// Appends the triplets of I_{N^before} (x) F (x) I_{N^after} to `out`,
/// shifted by (row0, col0).
inline void append_kron_identity_sandwich(const SparseMatrix& F, std::int64_t base, int before, int after,
                                          std::int64_t row0, std::int64_t col0, std::vector<Triplet>& out) {
  const std::int64_t left = ipow(base, before);
  const std::int64_t right = ipow(base, after);
  const std::int64_t rows = F.rows();
  const std::int64_t cols = F.cols();
  out.reserve(out.size() + static_cast<std::size_t>(F.nonZeros() * left * right));
  for (std::int64_t a = 0; a < left; ++a) {
    for (Eigen::Index r = 0; r < F.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(F, r); it; ++it) {
        const std::int64_t rr = (a * rows + it.row()) * right;
        const std::int64_t cc = (a * cols + it.col()) * right;
        for (std::int64_t b = 0; b < right; ++b) {
          out.emplace_back(static_cast<int>(row0 + rr + b), static_cast<int>(col0 + cc + b), it.value());
        }
      }
    }
  }
}

/// Triplets of A^i_{i+j-1} = sum_r I^(r-1) (x) Fj (x) I^(i-r), where Fj maps
/// base^j monomials to base rows.
inline void append_transfer_triplets(const SparseMatrix& Fj, int i, std::int64_t base, std::int64_t row0,
                                     std::int64_t col0, std::vector<Triplet>& out) {
  if (i < 1) throw UsageError("transfer_matrix: block row must be >= 1");
  if (Fj.rows() != base) throw UsageError("transfer_matrix: Fj must have base rows");
  std::int64_t cols = Fj.cols();
  int j = 0;
  for (std::int64_t p = 1; p < cols; p *= base) ++j;
  if (ipow(base, j) != cols || j < 1) throw UsageError("transfer_matrix: Fj column count is not a power of base");
  for (int r = 1; r <= i; ++r) append_kron_identity_sandwich(Fj, base, r - 1, i - r, row0, col0, out);
}

/// A^i_{i+j-1}; dimension base^i x base^(i+j-1).
inline SparseMatrix transfer_matrix(const SparseMatrix& Fj, int i, std::int64_t base) {
  std::vector<Triplet> trips;
  append_transfer_triplets(Fj, i, base, 0, 0, trips);
  int j = 0;
  for (std::int64_t p = 1; p < Fj.cols(); p *= base) ++j;
  SparseMatrix out(static_cast<Eigen::Index>(ipow(base, i)), static_cast<Eigen::Index>(ipow(base, i + j - 1)));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline SparseMatrix transfer_matrix(const Eigen::MatrixXd& Fj, int i, std::int64_t base) {
  return transfer_matrix(SparseMatrix(Fj.sparseView()), i, base);
}

}  // namespace clbm

#endif  // CLBM_KRON_HPP_
