#ifndef CLBM_IO_HPP_
#define CLBM_IO_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "clbm/collision.hpp"
#include "clbm/errors.hpp"
#include "clbm/kron.hpp"
#include "clbm/turbulence.hpp"

namespace clbm {

inline constexpr const char* kToolName = "clbm";
inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip decimal form, independent of the C locale.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw UsageError("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

/// Header object written as the first line of every output file.
inline nlohmann::json make_header(const std::string& command, const nlohmann::json& config,
                                  const nlohmann::json& flags = nlohmann::json::object()) {
  nlohmann::json h;
  h["tool"] = kToolName;
  h["version"] = kToolVersion;
  h["command"] = command;
  h["config"] = config;
  h["flags"] = flags;
  return h;
}

inline void write_header_line(std::ostream& os, const nlohmann::json& header) { os << header.dump() << '\n'; }

/// Reads the leading JSON header line.
inline nlohmann::json read_header_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("missing header line");
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed header line: ") + e.what());
  }
}

inline std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!os) throw ConfigError("cannot open output file '" + path + "'");
  return os;
}

inline std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary | std::ios::in : std::ios::in);
  if (!is) throw ConfigError("cannot open input file '" + path + "'");
  return is;
}

/// CSV with a JSON header line, comma separators and LF line ends.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const nlohmann::json& header, const std::vector<std::string>& columns)
      : os_(os), width_(columns.size()) {
    write_header_line(os_, header);
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw UsageError("CsvWriter: row width does not match header");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_double(values[i]);
    os_ << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t width_;
};

// ---------------------------------------------------------------------------
// Little-endian binary helpers

namespace detail {

template <typename T>
T byteswap_if_needed(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::array<unsigned char, sizeof(T)> b{};
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }
}

template <typename T>
void write_le(std::ostream& os, const T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const T v = byteswap_if_needed(data[i]);
      os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
  }
}

template <typename T>
void read_le(std::istream& is, T* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!is) throw ConfigError("binary payload is truncated");
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) data[i] = byteswap_if_needed(data[i]);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrices

/// Matrix Market coordinate file. The banner stays on line 1 so standard
/// readers accept the file; the JSON header follows as a '%' comment line.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& M, const nlohmann::json& header) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << "% " << header.dump() << '\n';
  os << M.rows() << ' ' << M.cols() << ' ' << M.nonZeros() << '\n';
  for (Eigen::Index r = 0; r < M.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(M, r); it; ++it) {
      os << (it.row() + 1) << ' ' << (it.col() + 1) << ' ' << format_double(it.value()) << '\n';
    }
  }
}

inline SparseMatrix read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0) {
    throw ConfigError("not a real general coordinate Matrix Market file");
  }
  while (std::getline(is, line) && !line.empty() && line[0] == '%') {
  }
  std::int64_t rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> nnz)) throw ConfigError("Matrix Market size line is malformed");
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(nnz));
  for (std::int64_t i = 0; i < nnz; ++i) {
    std::int64_t r = 0, c = 0;
    double v = 0.0;
    if (!(is >> r >> c >> v)) throw ConfigError("Matrix Market entries are truncated");
    trips.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
  }
  SparseMatrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

/// Binary CSR: JSON header line, then int64 row pointers, int64 column
/// indices and float64 values, all little-endian.
inline void write_binary_csr(std::ostream& os, const SparseMatrix& M, nlohmann::json header) {
  SparseMatrix A = M;
  A.makeCompressed();
  header["format"] = "csr";
  header["rows"] = A.rows();
  header["cols"] = A.cols();
  header["nnz"] = A.nonZeros();
  header["index_type"] = "int64le";
  header["value_type"] = "float64le";
  write_header_line(os, header);
  std::vector<std::int64_t> ptr(static_cast<std::size_t>(A.rows()) + 1);
  for (Eigen::Index r = 0; r <= A.rows(); ++r) ptr[static_cast<std::size_t>(r)] = A.outerIndexPtr()[r];
  std::vector<std::int64_t> idx(static_cast<std::size_t>(A.nonZeros()));
  for (Eigen::Index i = 0; i < A.nonZeros(); ++i) idx[static_cast<std::size_t>(i)] = A.innerIndexPtr()[i];
  detail::write_le(os, ptr.data(), ptr.size());
  detail::write_le(os, idx.data(), idx.size());
  detail::write_le(os, A.valuePtr(), static_cast<std::size_t>(A.nonZeros()));
}

inline SparseMatrix read_binary_csr(std::istream& is, nlohmann::json* header_out = nullptr) {
  const nlohmann::json h = read_header_line(is);
  if (h.value("format", "") != "csr") throw ConfigError("binary file is not CSR");
  const auto rows = h.at("rows").get<std::int64_t>();
  const auto cols = h.at("cols").get<std::int64_t>();
  const auto nnz = h.at("nnz").get<std::int64_t>();
  std::vector<std::int64_t> ptr(static_cast<std::size_t>(rows) + 1);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(nnz));
  std::vector<double> val(static_cast<std::size_t>(nnz));
  detail::read_le(is, ptr.data(), ptr.size());
  detail::read_le(is, idx.data(), idx.size());
  detail::read_le(is, val.data(), val.size());
  std::vector<Triplet> trips;
  trips.reserve(val.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t i = ptr[static_cast<std::size_t>(r)]; i < ptr[static_cast<std::size_t>(r) + 1]; ++i) {
      trips.emplace_back(static_cast<int>(r), static_cast<int>(idx[static_cast<std::size_t>(i)]),
                         val[static_cast<std::size_t>(i)]);
    }
  }
  SparseMatrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  M.setFromTriplets(trips.begin(), trips.end());
  if (header_out != nullptr) *header_out = h;
  return M;
}

// ---------------------------------------------------------------------------
// Collision operators

/// JSON header {lattice, kn_tau, tau, shapes} then F1, F2, F3 as row-major
/// little-endian float64.
inline void write_operators(std::ostream& os, const CollisionOperators& ops) {
  nlohmann::json h;
  h["tool"] = kToolName;
  h["version"] = kToolVersion;
  h["lattice"] = to_string(ops.lattice.name);
  h["kn_tau"] = ops.relax.kn_tau;
  h["tau"] = ops.relax.tau;
  h["shapes"] = {{ops.F1.rows(), ops.F1.cols()}, {ops.F2.rows(), ops.F2.cols()}, {ops.F3.rows(), ops.F3.cols()}};
  write_header_line(os, h);
  for (const Eigen::MatrixXd* F : {&ops.F1, &ops.F2, &ops.F3}) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = *F;
    detail::write_le(os, R.data(), static_cast<std::size_t>(R.size()));
  }
}

inline CollisionOperators read_operators(std::istream& is) {
  const nlohmann::json h = read_header_line(is);
  CollisionOperators ops;
  ops.lattice = make_lattice(h.at("lattice").get<std::string>());
  ops.relax = {h.at("kn_tau").get<double>(), h.at("tau").get<double>()};
  const auto& shapes = h.at("shapes");
  if (!shapes.is_array() || shapes.size() != 3) throw ConfigError("operator header needs three shapes");
  Eigen::MatrixXd* targets[3] = {&ops.F1, &ops.F2, &ops.F3};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto r = shapes[i][0].get<Eigen::Index>();
    const auto c = shapes[i][1].get<Eigen::Index>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(r, c);
    detail::read_le(is, R.data(), static_cast<std::size_t>(R.size()));
    *targets[i] = R;
  }
  return ops;
}

// ---------------------------------------------------------------------------
// Field snapshots

/// JSON header {nx, ny, Q, step} then nx*ny*Q little-endian float64 in the
/// FlowField layout.
inline void write_snapshot(std::ostream& os, const FlowField& fl) {
  nlohmann::json h;
  h["tool"] = kToolName;
  h["version"] = kToolVersion;
  h["nx"] = fl.nx;
  h["ny"] = fl.ny;
  h["Q"] = fl.lat.Q;
  h["step"] = fl.t;
  write_header_line(os, h);
  detail::write_le(os, fl.f.data(), fl.f.size());
}

inline FlowField read_snapshot(std::istream& is) {
  const nlohmann::json h = read_header_line(is);
  FlowField fl;
  fl.nx = h.at("nx").get<int>();
  fl.ny = h.at("ny").get<int>();
  const int Q = h.at("Q").get<int>();
  if (Q != 9) throw ConfigError("snapshot: only D2Q9 fields are supported");
  fl.lat = make_lattice(LatticeName::D2Q9);
  fl.t = h.at("step").get<std::int64_t>();
  fl.f.resize(static_cast<std::size_t>(fl.points() * Q));
  detail::read_le(is, fl.f.data(), fl.f.size());
  return fl;
}

/// FNV-1a hash of a string, used for cache file names.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace clbm

#endif  // CLBM_IO_HPP_
