#include <gtest/gtest.h>

#include <sstream>

#include "clbm/io.hpp"
#include "clbm/carleman.hpp"

using namespace clbm;

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, -1e-300, 12345.678, 1.0 / 3.0}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Io, CsvHasHeaderAndLfOnly) {
  std::ostringstream os;
  CsvWriter w(os, make_header("test", {{"a", 1}}), {"t", "x"});
  w.row({0.0, 1.5});
  w.row({1.0, -2.0});
  EXPECT_THROW(w.row({1.0}), UsageError);
  const std::string s = os.str();
  EXPECT_EQ(s.find('\r'), std::string::npos);
  std::istringstream is(s);
  const auto h = read_header_line(is);
  EXPECT_EQ(h["command"], "test");
  EXPECT_EQ(h["config"]["a"], 1);
  EXPECT_EQ(h["tool"], kToolName);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,x");
  std::getline(is, line);
  EXPECT_EQ(line, "0,1.5");
}

TEST(Io, MatrixMarketRoundTrip) {
  const auto ops = build_collision_operators(make_lattice("D1Q3"), {0.1, 1.0});
  const auto sys = build_single_point(ops, 3);
  std::stringstream ss;
  write_matrix_market(ss, sys.matrix, make_header("build-matrix", {{"kn_tau", 0.1}}));
  std::string first;
  std::getline(ss, first);
  EXPECT_EQ(first, "%%MatrixMarket matrix coordinate real general");
  ss.seekg(0);
  const SparseMatrix back = read_matrix_market(ss);
  EXPECT_EQ(back.rows(), 39);
  EXPECT_EQ(Eigen::MatrixXd(back), sys.dense());
}

TEST(Io, BinaryCsrRoundTrip) {
  const auto ops = build_collision_operators(make_lattice("D2Q9"), {0.3, 0.7});
  const auto sys = build_single_point(ops, 3);
  std::stringstream ss;
  write_binary_csr(ss, sys.matrix, make_header("build-matrix", nlohmann::json::object()));
  nlohmann::json h;
  const SparseMatrix back = read_binary_csr(ss, &h);
  EXPECT_EQ(h["rows"], 819);
  EXPECT_EQ(h["nnz"], sys.matrix.nonZeros());
  EXPECT_EQ(Eigen::MatrixXd(back), sys.dense());
}

TEST(Io, TruncatedBinaryIsConfigError) {
  const auto ops = build_collision_operators(make_lattice("D1Q3"), {0.1, 1.0});
  std::stringstream ss;
  write_operators(ss, ops);
  std::string s = ss.str();
  s.resize(s.size() - 8);
  std::istringstream is(s);
  EXPECT_THROW(read_operators(is), ConfigError);
}

TEST(Io, OperatorsRoundTrip) {
  const auto ops = build_collision_operators(make_lattice("D2Q9"), {0.25, 0.9});
  std::stringstream ss;
  write_operators(ss, ops);
  const CollisionOperators back = read_operators(ss);
  EXPECT_EQ(back.lattice.name, LatticeName::D2Q9);
  EXPECT_EQ(back.relax.kn_tau, 0.25);
  EXPECT_EQ(back.F1, ops.F1);
  EXPECT_EQ(back.F2, ops.F2);
  EXPECT_EQ(back.F3, ops.F3);
}

TEST(Io, SnapshotRoundTripAndRestart) {
  DecayConfig cfg;
  cfg.nx = cfg.ny = 8;
  cfg.tau = 0.8;
  FlowField fl = init_taylor_green(cfg);
  step_lbm(fl, 0.8, 5);
  std::stringstream ss;
  write_snapshot(ss, fl);
  FlowField back = read_snapshot(ss);
  EXPECT_EQ(back.t, 5);
  EXPECT_EQ(back.f, fl.f);
  step_lbm(fl, 0.8, 3);
  step_lbm(back, 0.8, 3);
  EXPECT_EQ(back.f, fl.f);
}

TEST(Io, MalformedHeaderIsConfigError) {
  std::istringstream is("not json\n");
  EXPECT_THROW(read_header_line(is), ConfigError);
  std::istringstream mm("hello\n");
  EXPECT_THROW(read_matrix_market(mm), ConfigError);
}

TEST(Io, HashIsStable) {
  EXPECT_EQ(fnv1a(""), 1469598103934665603ULL);
  EXPECT_NE(fnv1a("a"), fnv1a("b"));
}
