// clbm: command-line front end for the CLBM library.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clbm/clbm.hpp"

using nlohmann::json;
using namespace clbm;

namespace {

// ---------------------------------------------------------------------------
// Configuration

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 1;
};

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

/// Defaults, overlaid by the config file, overlaid by --set. Unknown keys
/// and type changes are rejected.
json resolve_config(const json& defaults, const Options& opt, const std::string& command) {
  json cfg = defaults;
  auto apply = [&](const std::string& key, const json& value, const std::string& origin) {
    if (!defaults.contains(key)) throw ConfigError(command + ": unknown key '" + key + "' in " + origin);
    if (!defaults[key].is_null() && !same_kind(defaults[key], value)) {
      throw ConfigError(command + ": key '" + key + "' in " + origin + " has the wrong type");
    }
    cfg[key] = value;
  };
  if (!opt.config_path.empty()) {
    std::ifstream in = open_input(opt.config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse '" + opt.config_path + "': " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config '" + opt.config_path + "' must be a JSON object");
    for (const auto& [k, v] : file.items()) apply(k, v, opt.config_path);
  }
  for (const auto& s : opt.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq);
    const std::string text = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    apply(key, value, "--set");
  }
  return cfg;
}

json flags_json(const Options& opt, json extra = json::object()) {
  extra["threads"] = opt.threads;
  extra["integrator"] = "rk4";
  return extra;
}

template <typename T>
T get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

/// Output files are `<output>.<suffix>`; parent directories are created.
std::string out_path(const json& cfg, const std::string& suffix) {
  const std::filesystem::path p(get<std::string>(cfg, "output") + suffix);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p.string();
}

StreamScheme scheme_of(const json& cfg) { return parse_stream_scheme(get<std::string>(cfg, "stencil")); }

RelaxParams relax_of(const json& cfg) { return {get<double>(cfg, "kn_tau"), get<double>(cfg, "tau")}; }

CarlemanSystem build_system(const json& cfg) {
  const Lattice lat = make_lattice(get<std::string>(cfg, "lattice"));
  const auto ops = build_collision_operators(lat, relax_of(cfg));
  const int k = get<int>(cfg, "k");
  const auto n = get<std::int64_t>(cfg, "n");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (n == 1) {
    if (k < 2) throw ConfigError("k must be >= 2 for a single-point matrix");
    return build_single_point(ops, k);
  }
  const SparseMatrix S = build_streaming(lat, n, scheme_of(cfg));
  CarlemanSystem sys = build_npoint(ops, S, k, grid_points(lat, n), get<std::int64_t>(cfg, "nnz_cap"));
  sys.scheme = scheme_of(cfg);
  return sys;
}

// ---------------------------------------------------------------------------
// build-matrix

/// Matrix from the CARLEMAN_LBM_CACHE directory when present, else built and
/// stored there.
SparseMatrix cached_matrix(const json& key, const std::function<SparseMatrix()>& build) {
  const char* dir = std::getenv("CARLEMAN_LBM_CACHE");
  if (dir == nullptr || *dir == '\0') return build();
  const std::filesystem::path path =
      std::filesystem::path(dir) / ("carleman-" + std::to_string(fnv1a(key.dump())) + ".csr");
  if (std::filesystem::exists(path)) {
    std::ifstream in = open_input(path.string(), true);
    json h;
    SparseMatrix M = read_binary_csr(in, &h);
    if (h.value("key", json()) == key) return M;
  }
  SparseMatrix M = build();
  std::filesystem::create_directories(dir);
  std::ofstream out = open_output(path.string(), true);
  json h = make_header("cache", key);
  h["key"] = key;
  write_binary_csr(out, M, h);
  return M;
}

int cmd_build_matrix(const Options& opt) {
  const json defaults = {{"lattice", "D1Q3"}, {"kn_tau", 1.0},       {"tau", 1.0},
                         {"k", 3},            {"n", 1},              {"stencil", "central2"},
                         {"format", "mtx"},   {"operators", false},  {"nnz_cap", kDefaultNnzCap},
                         {"output", "carleman"}};
  const json cfg = resolve_config(defaults, opt, "build-matrix");
  const std::string format = get<std::string>(cfg, "format");
  if (format != "mtx" && format != "csr" && format != "both") throw ConfigError("format must be mtx, csr or both");
  json key = cfg;
  key.erase("output");
  key.erase("format");
  key.erase("operators");
  CarlemanSystem meta;
  const SparseMatrix M = cached_matrix(key, [&] {
    meta = build_system(cfg);
    return meta.matrix;
  });
  const json flags = flags_json(opt, {{"stencil", get<std::string>(cfg, "stencil")}, {"dim", M.rows()},
                                      {"nnz", M.nonZeros()}, {"max_row_nnz", max_row_nonzeros(M)}});
  const json header = make_header("build-matrix", cfg, flags);
  if (format == "mtx" || format == "both") {
    std::ofstream out = open_output(out_path(cfg, ".mtx"));
    write_matrix_market(out, M, header);
  }
  if (format == "csr" || format == "both") {
    std::ofstream out = open_output(out_path(cfg, ".csr"), true);
    write_binary_csr(out, M, header);
  }
  if (get<bool>(cfg, "operators")) {
    std::ofstream out = open_output(out_path(cfg, ".ops"), true);
    write_operators(out, build_collision_operators(make_lattice(get<std::string>(cfg, "lattice")), relax_of(cfg)));
  }
  std::cout << "dim=" << M.rows() << " nnz=" << M.nonZeros() << " max_row_nnz=" << max_row_nonzeros(M) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// spectra

int cmd_spectra(const Options& opt) {
  const json defaults = {{"lattice", "D1Q3"},      {"kn_tau", 1.0},   {"tau", 1.0},         {"k", 3},
                         {"n", 1},                 {"stencil", "central2"}, {"nnz_cap", kDefaultNnzCap},
                         {"bins", 70},             {"max_dim", 5000}, {"stable_tol", 1e-10},
                         {"tau_curve", true},      {"output", "spectra"}};
  const json cfg = resolve_config(defaults, opt, "spectra");
  const CarlemanSystem sys = build_system(cfg);
  EigenOptions eo;
  eo.max_dim = get<std::int64_t>(cfg, "max_dim");
  if (sys.dim() > eo.max_dim) {
    throw ResourceError("spectra: matrix dimension " + std::to_string(sys.dim()) + " exceeds max_dim");
  }
  const SpectralReport rep = spectral_report(sys.dense(), get<double>(cfg, "stable_tol"), eo);
  const json flags = flags_json(opt, {{"stencil", get<std::string>(cfg, "stencil")}, {"dim", sys.dim()}});
  {
    std::ofstream out = open_output(out_path(cfg, ".json"));
    json doc = make_header("spectra", cfg, flags);
    doc["report"] = rep.to_json();
    out << doc.dump(2) << '\n';
  }
  {
    const double kt = get<double>(cfg, "kn_tau");
    const int k = get<int>(cfg, "k");
    std::ofstream out = open_output(out_path(cfg, "_hist.csv"));
    json f = flags;
    f["units"] = "real part times kn_tau";
    CsvWriter w(out, make_header("spectra", cfg, f), {"bin_center", "count"});
    for (const auto& b : eigenvalue_histogram(rep.eigenvalues, kt, -k - 0.5, 0.5, get<int>(cfg, "bins"))) {
      w.row({b.center, static_cast<double>(b.count)});
    }
  }
  if (get<bool>(cfg, "tau_curve") && sys.n == 1) {
    const Lattice lat = make_lattice(get<std::string>(cfg, "lattice"));
    std::ofstream out = open_output(out_path(cfg, "_sigma_f2.csv"));
    json f = flags;
    f["kn_tau"] = "equal to tau";
    CsvWriter w(out, make_header("spectra", cfg, f), {"tau", "sigma_max_F2_hat", "mu_F1_hat"});
    for (int i = 0; i <= 20; ++i) {
      const double tau = 0.525 + 0.475 * i / 20.0;
      const auto red = reduce_quadratic(build_collision_operators(lat, {tau, tau}));
      w.row({tau, red.sigma_max_F2, red.mu_F1});
    }
  }
  std::cout << "kappa_J=" << rep.kappa_J << " kappa_J_bound=" << rep.kappa_J_bound
            << " spectral_abscissa=" << rep.spectral_abscissa << " stable=" << (rep.stable ? "yes" : "no") << "\n";
  if (!rep.stable) {
    std::cerr << "clbm: spectra: matrix is unstable (spectral abscissa " << rep.spectral_abscissa << ")\n";
    return NumericalError("").exit_code();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// truncation

int cmd_truncation(const Options& opt) {
  const json defaults = {{"lattice", "D1Q3"}, {"kn_tau", 1.0}, {"tau", 1.0},       {"k_values", {3, 4, 5}},
                         {"u0", 0.1},         {"T", nullptr},  {"dt", nullptr},    {"oracle", "exact"},
                         {"threshold", 1e-12}, {"output", "truncation"}};
  const json cfg = resolve_config(defaults, opt, "truncation");
  const RelaxParams rp = relax_of(cfg);
  TruncationConfig tc;
  tc.k_values = get<std::vector<int>>(cfg, "k_values");
  tc.u0 = get<double>(cfg, "u0");
  tc.T = cfg["T"].is_null() ? 10.0 * rp.kn_tau : get<double>(cfg, "T");
  tc.dt = cfg["dt"].is_null() ? rp.kn_tau / 10.0 : get<double>(cfg, "dt");
  const std::string oracle = get<std::string>(cfg, "oracle");
  if (oracle != "exact" && oracle != "taylor") throw ConfigError("oracle must be exact or taylor");
  tc.taylor_oracle = oracle == "taylor";
  const Lattice lat = make_lattice(get<std::string>(cfg, "lattice"));
  const TruncationReport rep = run_single_point_experiment(lat, rp, tc);
  const json flags = flags_json(opt, {{"dt", tc.dt}, {"T", tc.T}, {"oracle", oracle}});
  {
    std::ofstream out = open_output(out_path(cfg, ".csv"));
    CsvWriter w(out, make_header("truncation", cfg, flags), {"k", "t", "m", "epsilon"});
    for (const auto& r : rep.runs) {
      for (std::size_t s = 0; s < r.times.size(); ++s) {
        for (int m = 0; m < lat.Q; ++m) {
          w.row({static_cast<double>(r.k), r.times[s], static_cast<double>(m),
                 r.epsilon(static_cast<Eigen::Index>(s), m)});
        }
      }
    }
  }
  {
    std::ofstream out = open_output(out_path(cfg, ".json"));
    json doc = make_header("truncation", cfg, flags);
    doc["summary"] = rep.summary();
    out << doc.dump(2) << '\n';
  }
  const double threshold = get<double>(cfg, "threshold");
  bool ok = true;
  for (const auto& r : rep.runs) {
    std::cout << "k=" << r.k << " max_rel_error=" << r.max_rel_error << "\n";
    if (r.k == 3 && r.max_rel_error > threshold) ok = false;
  }
  if (!ok) {
    std::cerr << "clbm: truncation: k=3 error exceeds threshold " << threshold << "\n";
    return NumericalError("").exit_code();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// turbulence

int cmd_turbulence(const Options& opt) {
  const json defaults = {{"nx", 64},
                         {"ny", 64},
                         {"tau", 0.0},
                         {"Ma0", 0.03},
                         {"Re0", 400.0},
                         {"steps", 20000},
                         {"sample_every", 100},
                         {"forced_spinup", false},
                         {"spinup_steps", 2000},
                         {"forcing_amplitude", 1e-6},
                         {"forcing_wavenumber", 4},
                         {"seed", 1},
                         {"g_f_band", 0.01},
                         {"snapshot", false},
                         {"output", "turbulence"}};
  const json cfg = resolve_config(defaults, opt, "turbulence");
  DecayConfig dc;
  dc.nx = get<int>(cfg, "nx");
  dc.ny = get<int>(cfg, "ny");
  dc.tau = get<double>(cfg, "tau");
  dc.Ma0 = get<double>(cfg, "Ma0");
  dc.Re0 = get<double>(cfg, "Re0");
  dc.steps = get<std::int64_t>(cfg, "steps");
  dc.sample_every = get<std::int64_t>(cfg, "sample_every");
  dc.forced_spinup = get<bool>(cfg, "forced_spinup");
  dc.spinup_steps = get<std::int64_t>(cfg, "spinup_steps");
  dc.forcing_amplitude = get<double>(cfg, "forcing_amplitude");
  dc.forcing_wavenumber = get<int>(cfg, "forcing_wavenumber");
  dc.seed = get<std::uint64_t>(cfg, "seed");
  FlowField final_field;
  const DecaySeries s = run_decaying(dc, &final_field);
  const json flags = flags_json(opt, {{"stepper", "collide-stream"}, {"dt", 1}, {"tau", s.tau}});
  {
    std::ofstream out = open_output(out_path(cfg, ".csv"));
    CsvWriter w(out, make_header("turbulence", cfg, flags), {"t", "f_norm", "energy", "g_f_running"});
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      w.row({static_cast<double>(s.t[i]), s.f_norm[i], s.energy[i], s.g_f_running[i]});
    }
  }
  {
    std::ofstream out = open_output(out_path(cfg, ".json"));
    json doc = make_header("turbulence", cfg, flags);
    doc["summary"] = {{"g_f", s.g_f}, {"tau", s.tau}, {"nu", s.nu}, {"mass_drift", s.mass_drift}};
    out << doc.dump(2) << '\n';
  }
  if (get<bool>(cfg, "snapshot")) {
    std::ofstream out = open_output(out_path(cfg, "_final.bin"), true);
    write_snapshot(out, final_field);
  }
  std::cout << "g_f=" << s.g_f << " tau=" << s.tau << " mass_drift=" << s.mass_drift << "\n";
  if (std::abs(s.g_f - 1.0) > get<double>(cfg, "g_f_band")) {
    std::cerr << "clbm: turbulence: g_f outside band\n";
    return NumericalError("").exit_code();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// kappa-sweep

int cmd_kappa_sweep(const Options& opt) {
  const json defaults = {{"lattice", "D1Q3"},         {"n", 8},           {"tau", 1.0},
                         {"kn_tau", {1e-1, 3e-2, 1e-2}}, {"stencil", "central2"}, {"power_tol", 1e-10},
                         {"output", "kappa_sweep"}};
  const json cfg = resolve_config(defaults, opt, "kappa-sweep");
  const Lattice lat = make_lattice(get<std::string>(cfg, "lattice"));
  const auto n = get<std::int64_t>(cfg, "n");
  const auto kts = get<std::vector<double>>(cfg, "kn_tau");
  if (kts.size() < 2) throw ConfigError("kappa-sweep: need at least two kn_tau values");
  const std::int64_t points = grid_points(lat, n);
  const SparseMatrix S = build_streaming(lat, n, scheme_of(cfg));
  const SparseMatrix zero(S.rows(), S.cols());
  StructuredKappaOptions so;
  so.power_tol = get<double>(cfg, "power_tol");
  std::vector<std::vector<double>> rows;
  std::vector<double> diffs;
  for (double kt : kts) {
    const auto ops = build_collision_operators(lat, {kt, get<double>(cfg, "tau")});
    const StructuredKappa full = structured_kappa(ops, S, points, so);
    const StructuredKappa coll = structured_kappa(ops, zero, points, so);
    diffs.push_back(std::abs(full.kappa - coll.kappa));
    rows.push_back({kt, full.kappa, coll.kappa, diffs.back(), full.defect, full.converged && coll.converged ? 1.0 : 0.0});
    std::cout << "kn_tau=" << kt << " kappa_C=" << full.kappa << " kappa_Cc=" << coll.kappa << "\n";
  }
  const double slope = loglog_slope(kts, diffs);
  std::ofstream out = open_output(out_path(cfg, ".csv"));
  const json flags = flags_json(opt, {{"stencil", get<std::string>(cfg, "stencil")}, {"k", 3}});
  CsvWriter w(out, make_header("kappa-sweep", cfg, flags),
              {"kn_tau", "kappa_C", "kappa_Cc", "abs_diff", "defect", "converged", "slope"});
  for (auto& r : rows) {
    r.push_back(slope);
    w.row(r);
  }
  std::cout << "slope=" << slope << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// complexity

int cmd_complexity(const Options& opt, const std::string& sweep) {
  json defaults = to_json(ScenarioParams{});
  defaults["preset"] = "none";
  defaults["varrho"] = 0.0;
  defaults["output"] = "complexity";
  json cfg = resolve_config(defaults, opt, "complexity");
  const std::string preset = get<std::string>(cfg, "preset");
  ScenarioParams base;
  if (preset == "atmospheric") {
    base = atmospheric_preset();
  } else if (preset != "none") {
    throw ConfigError("preset must be none or atmospheric");
  }
  // keys given explicitly override the preset
  json explicit_keys = json::object();
  const json plain = to_json(ScenarioParams{});
  for (const auto& [k, v] : cfg.items()) {
    if (plain.contains(k) && v != plain[k]) explicit_keys[k] = v;
  }
  base = scenario_from_json(explicit_keys, base);
  const double varrho = get<double>(cfg, "varrho");
  base.validate();
  for (const auto& wmsg : base.warnings()) std::cerr << "clbm: warning: " << wmsg << "\n";

  SweepSpec spec;
  if (!sweep.empty()) {
    spec = parse_sweep(sweep);
  } else {
    spec.param = "none";
    spec.values = {0.0};
  }
  std::ofstream out = open_output(out_path(cfg, ".csv"));
  json flags = flags_json(opt, {{"sweep", sweep}, {"constants", "all O(1) constants set to 1"}});
  const std::vector<std::string> factor_names{"norm_C", "kappa_J", "g", "T", "s", "N", "polylog", "condensed", "guard"};
  std::vector<std::string> cols{"param", "value", "berry_estimate", "krovi_estimate"};
  cols.insert(cols.end(), factor_names.begin(), factor_names.end());
  json header_cfg = cfg;
  header_cfg["resolved"] = to_json(base);
  write_header_line(out, make_header("complexity", header_cfg, flags));
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (double v : spec.values) {
    ScenarioParams p = base;
    if (spec.param != "none") set_scenario_field(p, spec.param, v);
    const Estimate b = berry_estimate(p);
    const Estimate k = krovi_estimate(p, varrho);
    out << spec.param << ',' << format_double(v) << ',' << format_double(b.value) << ',' << format_double(k.value);
    for (const auto& f : factor_names) out << ',' << format_double(b.factor(f));
    out << '\n';
    std::cout << spec.param << "=" << v << " berry=" << b.value << " krovi=" << k.value << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carleman-linearized lattice Boltzmann toolkit"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);
  Options opt;
  std::string sweep;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", opt.sets, "Override a config key (key=value, repeatable)");
    sub->add_option("--threads", opt.threads, "Worker cap (computation is serial)")->check(CLI::PositiveNumber);
  };
  auto* bm = app.add_subcommand("build-matrix", "Assemble a truncated Carleman matrix");
  auto* sp = app.add_subcommand("spectra", "Eigenvalues, condition numbers and stability");
  auto* tr = app.add_subcommand("truncation", "Single-node truncation error against the BGK oracle");
  auto* tu = app.add_subcommand("turbulence", "Decaying D2Q9 Taylor-Green run");
  auto* ks = app.add_subcommand("kappa-sweep", "Condition number against kn_tau with and without streaming");
  auto* cx = app.add_subcommand("complexity", "Gate-complexity estimates");
  for (auto* s : {bm, sp, tr, tu, ks, cx}) common(s);
  cx->add_option("--scenario", opt.config_path, "Scenario JSON (same as --config)")->check(CLI::ExistingFile);
  cx->add_option("--sweep", sweep, "Sweep, e.g. n=1e6:1e21:log[:count]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (bm->parsed()) return cmd_build_matrix(opt);
    if (sp->parsed()) return cmd_spectra(opt);
    if (tr->parsed()) return cmd_truncation(opt);
    if (tu->parsed()) return cmd_turbulence(opt);
    if (ks->parsed()) return cmd_kappa_sweep(opt);
    if (cx->parsed()) return cmd_complexity(opt, sweep);
  } catch (const Error& e) {
    std::cerr << "clbm: " << e.what() << "\n";
    return e.exit_code();
  } catch (const json::exception& e) {
    std::cerr << "clbm: config: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "clbm: " << e.what() << "\n";
    return 2;
  } catch (const std::bad_alloc&) {
    std::cerr << "clbm: out of memory\n";
    return 4;
  }
  return 2;
}
