#ifndef CLBM_COMPLEXITY_HPP_
#define CLBM_COMPLEXITY_HPP_

#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clbm/errors.hpp"

namespace clbm {

/// Inputs of the gate-complexity formulas. All O(.) constants are 1, so
/// every estimate is in relative units.
struct ScenarioParams {
  double n = 1e6;          // grid points
  double Q = 27;
  int k = 3;
  double kn_tau = 1e-3;
  double t_c = 1.0;        // collision time [s]
  double T_phys = 1.0;     // physical evolution time [s]
  double L = 1.0;          // domain scale [m]
  double e_r = 1.0;        // reference speed [m/s]
  double epsilon = 1e-3;
  double kappa_J = 1.152e5;
  double g = 0.0;          // <= 0 selects 3 sqrt(k)
  double s = 1.0;
  double beta = 1.0;
  double K = 1.0;          // Kolmogorov constant
  double chi = 1.0;        // decay-law constant
  double pexp = 1.0;       // polylog exponent
  double guard_threshold = 1e-2;

  [[nodiscard]] double g_eff() const { return g > 0.0 ? g : 3.0 * std::sqrt(static_cast<double>(k)); }
  [[nodiscard]] double norm_C() const { return 1.0 / kn_tau; }
  /// Lattice evolution time T_phys / (L / e_r).
  [[nodiscard]] double T_lattice() const { return T_phys / (L / e_r); }
  /// Carleman dimension sum_{i<=k} (nQ)^i.
  [[nodiscard]] double N() const {
    double total = 0.0;
    double p = 1.0;
    for (int i = 1; i <= k; ++i) {
      p *= n * Q;
      total += p;
    }
    return total;
  }
  /// (kn_tau)^3 log n, required to be << 1.
  [[nodiscard]] double guard_value() const { return std::pow(kn_tau, 3) * std::log(n); }
  [[nodiscard]] bool guard_ok() const { return guard_value() <= guard_threshold; }

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("scenario: ") + name + " must be positive");
    };
    pos(n, "n");
    pos(Q, "Q");
    pos(kn_tau, "kn_tau");
    pos(t_c, "t_c");
    pos(T_phys, "T_phys");
    pos(L, "L");
    pos(e_r, "e_r");
    pos(epsilon, "epsilon");
    pos(kappa_J, "kappa_J");
    pos(s, "s");
    pos(beta, "beta");
    pos(K, "K");
    pos(chi, "chi");
    pos(pexp, "pexp");
    if (k < 1) throw DomainError("scenario: k must be >= 1");
    if (g < 0.0) throw DomainError("scenario: g must be positive (or 0 for the default)");
    if (!(epsilon < 1.0)) throw DomainError("scenario: epsilon must be < 1");
    if (!guard_ok()) {
      std::ostringstream os;
      os << "scenario: (kn_tau)^3 log n = " << guard_value() << " exceeds guard " << guard_threshold;
      throw DomainError(os.str());
    }
  }

  /// Warnings that do not invalidate the scenario.
  [[nodiscard]] std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (kn_tau >= 0.1) w.emplace_back("kn_tau >= 0.1: continuum assumption kn_tau << 1 is weak");
    return w;
  }
};

/// Scenario from JSON; unknown keys are rejected.
inline ScenarioParams scenario_from_json(const nlohmann::json& j, ScenarioParams p = {}) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  static const std::map<std::string, double ScenarioParams::*> fields = {
      {"n", &ScenarioParams::n},         {"Q", &ScenarioParams::Q},
      {"kn_tau", &ScenarioParams::kn_tau}, {"t_c", &ScenarioParams::t_c},
      {"T_phys", &ScenarioParams::T_phys}, {"L", &ScenarioParams::L},
      {"e_r", &ScenarioParams::e_r},     {"epsilon", &ScenarioParams::epsilon},
      {"kappa_J", &ScenarioParams::kappa_J}, {"g", &ScenarioParams::g},
      {"s", &ScenarioParams::s},         {"beta", &ScenarioParams::beta},
      {"K", &ScenarioParams::K},         {"chi", &ScenarioParams::chi},
      {"pexp", &ScenarioParams::pexp},   {"guard_threshold", &ScenarioParams::guard_threshold}};
  for (const auto& [key, val] : j.items()) {
    if (key == "k") {
      if (!val.is_number_integer()) throw ConfigError("scenario: k must be an integer");
      p.k = val.get<int>();
      continue;
    }
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("scenario: unknown key '" + key + "'");
    if (!val.is_number()) throw ConfigError("scenario: '" + key + "' must be a number");
    p.*(it->second) = val.get<double>();
  }
  return p;
}

inline nlohmann::json to_json(const ScenarioParams& p) {
  return {{"n", p.n},         {"Q", p.Q},         {"k", p.k},           {"kn_tau", p.kn_tau},
          {"t_c", p.t_c},     {"T_phys", p.T_phys}, {"L", p.L},         {"e_r", p.e_r},
          {"epsilon", p.epsilon}, {"kappa_J", p.kappa_J}, {"g", p.g},   {"s", p.s},
          {"beta", p.beta},   {"K", p.K},         {"chi", p.chi},       {"pexp", p.pexp},
          {"guard_threshold", p.guard_threshold}};
}

/// Atmospheric boundary-layer scenario: n = 1e21 points, Kn = 1e-8, tau = 1.
inline ScenarioParams atmospheric_preset() {
  ScenarioParams p;
  p.n = 1e21;
  p.Q = 27;
  p.k = 3;
  p.kn_tau = 1e-8;
  p.t_c = 1e-10;
  p.T_phys = 3600.0;
  p.L = 1e3;
  p.e_r = 340.0;
  p.epsilon = 1e-3;
  return p;
}

struct Estimate {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> factors;

  [[nodiscard]] double factor(const std::string& name) const {
    for (const auto& [k, v] : factors) {
      if (k == name) return v;
    }
    throw UsageError("estimate has no factor '" + name + "'");
  }
};

/// ||C|| kappa_J g T s [log(kappa_J s g beta T ||C|| N / epsilon)]^pexp, plus
/// the condensed t_c^-1 T_phys [log(n / epsilon)]^pexp form.
inline Estimate berry_estimate(const ScenarioParams& p) {
  p.validate();
  const double g = p.g_eff();
  const double T = p.T_lattice();
  const double C = p.norm_C();
  const double N = p.N();
  const double arg = p.kappa_J * p.s * g * p.beta * T * C * N / p.epsilon;
  const double polylog = std::pow(std::log(arg), p.pexp);
  Estimate e;
  e.value = C * p.kappa_J * g * T * p.s * polylog;
  e.factors = {{"norm_C", C},     {"kappa_J", p.kappa_J}, {"g", g},          {"T", T},
               {"s", p.s},        {"beta", p.beta},       {"N", N},          {"polylog", polylog},
               {"log_argument", arg},
               {"condensed", std::pow(std::log(p.n / p.epsilon), p.pexp) * p.T_phys / p.t_c},
               {"guard", p.guard_value()}};
  return e;
}

/// t_c^-1 T_phys 3 sqrt(k) exp(varrho T_phys^{3/5} / (e_r sqrt(K chi))) [log(n/eps)]^pexp.
inline Estimate krovi_estimate(const ScenarioParams& p, double varrho) {
  p.validate();
  if (varrho < 0.0 || !std::isfinite(varrho)) throw DomainError("krovi_estimate: varrho must be non-negative");
  const double g = 3.0 * std::sqrt(static_cast<double>(p.k));
  const double expo = varrho * std::pow(p.T_phys, 0.6) / (p.e_r * std::sqrt(p.K * p.chi));
  const double exp_term = std::exp(expo);
  const double polylog = std::pow(std::log(p.n / p.epsilon), p.pexp);
  Estimate e;
  e.value = p.T_phys / p.t_c * g * exp_term * polylog;
  e.factors = {{"inv_t_c", 1.0 / p.t_c}, {"T_phys", p.T_phys}, {"g", g},         {"exponent", expo},
               {"exp_term", exp_term},   {"polylog", polylog}, {"guard", p.guard_value()}};
  return e;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

/// Parses "name=start:stop:log" or "name=start:stop:lin", with an optional
/// fourth field giving the number of points (default one per decade for log,
/// 11 for lin).
inline SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like name=start:stop:log");
  SweepSpec s;
  s.param = text.substr(0, eq);
  std::vector<std::string> parts;
  std::stringstream ss(text.substr(eq + 1));
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() < 3 || parts.size() > 4) throw ConfigError("sweep must look like name=start:stop:log[:count]");
  double a = 0.0, b = 0.0;
  try {
    a = std::stod(parts[0]);
    b = std::stod(parts[1]);
  } catch (const std::exception&) {
    throw ConfigError("sweep bounds must be numbers");
  }
  const std::string& scale = parts[2];
  if (scale != "log" && scale != "lin") throw ConfigError("sweep scale must be log or lin");
  if (scale == "log" && !(a > 0.0 && b > 0.0)) throw ConfigError("log sweep bounds must be positive");
  int count = 0;
  if (parts.size() == 4) {
    try {
      count = std::stoi(parts[3]);
    } catch (const std::exception&) {
      throw ConfigError("sweep count must be an integer");
    }
  } else {
    count = scale == "log" ? static_cast<int>(std::lround(std::abs(std::log10(b / a)))) + 1 : 11;
  }
  if (count < 1) throw ConfigError("sweep count must be >= 1");
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    s.values.push_back(scale == "log" ? a * std::pow(b / a, f) : a + (b - a) * f);
  }
  return s;
}

/// Sets a named scenario field (numeric fields and k).
inline void set_scenario_field(ScenarioParams& p, const std::string& name, double value) {
  nlohmann::json j;
  if (name == "k") {
    j["k"] = static_cast<int>(std::lround(value));
  } else {
    j[name] = value;
  }
  p = scenario_from_json(j, p);
}

}  // namespace clbm

#endif  // CLBM_COMPLEXITY_HPP_
