#pragma once

// Named coefficient fields and the plain-text config format that selects them.
//
// Config: one `key = value` per line, '#' starts a comment. Keys: name (flat,
// perturbed, lipschitz, custom), dim, c0, lambda, mu, n (grid size), and for
// custom fields g11, g12, g22, rho, b1, b2. A coefficient list is a
// '|'-separated sequence of modes "k1 [k2] re [im]", read as
// f(x) = Re sum c e^{i k.x}.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "wps/coeffield.hpp"

namespace wps {

template <int Dim>
FourierSeries<Dim> cosine_mode(const Vec<Dim>& k, double amp, double phase) {
  return FourierSeries<Dim>({FourierMode<Dim>{k, std::polar(amp, phase)}});
}

template <int Dim>
FourierSeries<Dim> operator+(const FourierSeries<Dim>& a, const FourierSeries<Dim>& b) {
  auto m = a.modes();
  m.insert(m.end(), b.modes().begin(), b.modes().end());
  return FourierSeries<Dim>(std::move(m));
}

// Highest wavenumber of the perturbed preset; kept strictly below mu^{1/2}.
inline int perturbed_wavenumber(double mu) {
  return std::max(1, static_cast<int>(std::ceil(std::sqrt(mu))) - 1);
}

// Smooth metric with ||g - I||_{C^2} ~ c0 and frequency support below
// mu^{1/2}; the top mode has amplitude K^{-2} so second derivatives stay O(c0).
template <int Dim>
CoefficientField<Dim> perturbed_field(double mu, int n, double c0 = kDefaultC0) {
  const int K = perturbed_wavenumber(mu);
  const double top = 1.0 / (static_cast<double>(K) * K);
  constexpr double half_pi = 0.5 * std::numbers::pi;
  if constexpr (Dim == 1) {
    const Vec<1> k1(1.0), kK(static_cast<double>(K)), k0(0.0);
    auto g = cosine_mode<1>(k0, 1.0, 0) + cosine_mode<1>(k1, 0.5 * c0, 0) + cosine_mode<1>(kK, 0.5 * c0 * top, 0.7);
    auto rho = cosine_mode<1>(k0, 1.0, 0) + cosine_mode<1>(k1, 0.25 * c0, -half_pi);
    return CoefficientField<1>::from_series(n, {g}, rho, c0);
  } else {
    const Vec<2> k0(0, 0), e1(1, 0), e2(0, 1), e12(1, 1), Ke1(K, 0), Ke2(0, K);
    auto g11 = cosine_mode<2>(k0, 1.0, 0) + cosine_mode<2>(e1, 0.5 * c0, 0) + cosine_mode<2>(Ke2, 0.5 * c0 * top, 0.7);
    auto g22 = cosine_mode<2>(k0, 1.0, 0) + cosine_mode<2>(e2, 0.5 * c0, 0) + cosine_mode<2>(Ke1, 0.5 * c0 * top, 0.3);
    auto g12 = cosine_mode<2>(e12, 0.125 * c0, -half_pi) + cosine_mode<2>(Ke1, 0.125 * c0 * top, -half_pi);
    auto rho = cosine_mode<2>(k0, 1.0, 0) + cosine_mode<2>(e1, 0.25 * c0, -half_pi) +
               cosine_mode<2>(e2, 0.25 * c0, -half_pi);
    return CoefficientField<2>::from_series(n, {g11, g12, g22}, rho, c0);
  }
}

// g = 1 + eps |sin x_n|: the double of a half metric with a boundary kink.
template <int Dim>
CoefficientField<Dim> lipschitz_field(int n, double eps, double c0 = kDefaultC0) {
  GridFunction<Dim> probe(n);
  std::array<std::vector<double>, CoefficientField<Dim>::kComponents> g;
  for (auto& c : g) c.assign(probe.count(), 0.0);
  for (std::size_t idx = 0; idx < probe.count(); ++idx) {
    const double v = 1.0 + eps * std::abs(std::sin(probe.point(idx)[Dim - 1]));
    for (int i = 0; i < Dim; ++i) g[CoefficientField<Dim>::component(i, i)][idx] = v;
  }
  return CoefficientField<Dim>::from_samples(n, std::move(g), std::vector<double>(probe.count(), 1.0), c0);
}

struct PresetConfig {
  std::string name = "flat";
  int dim = 1;
  double c0 = kDefaultC0;
  double mu = 32;
  std::optional<double> lambda;
  int n = 0;  // 0: choose from mu
  std::map<std::string, std::string> coefficients;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline PresetConfig parse_preset_config(std::istream& is) {
  PresetConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "name" || key == "preset") cfg.name = val;
      else if (key == "dim") cfg.dim = std::stoi(val);
      else if (key == "c0") cfg.c0 = std::stod(val);
      else if (key == "mu") cfg.mu = std::stod(val);
      else if (key == "lambda") cfg.lambda = std::stod(val);
      else if (key == "n") cfg.n = std::stoi(val);
      else if (key == "g11" || key == "g12" || key == "g22" || key == "rho" || key == "b1" || key == "b2")
        cfg.coefficients[key] = val;
      else
        throw PreconditionError("unknown key '" + key + "'");
    } catch (const std::logic_error& e) {
      throw PreconditionError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  require(cfg.dim == 1 || cfg.dim == 2, "config: dim must be 1 or 2");
  if (cfg.lambda) cfg.mu = std::pow(*cfg.lambda, 2.0 / 3.0);
  return cfg;
}

inline PresetConfig load_preset_config(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open config " + path);
  return parse_preset_config(is);
}

template <int Dim>
FourierSeries<Dim> parse_series(const std::string& text) {
  std::vector<FourierMode<Dim>> modes;
  std::stringstream all(text);
  std::string entry;
  while (std::getline(all, entry, '|')) {
    std::stringstream ss(entry);
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    require(v.size() == Dim + 1 || v.size() == Dim + 2, "coefficient entry '" + trim(entry) + "' malformed");
    FourierMode<Dim> m;
    for (int d = 0; d < Dim; ++d) m.k[d] = v[d];
    m.c = cd(v[Dim], v.size() == Dim + 2 ? v[Dim + 1] : 0.0);
    modes.push_back(m);
  }
  return FourierSeries<Dim>(std::move(modes));
}

// Default field grid: resolves the coefficients and keeps dense oracles feasible.
inline int default_field_grid(int dim, double mu) {
  if (dim == 2) return 64;
  int n = 64;
  while (n < 16 * mu && n < 1024) n *= 2;
  return n;
}

template <int Dim>
CoefficientField<Dim> make_preset(const PresetConfig& cfg) {
  require(cfg.dim == Dim, "make_preset: dimension mismatch");
  const int n = cfg.n > 0 ? cfg.n : default_field_grid(Dim, cfg.mu);
  if (cfg.name == "flat") return CoefficientField<Dim>::flat(n, cfg.c0);
  if (cfg.name == "perturbed") return perturbed_field<Dim>(cfg.mu, n, cfg.c0);
  if (cfg.name == "lipschitz") return lipschitz_field<Dim>(n, cfg.c0, cfg.c0);
  if (cfg.name == "custom") {
    auto get = [&](const std::string& key, double diag) {
      auto it = cfg.coefficients.find(key);
      if (it != cfg.coefficients.end()) return parse_series<Dim>(it->second);
      return diag != 0 ? FourierSeries<Dim>::constant(diag) : FourierSeries<Dim>();
    };
    std::array<FourierSeries<Dim>, CoefficientField<Dim>::kComponents> g;
    if constexpr (Dim == 1) {
      g = {get("g11", 1.0)};
    } else {
      g = {get("g11", 1.0), get("g12", 0.0), get("g22", 1.0)};
    }
    auto field = CoefficientField<Dim>::from_series(n, g, get("rho", 1.0), cfg.c0);
    std::array<FourierSeries<Dim>, Dim> b;
    for (int i = 0; i < Dim; ++i) b[i] = get("b" + std::to_string(i + 1), 0.0);
    field = field.with_drift(b);
    field.validate();
    return field;
  }
  throw PreconditionError("unknown preset '" + cfg.name + "'");
}

}  // namespace wps
