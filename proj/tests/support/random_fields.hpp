#pragma once

#include <cmath>
#include <random>

#include "wps/core/grid_function.hpp"
#include "wps/lpdecomp.hpp"

namespace wps::testing {

// Gaussian random spectrum on lo <= |k| <= hi.
template <int Dim>
GridFunction<Dim> random_band(int n, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  GridFunction<Dim> probe(n);
  std::vector<cd> c(probe.count());
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    const double k = lattice_norm(probe.frequency(idx));
    if (k >= lo && k <= hi) c[idx] = cd(nd(rng), nd(rng));
  }
  return GridFunction<Dim>::from_spectrum(n, std::move(c));
}

// Gaussian random spectrum in the box |k - center|_inf <= radius.
template <int Dim>
GridFunction<Dim> random_box(int n, const Lattice<Dim>& center, int radius, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  GridFunction<Dim> probe(n);
  std::vector<cd> c(probe.count());
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    const auto k = probe.frequency(idx);
    bool in = true;
    for (int d = 0; d < Dim; ++d) in = in && std::abs(k[d] - center[d]) <= radius;
    if (in) c[idx] = cd(nd(rng), nd(rng));
  }
  return GridFunction<Dim>::from_spectrum(n, std::move(c));
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace wps::testing
