#pragma once

// Littlewood-Paley pieces: dyadic bands, the band-pass cutoff at frequency mu,
// and the partition of frequency space into cells of width t^{-1/2}.

#include <cmath>
#include <vector>

#include "wps/core/grid_function.hpp"

namespace wps {

// e^{-1/s} for s > 0, else 0.
inline double bump_tail(double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; }

// Smooth step: 1 on [0,1], 0 on [2,inf).
inline double smooth_step(double r) {
  const double a = bump_tail(2.0 - r), b = bump_tail(r - 1.0);
  return a / (a + b);
}

// beta_0 = chi(r), beta_j = chi(r/2^j) - chi(r/2^{j-1}); beta_j lives on [2^{j-1}, 2^{j+1}].
inline double dyadic_multiplier(int j, double r) {
  if (j == 0) return smooth_step(r);
  return smooth_step(r / std::ldexp(1.0, j)) - smooth_step(r / std::ldexp(1.0, j - 1));
}

// 1 on [mu/4, 4 mu], 0 outside [mu/8, 8 mu].
inline double band_multiplier(double mu, double r) {
  return smooth_step(r / (4.0 * mu)) * (1.0 - smooth_step(8.0 * r / mu));
}

// Compact bump e^{-1/(1-s^2)} on (-1, 1).
inline double cell_bump(double s) { return std::abs(s) < 1 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

// phi(s) = b(s) / sum_j b(s - j); translates phi(. - m) sum to one.
inline double cell_profile(double s) {
  const double b = cell_bump(s);
  if (b == 0.0) return 0.0;
  const double fl = std::floor(s);
  double den = 0;
  for (int j = -2; j <= 2; ++j) den += cell_bump(s - (fl + j));
  return b / den;
}

inline double lattice_norm(const Lattice<1>& k) { return std::abs(static_cast<double>(k[0])); }
inline double lattice_norm(const Lattice<2>& k) { return std::hypot(static_cast<double>(k[0]), static_cast<double>(k[1])); }

template <int Dim>
struct FrequencyCutoff {
  enum class Kind { DyadicBand, BandPass, Cell };
  Kind kind = Kind::DyadicBand;
  int band = 0;            // DyadicBand: j
  double mu = 0;           // BandPass
  double t = 0;            // Cell: time scale
  Lattice<Dim> cell{};     // Cell: index m

  double operator()(const Vec<Dim>& xi) const {
    switch (kind) {
      case Kind::DyadicBand:
        return dyadic_multiplier(band, xi.norm());
      case Kind::BandPass:
        return band_multiplier(mu, xi.norm());
      case Kind::Cell: {
        const double rt = std::sqrt(t);
        double v = 1;
        for (int d = 0; d < Dim; ++d) v *= cell_profile(rt * xi[d] - cell[d]);
        return v;
      }
    }
    return 0;
  }

  // Center t^{-1/2} m of a cell.
  Vec<Dim> center() const {
    Vec<Dim> c;
    for (int d = 0; d < Dim; ++d) c[d] = cell[d] / std::sqrt(t);
    return c;
  }

  // Radial (or, for cells, axis-0) profile sampled at `count` points on [0, rmax].
  std::vector<double> tabulate(double rmax, int count) const {
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i) {
      Vec<Dim> xi = Vec<Dim>::Zero();
      xi[0] = rmax * i / (count - 1);
      v[i] = (*this)(xi);
    }
    return v;
  }
};

template <int Dim>
FrequencyCutoff<Dim> dyadic_band(int j) {
  FrequencyCutoff<Dim> c;
  c.kind = FrequencyCutoff<Dim>::Kind::DyadicBand;
  c.band = j;
  return c;
}

template <int Dim>
FrequencyCutoff<Dim> band_pass(double mu) {
  FrequencyCutoff<Dim> c;
  c.kind = FrequencyCutoff<Dim>::Kind::BandPass;
  c.mu = mu;
  return c;
}

// Number of dyadic bands needed to cover every frequency of an n-point grid.
template <int Dim>
int dyadic_band_count(int n) {
  const double rmax = 0.5 * n * std::sqrt(static_cast<double>(Dim));
  int J = 0;
  while (std::ldexp(1.0, J) < rmax) ++J;
  return J + 1;
}

template <int Dim>
std::vector<GridFunction<Dim>> lp_partition(const GridFunction<Dim>& f) {
  const int bands = dyadic_band_count<Dim>(f.size());
  const auto spec = f.spectrum();
  std::vector<GridFunction<Dim>> out;
  out.reserve(bands);
  for (int j = 0; j < bands; ++j) {
    auto c = spec;
    for (std::size_t idx = 0; idx < c.size(); ++idx) c[idx] *= dyadic_multiplier(j, lattice_norm(f.frequency(idx)));
    out.push_back(GridFunction<Dim>::from_spectrum(f.size(), std::move(c)));
  }
  return out;
}

template <int Dim>
GridFunction<Dim> band_project(const GridFunction<Dim>& f, double mu) {
  return f.fourier_multiply([&](const Lattice<Dim>& k) -> cd { return band_multiplier(mu, lattice_norm(k)); });
}

// Cells phi_m(zeta) = phi(t^{1/2} zeta - m) meeting the box [lo, hi]^Dim.
// Tensor-product cells in two dimensions.
template <int Dim>
std::vector<FrequencyCutoff<Dim>> cell_partition(double t, double lo, double hi) {
  require(t > 0, "cell_partition: t must be positive");
  require(hi > lo, "cell_partition: empty window");
  const double rt = std::sqrt(t);
  // m - 1 < rt hi and m + 1 > rt lo
  const int m0 = static_cast<int>(std::floor(rt * lo - 1.0)) + 1;
  const int m1 = static_cast<int>(std::ceil(rt * hi + 1.0)) - 1;
  std::vector<FrequencyCutoff<Dim>> cells;
  FrequencyCutoff<Dim> c;
  c.kind = FrequencyCutoff<Dim>::Kind::Cell;
  c.t = t;
  if constexpr (Dim == 1) {
    for (int m = m0; m <= m1; ++m) {
      c.cell = {m};
      cells.push_back(c);
    }
  } else {
    for (int a = m0; a <= m1; ++a)
      for (int b = m0; b <= m1; ++b) {
        c.cell = {a, b};
        cells.push_back(c);
      }
  }
  return cells;
}

}  // namespace wps
