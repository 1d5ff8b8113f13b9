#pragma once

// Closed-form references for the constant metric.

#include <cmath>
#include <complex>

#include "wps/core/grid_function.hpp"
#include "wps/core/numerics.hpp"
#include "wps/lpdecomp.hpp"
#include "wps/wavepacket.hpp"

namespace wps::testing {

// Exact flat evolution: uhat(t, k) = e^{i t |k|^2} uhat(0, k).
template <int Dim>
GridFunction<Dim> flat_evolution(const GridFunction<Dim>& f, double t) {
  return f.fourier_multiply([&](const Lattice<Dim>& k) {
    double k2 = 0;
    for (int d = 0; d < Dim; ++d) k2 += static_cast<double>(k[d]) * k[d];
    return std::polar(1.0, t * k2);
  });
}

// Flat 1D kernel of the source-localized parametrix on the line:
//   K(t, r) = (2 pi)^{-1} int e^{ikr + itk^2} m(k, t) dk,
//   m(k, t) = mu^{-1/2} int S(zeta) ghat^2((k - zeta)/mu^{1/2}) e^{-it(k - zeta)^2} dzeta.
class FlatKernelOracle1D {
 public:
  FlatKernelOracle1D(double mu, double t, double dk = 0.02) : mu_(mu), t_(t) {
    const WindowFunction w(1);
    const double rm = std::sqrt(mu), kmax = 8 * mu + rm;
    const auto inner = gauss_legendre(64, -1.0, 1.0);
    for (double k = -kmax; k <= kmax; k += dk) {
      std::complex<double> m = 0;
      for (std::size_t i = 0; i < inner.nodes.size(); ++i) {
        const double eta = inner.nodes[i], zeta = k - rm * eta, g = w.fourier(std::abs(eta));
        m += inner.weights[i] * band_multiplier(mu, std::abs(zeta)) * g * g * std::polar(1.0, -t * mu * eta * eta);
      }
      ks_.push_back(k);
      ms_.push_back(m * dk);  // d zeta = mu^{1/2} d eta cancels mu^{-1/2}
    }
  }

  std::complex<double> operator()(double r) const {
    std::complex<double> s = 0;
    for (std::size_t i = 0; i < ks_.size(); ++i) s += ms_[i] * std::polar(1.0, ks_[i] * r + t_ * ks_[i] * ks_[i]);
    return s / kTwoPi;
  }

 private:
  double mu_, t_;
  std::vector<double> ks_;
  std::vector<std::complex<double>> ms_;
};

}  // namespace wps::testing
