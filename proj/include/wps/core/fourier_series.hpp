#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wps/core/grid_function.hpp"

namespace wps {

template <int Dim>
struct FourierMode {
  Vec<Dim> k;  // wavevector; integer on the torus, scaled after rescaling
  cd c;
};

// Value and first two derivatives of a real function at a point.
template <int Dim>
struct Jet {
  double value = 0;
  Vec<Dim> grad = Vec<Dim>::Zero();
  Mat<Dim> hess = Mat<Dim>::Zero();
};

// Sparse trigonometric sum f(x) = Re sum_m c_m e^{i k_m.x}. Coefficient
// functions are real, so modes are stored in +-k pairs and the real part is
// exact up to rounding.
template <int Dim>
class FourierSeries {
 public:
  FourierSeries() = default;
  explicit FourierSeries(std::vector<FourierMode<Dim>> modes) : modes_(std::move(modes)) {}

  static FourierSeries constant(double v) {
    return FourierSeries({FourierMode<Dim>{Vec<Dim>::Zero(), cd(v, 0.0)}});
  }

  // Every nonzero coefficient of a real grid function.
  static FourierSeries from_grid(const GridFunction<Dim>& f) {
    const auto c = f.spectrum();
    std::vector<FourierMode<Dim>> modes;
    for (std::size_t idx = 0; idx < c.size(); ++idx) {
      if (c[idx] == 0.0) continue;
      const auto k = f.frequency(idx);
      Vec<Dim> kv;
      for (int d = 0; d < Dim; ++d) kv[d] = k[d];
      modes.push_back({kv, c[idx]});
    }
    return FourierSeries(std::move(modes));
  }

  const std::vector<FourierMode<Dim>>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }

  double max_wavenumber() const {
    double m = 0;
    for (const auto& md : modes_) m = std::max(m, md.k.norm());
    return m;
  }

  double operator()(const Vec<Dim>& x) const {
    double s = 0;
    for (const auto& md : modes_) s += (md.c * std::polar(1.0, md.k.dot(x))).real();
    return s;
  }

  Jet<Dim> jet(const Vec<Dim>& x) const {
    Jet<Dim> j;
    for (const auto& md : modes_) {
      const cd e = md.c * std::polar(1.0, md.k.dot(x));
      j.value += e.real();
      // d/dx (c e^{ikx}) = i k c e^{ikx};  Re(i e) = -Im(e)
      j.grad -= md.k * e.imag();
      j.hess -= md.k * md.k.transpose() * e.real();
    }
    return j;
  }

  // Mixed partial derivative of multi-order alpha.
  double derivative(const Vec<Dim>& x, const Lattice<Dim>& alpha) const {
    int order = 0;
    for (int d = 0; d < Dim; ++d) order += alpha[d];
    const cd unit_pow = std::pow(cd(0, 1), order);
    double s = 0;
    for (const auto& md : modes_) {
      double kp = 1;
      for (int d = 0; d < Dim; ++d) kp *= std::pow(md.k[d], alpha[d]);
      s += (md.c * unit_pow * kp * std::polar(1.0, md.k.dot(x))).real();
    }
    return s;
  }

  // Restriction to modes with |k| < radius.
  FourierSeries truncated(double radius) const {
    std::vector<FourierMode<Dim>> kept;
    for (const auto& md : modes_)
      if (md.k.norm() < radius) kept.push_back(md);
    return FourierSeries(std::move(kept));
  }

  // x -> f(s x)
  FourierSeries dilated(double s) const {
    auto out = modes_;
    for (auto& md : out) md.k *= s;
    return FourierSeries(std::move(out));
  }

  GridFunction<Dim> sample(int n) const {
    return GridFunction<Dim>::from_function(n, [&](const Vec<Dim>& x) { return cd((*this)(x), 0.0); });
  }

 private:
  std::vector<FourierMode<Dim>> modes_;
};

}  // namespace wps
