#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "wps/core/error.hpp"

namespace wps {

using cd = std::complex<double>;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;
template <int Dim>
using Lattice = std::array<int, Dim>;

// Signed wavenumber of FFT slot i on an n-point axis. The Nyquist slot maps
// to -n/2.
inline int wavenumber(int i, int n) { return i < (n + 1) / 2 ? i : i - n; }

// FFT slot of signed wavenumber k (requires -n/2 <= k < n/2).
inline int slot(int k, int n) { return k >= 0 ? k : k + n; }

inline std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

namespace detail {

// In-place multidimensional FFT on a row-major n^Dim array.
// forward: X_k = sum_j x_j e^{-2 pi i k.j/n} (unscaled)
// inverse: x_j = sum_k X_k e^{+2 pi i k.j/n} (unscaled)
template <int Dim>
void fft_nd(std::vector<cd>& data, int n, bool inverse, Eigen::FFT<double>& fft) {
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cd> line(static_cast<std::size_t>(n)), out;
  const std::size_t total = data.size();
  std::size_t stride = 1;
  for (int axis = Dim - 1; axis >= 0; --axis) {
    const std::size_t block = stride * static_cast<std::size_t>(n);
    for (std::size_t outer = 0; outer < total; outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        for (int j = 0; j < n; ++j) line[j] = data[outer + inner + j * stride];
        if (inverse)
          fft.inv(out, line);
        else
          fft.fwd(out, line);
        for (int j = 0; j < n; ++j) data[outer + inner + j * stride] = out[j];
      }
    }
    stride *= static_cast<std::size_t>(n);
  }
}

template <int Dim>
void fft_nd(std::vector<cd>& data, int n, bool inverse) {
  Eigen::FFT<double> fft;
  fft_nd<Dim>(data, n, inverse, fft);
}

}  // namespace detail

// Smallest 2^a 3^b 5^c >= n.
inline int next_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

// Complex samples on the uniform periodic grid {2 pi j / n}^Dim of the torus
// [0, 2 pi)^Dim, row-major (axis 0 slowest). Spectral coefficients follow
// f(x) = sum_k fhat_k e^{i k.x}.
template <int Dim>
class GridFunction {
  static_assert(Dim == 1 || Dim == 2, "only n = 1, 2 are supported");

 public:
  GridFunction() = default;
  explicit GridFunction(int n) : n_(n), values_(ipow(n, Dim)) {
    require(n >= 2, "GridFunction: need at least two points per axis");
  }
  GridFunction(int n, std::vector<cd> values) : n_(n), values_(std::move(values)) {
    require(values_.size() == ipow(n, Dim), "GridFunction: sample count does not match grid");
  }

  template <class F>
  static GridFunction from_function(int n, F&& f) {
    GridFunction g(n);
    for (std::size_t idx = 0; idx < g.count(); ++idx) g.values_[idx] = f(g.point(idx));
    return g;
  }

  // Inverse of spectrum(): coefficients in FFT order.
  static GridFunction from_spectrum(int n, std::vector<cd> coeffs) {
    require(coeffs.size() == ipow(n, Dim), "from_spectrum: coefficient count does not match grid");
    detail::fft_nd<Dim>(coeffs, n, /*inverse=*/true);
    return GridFunction(n, std::move(coeffs));
  }

  int size() const { return n_; }
  std::size_t count() const { return values_.size(); }
  double spacing() const { return kTwoPi / n_; }
  double cell_volume() const { return std::pow(spacing(), Dim); }

  Lattice<Dim> index(std::size_t idx) const {
    Lattice<Dim> ij{};
    for (int d = Dim - 1; d >= 0; --d) {
      ij[d] = static_cast<int>(idx % static_cast<std::size_t>(n_));
      idx /= static_cast<std::size_t>(n_);
    }
    return ij;
  }
  std::size_t flat(const Lattice<Dim>& ij) const {
    std::size_t idx = 0;
    for (int d = 0; d < Dim; ++d) idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ij[d]);
    return idx;
  }
  Vec<Dim> point(std::size_t idx) const {
    const auto ij = index(idx);
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = spacing() * ij[d];
    return x;
  }
  // Signed wavenumber vector of FFT slot idx.
  Lattice<Dim> frequency(std::size_t idx) const {
    auto ij = index(idx);
    for (int d = 0; d < Dim; ++d) ij[d] = wavenumber(ij[d], n_);
    return ij;
  }
  std::size_t spectral_index(const Lattice<Dim>& k) const {
    Lattice<Dim> s{};
    for (int d = 0; d < Dim; ++d) s[d] = slot(k[d], n_);
    return flat(s);
  }

  std::span<const cd> values() const { return values_; }
  std::span<cd> values() { return values_; }
  cd& operator[](std::size_t i) { return values_[i]; }
  const cd& operator[](std::size_t i) const { return values_[i]; }

  std::vector<cd> spectrum() const {
    std::vector<cd> c = values_;
    detail::fft_nd<Dim>(c, n_, /*inverse=*/false);
    const double scale = 1.0 / static_cast<double>(count());
    for (auto& v : c) v *= scale;
    return c;
  }

  // Same trigonometric polynomial sampled on an m-point grid; frequencies not
  // representable on the target grid are dropped.
  GridFunction resample(int m) const {
    const auto c = spectrum();
    GridFunction out(m);
    std::vector<cd> d(out.count());
    for (std::size_t idx = 0; idx < c.size(); ++idx) {
      const auto k = frequency(idx);
      bool ok = true;
      for (int a = 0; a < Dim; ++a) ok = ok && wavenumber(slot(k[a], m), m) == k[a] && std::abs(k[a]) < m;
      if (ok) d[out.spectral_index(k)] = c[idx];
    }
    return from_spectrum(m, std::move(d));
  }

  // Multiply the spectrum by m(k) for every lattice frequency k.
  template <class M>
  GridFunction fourier_multiply(M&& m) const {
    auto c = spectrum();
    for (std::size_t idx = 0; idx < c.size(); ++idx) c[idx] *= m(frequency(idx));
    return from_spectrum(n_, std::move(c));
  }

  // Spectral partial derivative along `axis`; the Nyquist mode is dropped so
  // that the discrete derivative stays antisymmetric.
  GridFunction derivative(int axis) const {
    return fourier_multiply([&](const Lattice<Dim>& k) -> cd {
      if (2 * k[axis] == -n_) return 0.0;
      return cd(0.0, static_cast<double>(k[axis]));
    });
  }

  double l2_norm() const {
    double s = 0;
    for (const auto& v : values_) s += std::norm(v);
    return std::sqrt(s * cell_volume());
  }
  double sup_norm() const {
    double s = 0;
    for (const auto& v : values_) s = std::max(s, std::abs(v));
    return s;
  }
  // <f, h> = int f conj(h) dx
  cd inner(const GridFunction& h) const {
    require(h.n_ == n_, "inner: grid mismatch");
    cd s = 0;
    for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * std::conj(h.values_[i]);
    return s * cell_volume();
  }
  // Weighted inner product int f conj(h) w dx.
  cd inner(const GridFunction& h, std::span<const double> w) const {
    require(h.n_ == n_ && w.size() == values_.size(), "inner: grid mismatch");
    cd s = 0;
    for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * std::conj(h.values_[i]) * w[i];
    return s * cell_volume();
  }

  // Trigonometric interpolant evaluated at an arbitrary point.
  cd evaluate(const Vec<Dim>& x) const {
    const auto c = spectrum();
    cd s = 0;
    for (std::size_t idx = 0; idx < c.size(); ++idx) {
      if (c[idx] == 0.0) continue;
      const auto k = frequency(idx);
      double phase = 0;
      for (int d = 0; d < Dim; ++d) phase += k[d] * x[d];
      s += c[idx] * std::polar(1.0, phase);
    }
    return s;
  }

  GridFunction& operator+=(const GridFunction& o) {
    require(o.n_ == n_, "grid mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& o) {
    require(o.n_ == n_, "grid mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  GridFunction& operator*=(cd s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(cd s, GridFunction a) { return a *= s; }

 private:
  int n_ = 0;
  std::vector<cd> values_;
};

}  // namespace wps
