#pragma once

// Wave-packet transform at frequency scale mu on the torus:
//
//   T f(x, xi) = mu^{n/4} int e^{-i xi.(z - x)} g(mu^{1/2}(z - x)) f(z) dz
//              = mu^{-n/4} sum_k fhat_k e^{i k.x} ghat((xi - k) / mu^{1/2}),
//
// with ghat a radial bump supported in the unit ball. The phase-space grid is
// a uniform x grid on the torus times a finite xi lattice; its quadrature
// weight is calibrated so that T is an exact discrete isometry.

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "wps/coeffield.hpp"
#include "wps/core/grid_function.hpp"
#include "wps/core/numerics.hpp"
#include "wps/core/record.hpp"
#include "wps/lpdecomp.hpp"

namespace wps {

class WindowFunction {
 public:
  explicit WindowFunction(int dim) : dim_(dim) {
    require(dim == 1 || dim == 2, "WindowFunction: dimension must be 1 or 2");
    // int ghat^2 = 1, i.e. ||g||_{L^2} = (2 pi)^{-n/2}
    const auto q = gauss_legendre(400, 0.0, 1.0);
    double s = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const double r = q.nodes[i], b = std::exp(-2.0 / (1.0 - r * r));
      s += q.weights[i] * b * (dim == 1 ? 2.0 : kTwoPi * r);
    }
    scale_ = 1.0 / std::sqrt(s);
  }

  int dim() const { return dim_; }
  double normalization() const { return scale_; }

  // ghat at radius |eta|; exactly zero for |eta| >= 1.
  double fourier(double r) const { return r < 1.0 ? scale_ * std::exp(-1.0 / (1.0 - r * r)) : 0.0; }
  template <int Dim>
  double fourier(const Vec<Dim>& eta) const {
    return fourier(eta.norm());
  }

  // g(r) = (2 pi)^{-n} int ghat(eta) e^{i eta.x} d eta, radial.
  double spatial(double r) const {
    const auto& q = spatial_rule();
    double s = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const double e = q.nodes[i];
      if (dim_ == 1)
        s += q.weights[i] * fourier(e) * std::cos(e * r);
      else
        s += q.weights[i] * fourier(e) * std::cyl_bessel_j(0.0, e * r) * e;
    }
    return dim_ == 1 ? s / std::numbers::pi : s / kTwoPi;
  }

  // int ghat^2 by quadrature (must be 1).
  double fourier_mass() const {
    const auto q = gauss_legendre(600, 0.0, 1.0);
    double s = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const double r = q.nodes[i], v = fourier(r);
      s += q.weights[i] * v * v * (dim_ == 1 ? 2.0 : kTwoPi * r);
    }
    return s;
  }

  // (r, ghat(r)) and (r, g(r)) tables.
  std::vector<std::pair<double, double>> fourier_profile(int count) const {
    std::vector<std::pair<double, double>> v;
    for (int i = 0; i < count; ++i) {
      const double r = static_cast<double>(i) / (count - 1);
      v.emplace_back(r, fourier(r));
    }
    return v;
  }
  std::vector<std::pair<double, double>> spatial_profile(double rmax, int count) const {
    std::vector<std::pair<double, double>> v;
    for (int i = 0; i < count; ++i) {
      const double r = rmax * i / (count - 1);
      v.emplace_back(r, spatial(r));
    }
    return v;
  }

 private:
  static const QuadratureRule& spatial_rule() {
    static const QuadratureRule q = gauss_legendre(256, 0.0, 1.0);
    return q;
  }
  int dim_;
  double scale_ = 1;
};

inline WindowFunction make_window(int dim) { return WindowFunction(dim); }

template <int Dim>
class PhaseSpaceGrid {
 public:
  // x: `xpoints` per axis on the torus. xi: lattice (lo[d] + j) * h_xi,
  // j < count[d], with h_xi = 1 / xi_refine.
  PhaseSpaceGrid(double mu, int xpoints, Lattice<Dim> xi_lo, Lattice<Dim> xi_count, int xi_refine = 1)
      : mu_(mu), m_(xpoints), refine_(xi_refine), lo_(xi_lo), count_(xi_count), window_(Dim) {
    require(mu >= 4, "PhaseSpaceGrid: mu must be at least 4");
    require(xi_refine >= 1, "PhaseSpaceGrid: xi refinement must be positive");
    const double rm = std::sqrt(mu);
    require(spacing_x() <= 0.5 / rm, "PhaseSpaceGrid: x spacing exceeds mu^{-1/2}/2, packets undersampled");
    require(spacing_xi() <= 0.5 * rm, "PhaseSpaceGrid: xi spacing exceeds mu^{1/2}/2, packets undersampled");
    require(m_ > 2 * rm + 2, "PhaseSpaceGrid: x grid aliases packet frequencies");
    for (int d = 0; d < Dim; ++d) require(count_[d] >= 1, "PhaseSpaceGrid: empty xi window");
    xcount_ = ipow(m_, Dim);
    xicount_ = 1;
    for (int d = 0; d < Dim; ++d) xicount_ *= static_cast<std::size_t>(count_[d]);
    // Discrete mass of ghat^2 on the lattice; identical for every integer shift.
    const double step = spacing_xi() / rm;
    const int reach = static_cast<int>(std::ceil(1.0 / step)) + 1;
    double z1 = 0;
    for (int j = -reach; j <= reach; ++j) z1 += std::pow(window_.fourier(std::abs(j * step)), 2);
    double z = 0;
    if constexpr (Dim == 1) {
      z = z1 * step;
    } else {
      for (int a = -reach; a <= reach; ++a)
        for (int b = -reach; b <= reach; ++b) z += std::pow(window_.fourier(std::hypot(a * step, b * step)), 2);
      z *= step * step;
    }
    weight_ = std::pow(spacing_x() * spacing_xi(), Dim) / z;
  }

  // Grid covering frequencies [lo, hi] per axis plus the packet radius.
  static PhaseSpaceGrid covering(double mu, const Vec<Dim>& lo, const Vec<Dim>& hi, double margin = 0) {
    const int m = next_fft_size(static_cast<int>(std::ceil(kTwoPi * 4.0 * std::sqrt(mu))));
    const int refine = std::max(1, static_cast<int>(std::ceil(4.0 / std::sqrt(mu))));
    const double pad = std::sqrt(mu) + margin;
    Lattice<Dim> l{}, c{};
    for (int d = 0; d < Dim; ++d) {
      l[d] = static_cast<int>(std::floor((lo[d] - pad) * refine));
      c[d] = static_cast<int>(std::ceil((hi[d] + pad) * refine)) - l[d] + 1;
    }
    return PhaseSpaceGrid(mu, m, l, c, refine);
  }
  // Symmetric box |xi_d| <= radius.
  static PhaseSpaceGrid symmetric(double mu, double radius) {
    return covering(mu, Vec<Dim>::Constant(-radius), Vec<Dim>::Constant(radius));
  }

  double mu() const { return mu_; }
  int xpoints() const { return m_; }
  int xi_refine() const { return refine_; }
  const Lattice<Dim>& xi_lo() const { return lo_; }
  const Lattice<Dim>& xi_count() const { return count_; }
  double spacing_x() const { return kTwoPi / m_; }
  double spacing_xi() const { return 1.0 / refine_; }
  double weight() const { return weight_; }
  std::size_t x_nodes() const { return xcount_; }
  std::size_t xi_nodes() const { return xicount_; }
  std::size_t size() const { return xcount_ * xicount_; }
  const WindowFunction& window() const { return window_; }

  std::size_t index(std::size_t xi_idx, std::size_t x_idx) const { return xi_idx * xcount_ + x_idx; }

  Lattice<Dim> x_multi(std::size_t x_idx) const {
    Lattice<Dim> ij{};
    for (int d = Dim - 1; d >= 0; --d) {
      ij[d] = static_cast<int>(x_idx % m_);
      x_idx /= m_;
    }
    return ij;
  }
  std::size_t x_flat(const Lattice<Dim>& ij) const {
    std::size_t idx = 0;
    for (int d = 0; d < Dim; ++d) idx = idx * m_ + static_cast<std::size_t>(((ij[d] % m_) + m_) % m_);
    return idx;
  }
  Vec<Dim> x_point(std::size_t x_idx) const {
    const auto ij = x_multi(x_idx);
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = ij[d] * spacing_x();
    return x;
  }
  Lattice<Dim> xi_multi(std::size_t xi_idx) const {
    Lattice<Dim> ij{};
    for (int d = Dim - 1; d >= 0; --d) {
      ij[d] = static_cast<int>(xi_idx % count_[d]);
      xi_idx /= count_[d];
    }
    return ij;
  }
  // -1 if outside the window.
  std::ptrdiff_t xi_flat(const Lattice<Dim>& ij) const {
    std::ptrdiff_t idx = 0;
    for (int d = 0; d < Dim; ++d) {
      if (ij[d] < 0 || ij[d] >= count_[d]) return -1;
      idx = idx * count_[d] + ij[d];
    }
    return idx;
  }
  Vec<Dim> xi_point(std::size_t xi_idx) const {
    const auto ij = xi_multi(xi_idx);
    Vec<Dim> xi;
    for (int d = 0; d < Dim; ++d) xi[d] = (lo_[d] + ij[d]) * spacing_xi();
    return xi;
  }

  bool same_as(const PhaseSpaceGrid& o) const {
    return mu_ == o.mu_ && m_ == o.m_ && refine_ == o.refine_ && lo_ == o.lo_ && count_ == o.count_;
  }

 private:
  double mu_;
  int m_;
  int refine_;
  Lattice<Dim> lo_, count_;
  WindowFunction window_;
  std::size_t xcount_ = 0, xicount_ = 0;
  double weight_ = 0;
};

template <int Dim>
class PhaseSpaceFunction {
 public:
  explicit PhaseSpaceFunction(PhaseSpaceGrid<Dim> grid) : grid_(std::move(grid)), values_(grid_.size()) {}

  const PhaseSpaceGrid<Dim>& grid() const { return grid_; }
  std::span<const cd> values() const { return values_; }
  std::span<cd> values() { return values_; }
  cd& operator[](std::size_t i) { return values_[i]; }
  const cd& operator[](std::size_t i) const { return values_[i]; }
  cd& at(std::size_t xi_idx, std::size_t x_idx) { return values_[grid_.index(xi_idx, x_idx)]; }
  const cd& at(std::size_t xi_idx, std::size_t x_idx) const { return values_[grid_.index(xi_idx, x_idx)]; }

  double l2_norm() const {
    double s = 0;
    for (const auto& v : values_) s += std::norm(v);
    return std::sqrt(s * grid_.weight());
  }
  cd inner(const PhaseSpaceFunction& o) const {
    require(grid_.same_as(o.grid_), "PhaseSpaceFunction: grid mismatch");
    cd s = 0;
    for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * std::conj(o.values_[i]);
    return s * grid_.weight();
  }

  PhaseSpaceFunction& operator+=(const PhaseSpaceFunction& o) {
    require(grid_.same_as(o.grid_), "PhaseSpaceFunction: grid mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  PhaseSpaceFunction& operator-=(const PhaseSpaceFunction& o) {
    require(grid_.same_as(o.grid_), "PhaseSpaceFunction: grid mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  PhaseSpaceFunction& operator*=(cd s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend PhaseSpaceFunction operator+(PhaseSpaceFunction a, const PhaseSpaceFunction& b) { return a += b; }
  friend PhaseSpaceFunction operator-(PhaseSpaceFunction a, const PhaseSpaceFunction& b) { return a -= b; }
  friend PhaseSpaceFunction operator*(cd s, PhaseSpaceFunction a) { return a *= s; }

 private:
  PhaseSpaceGrid<Dim> grid_;
  std::vector<cd> values_;
};

namespace detail {

// Lattice frequencies k with |xi - k| < r, reported as (k, ghat((xi-k)/sqrt(mu))).
template <int Dim, class Visit>
void for_each_packet_frequency(const WindowFunction& w, double mu, const Vec<Dim>& xi, Visit&& visit) {
  const double rm = std::sqrt(mu);
  if constexpr (Dim == 1) {
    const int k0 = static_cast<int>(std::ceil(xi[0] - rm)), k1 = static_cast<int>(std::floor(xi[0] + rm));
    for (int k = k0; k <= k1; ++k) {
      const double v = w.fourier(std::abs(xi[0] - k) / rm);
      if (v != 0.0) visit(Lattice<1>{k}, v);
    }
  } else {
    const int a0 = static_cast<int>(std::ceil(xi[0] - rm)), a1 = static_cast<int>(std::floor(xi[0] + rm));
    for (int a = a0; a <= a1; ++a) {
      const double da = xi[0] - a, rest = std::sqrt(std::max(0.0, mu - da * da));
      const int b0 = static_cast<int>(std::ceil(xi[1] - rest)), b1 = static_cast<int>(std::floor(xi[1] + rest));
      for (int b = b0; b <= b1; ++b) {
        const double v = w.fourier(std::hypot(da, xi[1] - b) / rm);
        if (v != 0.0) visit(Lattice<2>{a, b}, v);
      }
    }
  }
}

template <int Dim>
bool representable(const Lattice<Dim>& k, int n) {
  for (int d = 0; d < Dim; ++d)
    if (2 * k[d] < -n || 2 * k[d] >= n) return false;
  return true;
}

}  // namespace detail

// T f evaluated at arbitrary (x, xi) by the exact Fourier sum.
template <int Dim>
class WavePacketEvaluator {
 public:
  WavePacketEvaluator(const GridFunction<Dim>& f, double mu)
      : n_(f.size()), mu_(mu), window_(Dim), spectrum_(f.spectrum()), probe_(f.size()) {
    require(mu >= 4, "WavePacketEvaluator: mu must be at least 4");
  }

  cd operator()(const Vec<Dim>& x, const Vec<Dim>& xi) const {
    cd s = 0;
    detail::for_each_packet_frequency<Dim>(window_, mu_, xi, [&](const Lattice<Dim>& k, double gh) {
      if (!detail::representable<Dim>(k, n_)) return;
      double phase = 0;
      for (int d = 0; d < Dim; ++d) phase += k[d] * x[d];
      s += spectrum_[probe_.spectral_index(k)] * gh * std::polar(1.0, phase);
    });
    return s * std::pow(mu_, -0.25 * Dim);
  }

  double mu() const { return mu_; }

 private:
  int n_;
  double mu_;
  WindowFunction window_;
  std::vector<cd> spectrum_;
  GridFunction<Dim> probe_;
};

template <int Dim>
PhaseSpaceFunction<Dim> wp_forward(const GridFunction<Dim>& f, const PhaseSpaceGrid<Dim>& grid) {
  const double mu = grid.mu();
  const int m = grid.xpoints();
  const auto spec = f.spectrum();
  const auto& w = grid.window();
  PhaseSpaceFunction<Dim> out(grid);
  Eigen::FFT<double> fft;
  std::vector<cd> buf(grid.x_nodes());
  const double amp = std::pow(mu, -0.25 * Dim);
  for (std::size_t j = 0; j < grid.xi_nodes(); ++j) {
    std::fill(buf.begin(), buf.end(), cd(0));
    bool any = false;
    detail::for_each_packet_frequency<Dim>(w, mu, grid.xi_point(j), [&](const Lattice<Dim>& k, double gh) {
      if (!detail::representable<Dim>(k, f.size())) return;
      const cd c = spec[f.spectral_index(k)];
      if (c == 0.0) return;
      buf[grid.x_flat(k)] += c * gh;
      any = true;
    });
    if (!any) continue;
    detail::fft_nd<Dim>(buf, m, /*inverse=*/true, fft);
    for (std::size_t i = 0; i < buf.size(); ++i) out.at(j, i) = amp * buf[i];
  }
  return out;
}

// Discrete adjoint with respect to the weighted phase-space product; returns
// a function on the n-point spatial grid.
template <int Dim>
GridFunction<Dim> wp_adjoint(const PhaseSpaceFunction<Dim>& F, int n) {
  const auto& grid = F.grid();
  const double mu = grid.mu();
  const int m = grid.xpoints();
  GridFunction<Dim> probe(n);
  std::vector<cd> spec(probe.count());
  Eigen::FFT<double> fft;
  std::vector<cd> buf(grid.x_nodes());
  for (std::size_t j = 0; j < grid.xi_nodes(); ++j) {
    bool any = false;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      buf[i] = F.at(j, i);
      any = any || buf[i] != 0.0;
    }
    if (!any) continue;
    detail::fft_nd<Dim>(buf, m, /*inverse=*/false, fft);
    detail::for_each_packet_frequency<Dim>(grid.window(), mu, grid.xi_point(j), [&](const Lattice<Dim>& k, double gh) {
      if (!detail::representable<Dim>(k, n)) return;
      spec[probe.spectral_index(k)] += gh * buf[grid.x_flat(k)];
    });
  }
  const double scale = grid.weight() / std::pow(kTwoPi, Dim) * std::pow(mu, -0.25 * Dim);
  for (auto& c : spec) c *= scale;
  return GridFunction<Dim>::from_spectrum(n, std::move(spec));
}

template <int Dim>
void write_magnitude_csv(const std::string& path, const PhaseSpaceFunction<Dim>& F) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "write_magnitude_csv: cannot open " + path);
  const auto& g = F.grid();
  os << (Dim == 1 ? "x,xi,magnitude\n" : "x1,x2,xi1,xi2,magnitude\n");
  for (std::size_t j = 0; j < g.xi_nodes(); ++j)
    for (std::size_t i = 0; i < g.x_nodes(); ++i) {
      const auto x = g.x_point(i), xi = g.xi_point(j);
      for (int d = 0; d < Dim; ++d) os << format_number(x[d]) << ',';
      for (int d = 0; d < Dim; ++d) os << format_number(xi[d]) << ',';
      os << format_number(std::abs(F.at(j, i))) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Conjugated generator
//   A~ F = c_x . d_x F + c_xi . d_xi F + c_0 F
// with c_x = 2 i G xi, c_xi,k = -i xi^T (d_k G) xi and c_0 = xi^T G xi for the
// symbol a(x, xi) = -xi^T G(x) xi.

enum class CarrierMode { Demodulated, None };

namespace detail {

inline constexpr std::array<double, 5> kStencil = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};

// Fourth-order centered derivative along an x axis. With demodulation the
// local carrier e^{i xi.x} is removed before differencing and restored
// analytically.
template <int Dim>
void x_derivative(const PhaseSpaceGrid<Dim>& g, std::span<const cd> in, std::span<cd> out, int axis, CarrierMode mode) {
  const double h = g.spacing_x();
  std::array<cd, 5> shift{};
  for (std::size_t j = 0; j < g.xi_nodes(); ++j) {
    const double xi = g.xi_point(j)[axis];
    for (int s = -2; s <= 2; ++s)
      shift[s + 2] = kStencil[s + 2] / h * (mode == CarrierMode::Demodulated ? std::polar(1.0, -xi * s * h) : cd(1.0));
    const cd carrier = mode == CarrierMode::Demodulated ? cd(0, xi) : cd(0);
    for (std::size_t i = 0; i < g.x_nodes(); ++i) {
      auto ij = g.x_multi(i);
      const int base = ij[axis];
      cd acc = carrier * in[g.index(j, i)];
      for (int s = -2; s <= 2; ++s) {
        if (s == 0) continue;
        ij[axis] = base + s;
        acc += shift[s + 2] * in[g.index(j, g.x_flat(ij))];
      }
      out[g.index(j, i)] = acc;
    }
  }
}

// Fourth-order centered derivative along a xi axis, zero outside the window.
template <int Dim>
void xi_derivative(const PhaseSpaceGrid<Dim>& g, std::span<const cd> in, std::span<cd> out, int axis) {
  const double h = g.spacing_xi();
  for (std::size_t j = 0; j < g.xi_nodes(); ++j) {
    const auto base = g.xi_multi(j);
    std::array<std::ptrdiff_t, 5> nb{};
    for (int s = -2; s <= 2; ++s) {
      auto ij = base;
      ij[axis] += s;
      nb[s + 2] = g.xi_flat(ij);
    }
    for (std::size_t i = 0; i < g.x_nodes(); ++i) {
      cd acc = 0;
      for (int s = -2; s <= 2; ++s)
        if (s != 0 && nb[s + 2] >= 0) acc += kStencil[s + 2] * in[g.index(nb[s + 2], i)];
      out[g.index(j, i)] = acc / h;
    }
  }
}

}  // namespace detail

// Coefficients of A~ tabulated on a phase-space grid.
template <int Dim>
struct GeneratorCoefficients {
  std::array<std::vector<cd>, Dim> transport_x;   // c_x
  std::array<std::vector<cd>, Dim> transport_xi;  // c_xi
  std::vector<cd> potential;                      // c_0 = sigma

  GeneratorCoefficients(const CoefficientField<Dim>& field, const PhaseSpaceGrid<Dim>& g) {
    std::vector<MetricJet<Dim>> jets(g.x_nodes());
    for (std::size_t i = 0; i < g.x_nodes(); ++i) jets[i] = field.metric_jet(g.x_point(i));
    for (int d = 0; d < Dim; ++d) {
      transport_x[d].resize(g.size());
      transport_xi[d].resize(g.size());
    }
    potential.resize(g.size());
    for (std::size_t j = 0; j < g.xi_nodes(); ++j) {
      const auto xi = g.xi_point(j);
      for (std::size_t i = 0; i < g.x_nodes(); ++i) {
        const auto& mj = jets[i];
        const std::size_t idx = g.index(j, i);
        const Vec<Dim> gx = mj.g * xi;
        for (int d = 0; d < Dim; ++d) {
          transport_x[d][idx] = cd(0, 2.0 * gx[d]);
          transport_xi[d][idx] = cd(0, -xi.dot(mj.dg[d] * xi));
        }
        potential[idx] = xi.dot(gx);
      }
    }
  }
};

template <int Dim>
void require_stencil_fits(const PhaseSpaceGrid<Dim>& g) {
  require(g.xpoints() >= 5, "apply_generator: x grid too coarse for the stencil");
  for (int d = 0; d < Dim; ++d) require(g.xi_count()[d] >= 5, "apply_generator: xi window too small for the stencil");
}

template <int Dim>
PhaseSpaceFunction<Dim> apply_generator(const GeneratorCoefficients<Dim>& c, const PhaseSpaceFunction<Dim>& F,
                                        CarrierMode mode = CarrierMode::Demodulated) {
  const auto& g = F.grid();
  require_stencil_fits(g);
  require(c.potential.size() == g.size(), "apply_generator: coefficient table does not match grid");
  PhaseSpaceFunction<Dim> out(g), tmp(g);
  auto o = out.values();
  for (std::size_t i = 0; i < g.size(); ++i) o[i] = c.potential[i] * F[i];
  for (int d = 0; d < Dim; ++d) {
    detail::x_derivative(g, F.values(), tmp.values(), d, mode);
    for (std::size_t i = 0; i < g.size(); ++i) o[i] += c.transport_x[d][i] * tmp[i];
    detail::xi_derivative(g, F.values(), tmp.values(), d);
    for (std::size_t i = 0; i < g.size(); ++i) o[i] += c.transport_xi[d][i] * tmp[i];
  }
  return out;
}

template <int Dim>
PhaseSpaceFunction<Dim> apply_generator(const CoefficientField<Dim>& field, const PhaseSpaceFunction<Dim>& F,
                                        CarrierMode mode = CarrierMode::Demodulated) {
  return apply_generator(GeneratorCoefficients<Dim>(field, F.grid()), F, mode);
}

// Adjoint of apply_generator in the weighted phase-space product. Both
// difference operators are antisymmetric.
template <int Dim>
PhaseSpaceFunction<Dim> apply_generator_adjoint(const GeneratorCoefficients<Dim>& c, const PhaseSpaceFunction<Dim>& G,
                                                CarrierMode mode = CarrierMode::Demodulated) {
  const auto& g = G.grid();
  require_stencil_fits(g);
  PhaseSpaceFunction<Dim> out(g), prod(g), tmp(g);
  auto o = out.values();
  for (std::size_t i = 0; i < g.size(); ++i) o[i] = std::conj(c.potential[i]) * G[i];
  for (int d = 0; d < Dim; ++d) {
    for (std::size_t i = 0; i < g.size(); ++i) prod[i] = std::conj(c.transport_x[d][i]) * G[i];
    detail::x_derivative(g, prod.values(), tmp.values(), d, mode);
    for (std::size_t i = 0; i < g.size(); ++i) o[i] -= tmp[i];
    for (std::size_t i = 0; i < g.size(); ++i) prod[i] = std::conj(c.transport_xi[d][i]) * G[i];
    detail::xi_derivative(g, prod.values(), tmp.values(), d);
    for (std::size_t i = 0; i < g.size(); ++i) o[i] -= tmp[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conjugation residual R = T A btilde - A~ T btilde, A = sum g^{ij} d_i d_j.

template <int Dim>
class ConjugationResidual {
 public:
  ConjugationResidual(const CoefficientField<Dim>& field, double mu)
      : field_(field), mu_(mu), grid_(PhaseSpaceGrid<Dim>::symmetric(mu, 8.0 * mu + 2.0 * std::sqrt(mu) + 3.0)),
        coeffs_(field, grid_) {
    require(field.grid_size() >= 2 * (8.0 * mu + 2.0 * std::sqrt(mu)),
            "conjugation_residual: field grid cannot represent frequencies up to 8 mu");
  }

  int n() const { return field_.grid_size(); }
  const PhaseSpaceGrid<Dim>& grid() const { return grid_; }

  PhaseSpaceFunction<Dim> apply(const GridFunction<Dim>& f) const {
    const auto bf = band_project(f, mu_);
    auto out = wp_forward(apply_principal(field_, bf), grid_);
    out -= apply_generator(coeffs_, wp_forward(bf, grid_));
    return out;
  }

  GridFunction<Dim> apply_adjoint(const PhaseSpaceFunction<Dim>& F) const {
    auto h = apply_principal_adjoint(field_, wp_adjoint(F, n()));
    h -= wp_adjoint(apply_generator_adjoint(coeffs_, F), n());
    return band_project(h, mu_);
  }

 private:
  CoefficientField<Dim> field_;
  double mu_;
  PhaseSpaceGrid<Dim> grid_;
  GeneratorCoefficients<Dim> coeffs_;
};

struct ConjugationEstimate {
  double ratio = 0;  // largest probe estimate of ||R|| / mu
  bool converged = false;
  std::vector<double> probe_ratios;
};

// Randomized power iteration on R* R with `trials` probes.
template <int Dim>
ConjugationEstimate conjugation_residual(const CoefficientField<Dim>& field, double mu, int trials = 8,
                                         int iterations = 20, std::uint64_t seed = 1) {
  require(trials >= 1 && iterations >= 2, "conjugation_residual: need at least one probe and two iterations");
  const ConjugationResidual<Dim> R(field, mu);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ConjugationEstimate est;
  est.converged = true;
  for (int p = 0; p < trials; ++p) {
    GridFunction<Dim> v(R.n());
    for (std::size_t i = 0; i < v.count(); ++i) v[i] = cd(nd(rng), nd(rng));
    v = band_project(v, mu);
    double sigma = 0, prev = 0;
    for (int it = 0; it < iterations; ++it) {
      const double nv = v.l2_norm();
      if (nv == 0) break;
      v *= cd(1.0 / nv);
      const auto rv = R.apply(v);
      prev = sigma;
      sigma = rv.l2_norm();
      v = R.apply_adjoint(rv);
    }
    if (std::abs(sigma - prev) > 1e-3 * sigma) est.converged = false;
    est.probe_ratios.push_back(sigma / mu);
    est.ratio = std::max(est.ratio, sigma / mu);
  }
  return est;
}

}  // namespace wps
