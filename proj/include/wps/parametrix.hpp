#pragma once

// Flow parametrix
//   (W_t f)(y) = T*( e^{-i psi(t,x,xi)} (T f)(chi_{-t}(x,xi)) )(y),
// its Duhamel extension, the kernel of W_t and the dispersive scan.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "wps/coeffield.hpp"
#include "wps/core/numerics.hpp"
#include "wps/core/record.hpp"
#include "wps/hamflow.hpp"
#include "wps/lpdecomp.hpp"
#include "wps/wavepacket.hpp"

namespace wps {

struct ParametrixOptions {
  int steps_per_unit = 64;      // RK4 steps per unit of |t| max(mu, |xi|)
  double significance = 1e-9;   // relative packet size treated as negligible
  bool constant_metric_shortcut = true;
};

inline int parametrix_steps(double mu, double t, double xi_norm, int per_unit) {
  return std::max(4, static_cast<int>(std::ceil(per_unit * std::abs(t) * std::max(mu, xi_norm))));
}

template <int Dim>
bool constant_metric(const CoefficientField<Dim>& field) {
  return field.max_wavenumber() == 0;
}

template <int Dim>
struct FlowedNode {
  Vec<Dim> z;     // chi_{-t}(x, xi) position
  Vec<Dim> zeta;  // chi_{-t}(x, xi) frequency
  double psi;     // int_0^t sigma(chi_{r-t}(x, xi)) dr
};

template <int Dim>
FlowedNode<Dim> flow_back(const CoefficientField<Dim>& field, double mu, const Vec<Dim>& x, const Vec<Dim>& xi,
                          double t, int per_unit) {
  FlowPoint<Dim> p;
  p.z = x;
  p.zeta = xi;
  if (t == 0) return {x, xi, 0.0};
  const auto q = integrate_flow_from(
      field, p, -t, parametrix_steps(mu, t, xi.norm(), per_unit), [](const FlowPoint<Dim>&) {}, false);
  if (!q.z.allFinite() || !q.zeta.allFinite() || !std::isfinite(q.action))
    throw NumericalError("flow integration produced non-finite values");
  return {q.z, q.zeta, -q.action};
}

// psi(t, x, xi) along the backward trajectory.
template <int Dim>
double action_phase(const CoefficientField<Dim>& field, double mu, const Vec<Dim>& x, const Vec<Dim>& xi, double t,
                    int per_unit = 128) {
  const double r = xi.norm();
  require(r >= mu / 8 && r <= 8 * mu, "action_phase: |xi| outside [mu/8, 8 mu]");
  return flow_back(field, mu, x, xi, t, per_unit).psi;
}

// Largest |zeta_t - zeta| over |t'| <= |t| for frequencies up to `radius`.
template <int Dim>
double frequency_drift_bound(const CoefficientField<Dim>& field, double radius, double t) {
  if (constant_metric(field)) return 0.0;
  return 2.0 * std::abs(t) * Dim * field.metric_gradient_bound() * radius * radius + 1.0;
}

using SourceCutoff = std::function<double(double)>;  // of |zeta|

// Backward flow table over a phase-space grid at one time.
template <int Dim>
class ParametrixState {
 public:
  ParametrixState(const CoefficientField<Dim>& field, PhaseSpaceGrid<Dim> grid, double t, ParametrixOptions opts = {})
      : field_(field), grid_(std::move(grid)), t_(t), opts_(opts) {
    shortcut_ = opts_.constant_metric_shortcut && constant_metric(field_);
    if (shortcut_) {
      metric_ = field_.metric_jet(Vec<Dim>::Zero()).g;
      return;
    }
    table_.reserve(grid_.size());
    for (std::size_t j = 0; j < grid_.xi_nodes(); ++j) {
      const Vec<Dim> xi = grid_.xi_point(j);
      for (std::size_t i = 0; i < grid_.x_nodes(); ++i)
        table_.push_back(flow_back(field_, grid_.mu(), grid_.x_point(i), xi, t_, opts_.steps_per_unit));
    }
  }

  double mu() const { return grid_.mu(); }
  double time() const { return t_; }
  const PhaseSpaceGrid<Dim>& grid() const { return grid_; }
  bool shortcut() const { return shortcut_; }
  // Empty when the constant-metric shortcut is active.
  const std::vector<FlowedNode<Dim>>& flow_table() const { return table_; }

  // e^{-i psi} cutoff(|zeta|) (T f)(chi_{-t}) on the grid.
  PhaseSpaceFunction<Dim> transported(const GridFunction<Dim>& f, const SourceCutoff& cutoff = {}) const {
    require(!shortcut_, "ParametrixState: transported data is not tabulated under the constant-metric shortcut");
    const WavePacketEvaluator<Dim> Tf(f, mu());
    PhaseSpaceFunction<Dim> U(grid_);
    double top = 0, outside = 0;
    const double rm = std::sqrt(mu());
    const double lo = std::max(0.0, mu() / 8 - rm), hi = 8 * mu() + rm;
    for (std::size_t idx = 0; idx < table_.size(); ++idx) {
      const auto& nd = table_[idx];
      const double r = nd.zeta.norm();
      const double s = cutoff ? cutoff(r) : 1.0;
      if (s == 0.0) continue;
      const cd v = s * Tf(nd.z, nd.zeta);
      const double a = std::abs(v);
      top = std::max(top, a);
      if (r < lo || r > hi) outside = std::max(outside, a);
      U[idx] = v * std::polar(1.0, -nd.psi);
    }
    if (outside > opts_.significance * top)
      throw NumericalError("flow leaves the tabulated frequency window: |zeta| outside the band");
    check_window_edges(U, top);
    return U;
  }

  GridFunction<Dim> apply(const GridFunction<Dim>& f, const SourceCutoff& cutoff = {}) const {
    if (shortcut_) return apply_constant(f, cutoff);
    return wp_adjoint(transported(f, cutoff), f.size());
  }

 private:
  // Packets sitting on the outermost xi rows mean the grid window was too small.
  void check_window_edges(const PhaseSpaceFunction<Dim>& U, double top) const {
    double edge = 0;
    for (std::size_t j = 0; j < grid_.xi_nodes(); ++j) {
      const auto m = grid_.xi_multi(j);
      bool boundary = false;
      for (int d = 0; d < Dim; ++d) boundary = boundary || m[d] == 0 || m[d] == grid_.xi_count()[d] - 1;
      if (!boundary) continue;
      for (std::size_t i = 0; i < grid_.x_nodes(); ++i) edge = std::max(edge, std::abs(U.at(j, i)));
    }
    if (edge > opts_.significance * top) throw NumericalError("flow leaves the tabulated frequency window");
  }

  // Constant G: chi_{-t}(x, xi) = (x + 2tG xi, xi) and psi = t xi^T G xi, so
  // the grid quadrature collapses to a Fourier multiplier (exactly).
  GridFunction<Dim> apply_constant(const GridFunction<Dim>& f, const SourceCutoff& cutoff) const {
    auto spec = f.spectrum();
    const double rm = std::sqrt(mu());
    const int refine = grid_.xi_refine();
    const double scale = grid_.weight() * std::pow(grid_.xpoints() / kTwoPi, Dim) / std::pow(mu(), 0.5 * Dim);
    const auto& w = grid_.window();
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      if (spec[idx] == 0.0) continue;
      const auto kk = f.frequency(idx);
      Vec<Dim> k;
      for (int d = 0; d < Dim; ++d) k[d] = kk[d];
      Lattice<Dim> a{}, b{};
      for (int d = 0; d < Dim; ++d) {
        a[d] = std::max(0, static_cast<int>(std::ceil((k[d] - rm) * refine)) - grid_.xi_lo()[d]);
        b[d] = std::min(grid_.xi_count()[d] - 1, static_cast<int>(std::floor((k[d] + rm) * refine)) - grid_.xi_lo()[d]);
      }
      cd m = 0;
      auto add = [&](const Lattice<Dim>& jj) {
        Vec<Dim> xi;
        for (int d = 0; d < Dim; ++d) xi[d] = static_cast<double>(grid_.xi_lo()[d] + jj[d]) / refine;
        const double gh = w.fourier((xi - k).norm() / rm);
        if (gh == 0.0) return;
        const double s = cutoff ? cutoff(xi.norm()) : 1.0;
        if (s == 0.0) return;
        const Vec<Dim> gxi = metric_ * xi;
        m += s * gh * gh * std::polar(1.0, t_ * (2.0 * k.dot(gxi) - xi.dot(gxi)));
      };
      if constexpr (Dim == 1) {
        for (int j = a[0]; j <= b[0]; ++j) add(Lattice<1>{j});
      } else {
        for (int j0 = a[0]; j0 <= b[0]; ++j0)
          for (int j1 = a[1]; j1 <= b[1]; ++j1) add(Lattice<2>{j0, j1});
      }
      spec[idx] *= scale * m;
    }
    return GridFunction<Dim>::from_spectrum(f.size(), std::move(spec));
  }

  CoefficientField<Dim> field_;
  PhaseSpaceGrid<Dim> grid_;
  double t_;
  ParametrixOptions opts_;
  bool shortcut_ = false;
  Mat<Dim> metric_ = Mat<Dim>::Identity();
  std::vector<FlowedNode<Dim>> table_;
};

namespace detail {

// Bounding box of the significant spectrum of f, per axis.
template <int Dim>
std::pair<Vec<Dim>, Vec<Dim>> spectral_box(const GridFunction<Dim>& f, double rel = 1e-13) {
  const auto c = f.spectrum();
  double top = 0;
  for (const auto& v : c) top = std::max(top, std::abs(v));
  Vec<Dim> lo = Vec<Dim>::Constant(INFINITY), hi = Vec<Dim>::Constant(-INFINITY);
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    if (std::abs(c[idx]) <= rel * top) continue;
    const auto k = f.frequency(idx);
    for (int d = 0; d < Dim; ++d) {
      lo[d] = std::min(lo[d], static_cast<double>(k[d]));
      hi[d] = std::max(hi[d], static_cast<double>(k[d]));
    }
  }
  return {lo, hi};
}

template <int Dim>
void require_band_limited(const GridFunction<Dim>& f, double mu) {
  const auto c = f.spectrum();
  double in = 0, out = 0;
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    const double r = lattice_norm(f.frequency(idx));
    (r >= mu / 4 && r <= 4 * mu ? in : out) += std::norm(c[idx]);
  }
  require(in > 0, "evolve: input has no energy in the band [mu/4, 4 mu]");
  require(out <= 1e-20 * in, "evolve: input is not band-limited to [mu/4, 4 mu]");
}

}  // namespace detail

// Phase-space grid for transporting data with spectrum in [lo, hi] over time t.
template <int Dim>
PhaseSpaceGrid<Dim> transport_grid(const CoefficientField<Dim>& field, double mu, const Vec<Dim>& lo,
                                   const Vec<Dim>& hi, double t) {
  const double radius = std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()) * std::sqrt(double(Dim)) +
                        std::sqrt(mu);
  return PhaseSpaceGrid<Dim>::covering(mu, lo, hi, frequency_drift_bound(field, radius, t));
}

template <int Dim>
GridFunction<Dim> evolve_homogeneous(const GridFunction<Dim>& f, const CoefficientField<Dim>& field, double mu,
                                     double t, ParametrixOptions opts = {}) {
  detail::require_band_limited(f, mu);
  const auto [lo, hi] = detail::spectral_box(f);
  return ParametrixState<Dim>(field, transport_grid(field, mu, lo, hi, t), t, opts).apply(f);
}

// int_0^t e^{-i psi(t-r, x, xi)} G(r, chi_{r-t}(x, xi)) dr by the trapezoid rule
// on r_j = j t / J, with one backward integration checkpointed at t - r_j.
template <int Dim>
cd duhamel_integral(const CoefficientField<Dim>& field, double mu, const Vec<Dim>& x, const Vec<Dim>& xi, double t,
                    int intervals, const std::function<cd(double, const Vec<Dim>&, const Vec<Dim>&)>& G,
                    int per_unit = 128) {
  require(intervals >= 1, "duhamel_integral: need at least one interval");
  const double h = t / intervals;
  const int sub = std::max(1, (parametrix_steps(mu, t, xi.norm(), per_unit) + intervals - 1) / intervals);
  FlowPoint<Dim> p;
  p.z = x;
  p.zeta = xi;
  cd sum = 0.5 * G(t, x, xi);
  for (int i = 1; i <= intervals; ++i) {
    p = integrate_flow_from(field, p, -h, sub, [](const FlowPoint<Dim>&) {}, false);
    const double wgt = i == intervals ? 0.5 : 1.0;
    sum += wgt * std::polar(1.0, p.action) * G(t - i * h, p.z, p.zeta);
  }
  return sum * h;
}

// Homogeneous term plus trapezoid quadrature of the transported forcing.
// forcing[j] samples F at r_j = j t / (forcing.size() - 1).
template <int Dim>
GridFunction<Dim> evolve_duhamel(const GridFunction<Dim>& f, const std::vector<GridFunction<Dim>>& forcing,
                                 const CoefficientField<Dim>& field, double mu, double t, ParametrixOptions opts = {}) {
  require(forcing.size() >= 2, "evolve_duhamel: forcing needs at least two time samples");
  detail::require_band_limited(f, mu);
  auto [lo, hi] = detail::spectral_box(f);
  bool any = false;
  for (const auto& F : forcing) {
    require(F.size() == f.size(), "evolve_duhamel: forcing grid differs from data grid");
    if (F.sup_norm() == 0.0) continue;
    any = true;
    const auto [a, b] = detail::spectral_box(F);
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
  const auto grid = transport_grid(field, mu, lo, hi, t);
  const auto u = ParametrixState<Dim>(field, grid, t, opts).apply(f);
  if (!any) return u;
  std::vector<WavePacketEvaluator<Dim>> TF;
  for (const auto& F : forcing) TF.emplace_back(F, mu);
  const int J = static_cast<int>(forcing.size()) - 1;
  auto G = [&](double r, const Vec<Dim>& z, const Vec<Dim>& zeta) {
    const int j = static_cast<int>(std::lround(r / t * J));
    return TF[std::clamp(j, 0, J)](z, zeta);
  };
  PhaseSpaceFunction<Dim> U(grid);
  for (std::size_t j = 0; j < grid.xi_nodes(); ++j)
    for (std::size_t i = 0; i < grid.x_nodes(); ++i)
      U.at(j, i) = duhamel_integral<Dim>(field, mu, grid.x_point(i), grid.xi_point(j), t, J, G, opts.steps_per_unit);
  auto out = u;
  out += wp_adjoint(U, f.size());
  return out;
}

// ---------------------------------------------------------------------------
// Kernel K(t, x, 0, y) of W_t S, with S the band cutoff at the source
// frequency. Evaluated on the universal cover R^n of the torus.

inline double band_cutoff(double mu, double r) { return band_multiplier(mu, r); }

// Linear interpolation table of the spatial window g, smoothly tapered to zero
// over [3 radius / 4, radius].
class SpatialWindowTable {
 public:
  SpatialWindowTable(int dim, double radius, double h = 1e-3) : h_(h), radius_(radius) {
    const WindowFunction w(dim);
    const int count = static_cast<int>(std::ceil(radius / h)) + 2;
    values_.resize(count);
    for (int i = 0; i < count; ++i) values_[i] = w.spatial(i * h) * smooth_step(1 + 4 * (i * h / radius - 0.75));
  }
  double operator()(double r) const {
    const double s = r / h_;
    const std::size_t i = static_cast<std::size_t>(s);
    if (i + 1 >= values_.size()) return 0.0;
    const double f = s - static_cast<double>(i);
    return (1 - f) * values_[i] + f * values_[i + 1];
  }
  double radius() const { return radius_; }

 private:
  double h_, radius_;
  std::vector<double> values_;
};

struct KernelQuadratureOptions {
  double z_radius = 12;     // window taper ends at z_radius mu^{-1/2}
  int z_per_width = 2;      // z spacing mu^{-1/2} / z_per_width
  int zeta_per_cell = 8;    // zeta spacing at most t^{-1/2} / zeta_per_cell
  int refine = 1;           // divides both spacings
  int steps_per_unit = 64;
};

// Sum over cells m of
//   K_m(t, x, y) = mu^{n/2} int e^{-i zeta.(x-z) - i psi + i zeta_t.(y-z_t)}
//                  g(mu^{1/2}(y-z_t)) g(mu^{1/2}(x-z)) phi_m(zeta) S(zeta) dz dzeta
// by tensor trapezoid quadrature in (z, zeta). Flows are computed once per
// source x; each evaluation at y sums the nodes whose packet reaches y.
template <int Dim>
class KernelQuadrature {
 public:
  KernelQuadrature(const CoefficientField<Dim>& field, double mu, double t, const Vec<Dim>& x,
                   const std::vector<Lattice<Dim>>& cells, KernelQuadratureOptions opts = {})
      : mu_(mu), rm_(std::sqrt(mu)), table_(Dim, opts.z_radius) {
    require(t > 0, "KernelQuadrature: t must be positive");
    require(opts.z_radius > 0 && opts.z_per_width >= 1 && opts.zeta_per_cell >= 1 && opts.refine >= 1,
            "KernelQuadrature: bad quadrature options");
    reach_ = opts.z_radius / rm_;
    const double rt = std::sqrt(t);
    const double hz = 1.0 / (rm_ * opts.z_per_width * opts.refine);
    // resolves the zeta-oscillation |x - z| + |y - z_t| <= 2 z_radius mu^{-1/2}
    const double hk = std::min(1.0 / (rt * opts.zeta_per_cell), rm_ / (2 * opts.z_radius)) / opts.refine;
    const int nz = static_cast<int>(std::floor(reach_ / hz));
    const bool exact = constant_metric(field);
    const Mat<Dim> G = field.metric_jet(Vec<Dim>::Zero()).g;
    std::vector<Vec<Dim>> zoff;
    std::vector<double> zw;
    auto add_offset = [&](const Vec<Dim>& d) {
      if (d.norm() > reach_) return;
      const double g = table_(rm_ * d.norm());
      if (g != 0.0) zoff.push_back(d), zw.push_back(g);
    };
    if constexpr (Dim == 1) {
      for (int a = -nz; a <= nz; ++a) add_offset(Vec<1>(a * hz));
    } else {
      for (int a = -nz; a <= nz; ++a)
        for (int b = -nz; b <= nz; ++b) add_offset(Vec<2>(a * hz, b * hz));
    }
    const double cellw = std::pow(hz * hk, Dim) * std::pow(mu, 0.5 * Dim);
    for (const auto& m : cells) {
      FrequencyCutoff<Dim> phi;
      phi.kind = FrequencyCutoff<Dim>::Kind::Cell;
      phi.t = t;
      phi.cell = m;
      auto visit = [&](const Vec<Dim>& zeta) {
        const double s = phi(zeta) * band_cutoff(mu, zeta.norm());
        if (s == 0.0) return;
        const int steps = parametrix_steps(mu, t, zeta.norm(), opts.steps_per_unit);
        for (std::size_t iz = 0; iz < zoff.size(); ++iz) {
          const Vec<Dim> z = x - zoff[iz];
          Node nd;
          double psi;
          if (exact) {
            nd.zt = z - 2 * t * G * zeta;
            nd.kt = zeta;
            psi = t * zeta.dot(G * zeta);
          } else {
            FlowPoint<Dim> p0;
            p0.z = z;
            p0.zeta = zeta;
            const auto p = integrate_flow_from(field, p0, t, steps, [](const FlowPoint<Dim>&) {}, false);
            nd.zt = p.z;
            nd.kt = p.zeta;
            psi = p.action;
          }
          nd.amp = std::polar(cellw * s * zw[iz], -zeta.dot(zoff[iz]) - psi);
          nodes_.push_back(nd);
        }
      };
      // zeta_d in ((m_d - 1) / rt, (m_d + 1) / rt)
      Lattice<Dim> a{}, b{};
      for (int d = 0; d < Dim; ++d) {
        a[d] = static_cast<int>(std::ceil((m[d] - 1) / rt / hk));
        b[d] = static_cast<int>(std::floor((m[d] + 1) / rt / hk));
      }
      if constexpr (Dim == 1) {
        for (int j = a[0]; j <= b[0]; ++j) visit(Vec<1>(j * hk));
      } else {
        for (int j0 = a[0]; j0 <= b[0]; ++j0)
          for (int j1 = a[1]; j1 <= b[1]; ++j1) visit(Vec<2>(j0 * hk, j1 * hk));
      }
    }
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& p, const Node& q) { return p.zt[0] < q.zt[0]; });
  }

  cd operator()(const Vec<Dim>& y) const {
    auto lo = std::lower_bound(nodes_.begin(), nodes_.end(), y[0] - reach_,
                               [](const Node& nd, double v) { return nd.zt[0] < v; });
    cd s = 0;
    for (auto it = lo; it != nodes_.end() && it->zt[0] <= y[0] + reach_; ++it) {
      const Vec<Dim> d = y - it->zt;
      const double r = d.norm();
      if (r > reach_) continue;
      s += it->amp * table_(rm_ * r) * std::polar(1.0, it->kt.dot(d));
    }
    return s;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Vec<Dim> zt;
    Vec<Dim> kt;
    cd amp;
  };
  double mu_, rm_, reach_ = 0;
  SpatialWindowTable table_;
  std::vector<Node> nodes_;
};

// Cells whose support box meets the ball |zeta| < 8 mu.
template <int Dim>
std::vector<Lattice<Dim>> band_cells(double mu, double t) {
  std::vector<Lattice<Dim>> out;
  const double rt = std::sqrt(t);
  for (const auto& c : cell_partition<Dim>(t, -8 * mu, 8 * mu)) {
    double d2 = 0;
    for (int d = 0; d < Dim; ++d) {
      const double a = (c.cell[d] - 1) / rt, b = (c.cell[d] + 1) / rt;
      const double nearest = (a <= 0 && b >= 0) ? 0.0 : std::min(std::abs(a), std::abs(b));
      d2 += nearest * nearest;
    }
    if (std::sqrt(d2) < 8 * mu) out.push_back(c.cell);
  }
  return out;
}

template <int Dim>
cd kernel_cell(const CoefficientField<Dim>& field, double mu, double t, const Vec<Dim>& x, const Vec<Dim>& y,
               const Lattice<Dim>& m, KernelQuadratureOptions opts = {}) {
  return KernelQuadrature<Dim>(field, mu, t, x, {m}, opts)(y);
}

// Constant metric G: the z-integral of the source form is exact and
//   K(t, r) = (2 pi)^{-n} int e^{i k.r + i t k^T G k} m(k, t) dk,
//   m(k, t) = sum_o S(k + d o) ghat^2(d o / mu^{1/2}) e^{-i t (d o)^T G (d o)} / sum_o ghat^2(d o / mu^{1/2}),
// sampled on the lattice of spacing d = 2 pi / period. Returned as a
// trigonometric polynomial in x = d r on the unit torus grid.
template <int Dim>
GridFunction<Dim> constant_metric_kernel(const Mat<Dim>& G, double mu, double t, double period = 2 * kTwoPi) {
  require(period >= kTwoPi, "constant_metric_kernel: period must be at least 2 pi");
  const double d = kTwoPi / period, rm = std::sqrt(mu);
  const int n = next_fft_size(2 * static_cast<int>(std::ceil((8 * mu + rm) / d)) + 2);
  const WindowFunction w(Dim);
  const int reach = static_cast<int>(std::ceil(rm / d));
  std::vector<std::pair<Lattice<Dim>, cd>> H;
  double Z = 0;
  auto offset = [&](const Lattice<Dim>& o) {
    Vec<Dim> eta;
    for (int a = 0; a < Dim; ++a) eta[a] = d * o[a];
    const double g = w.fourier(eta.norm() / rm);
    if (g == 0.0) return;
    Z += g * g;
    H.emplace_back(o, std::polar(g * g, -t * eta.dot(G * eta)));
  };
  if constexpr (Dim == 1) {
    for (int a = -reach; a <= reach; ++a) offset(Lattice<1>{a});
  } else {
    for (int a = -reach; a <= reach; ++a)
      for (int b = -reach; b <= reach; ++b) offset(Lattice<2>{a, b});
  }
  GridFunction<Dim> probe(n);
  // S on the lattice, indexed like the spectrum
  std::vector<double> S(probe.count());
  for (std::size_t idx = 0; idx < S.size(); ++idx) {
    const auto k = probe.frequency(idx);
    S[idx] = band_cutoff(mu, d * lattice_norm(k));
  }
  std::vector<cd> c(probe.count());
  const double norm = std::pow(d / kTwoPi, Dim) / Z;
  for (std::size_t idx = 0; idx < c.size(); ++idx) {
    const auto k = probe.frequency(idx);
    cd m = 0;
    for (const auto& [o, h] : H) {
      Lattice<Dim> q;
      bool ok = true;
      for (int a = 0; a < Dim; ++a) {
        q[a] = k[a] + o[a];
        ok = ok && 2 * q[a] >= -n && 2 * q[a] < n;
      }
      if (ok) m += S[probe.spectral_index(q)] * h;
    }
    if (m == 0.0) continue;
    Vec<Dim> kv;
    for (int a = 0; a < Dim; ++a) kv[a] = d * k[a];
    c[idx] = norm * m * std::polar(1.0, t * kv.dot(G * kv));
  }
  return GridFunction<Dim>::from_spectrum(n, std::move(c));
}

template <int Dim>
struct SupEstimate {
  double value = 0;
  Vec<Dim> at = Vec<Dim>::Zero();
};

// Lower estimate of sup |K| for a trigonometric polynomial: oversampled grid
// maximum, refined locally (1D) by golden-section search on the exact sum.
template <int Dim>
SupEstimate<Dim> sup_estimate(const GridFunction<Dim>& K, int oversample = 4) {
  const int m = K.size() * oversample;
  const auto fine = K.resample(m);
  SupEstimate<Dim> best;
  for (std::size_t i = 0; i < fine.count(); ++i)
    if (std::abs(fine[i]) > best.value) {
      best.value = std::abs(fine[i]);
      best.at = fine.point(i);
    }
  if constexpr (Dim == 1) {
    const auto c = K.spectrum();
    auto eval = [&](double y) {
      cd s = 0;
      for (std::size_t idx = 0; idx < c.size(); ++idx) s += c[idx] * std::polar(1.0, K.frequency(idx)[0] * y);
      return std::abs(s);
    };
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t i = 0; i < fine.count(); ++i) {
      const double a = std::abs(fine[(i + m - 1) % m]), b = std::abs(fine[i]), d = std::abs(fine[(i + 1) % m]);
      if (b >= a && b >= d) peaks.emplace_back(b, i);
    }
    std::sort(peaks.rbegin(), peaks.rend());
    const double h = kTwoPi / m;
    for (std::size_t p = 0; p < std::min<std::size_t>(peaks.size(), 8); ++p) {
      const double y = golden_maximize(eval, fine.point(peaks[p].second)[0] - h, fine.point(peaks[p].second)[0] + h);
      const double v = eval(y);
      if (v > best.value) {
        best.value = v;
        best.at = Vec<1>(y);
      }
    }
  }
  return best;
}

struct DispersiveOptions {
  int sources = 1;    // source points x (non-constant metrics)
  double eps = 0.3;   // t <= eps / mu
  double max_residual = 0.1;
  KernelQuadratureOptions quadrature;
};

// sup_y |K(t, x, 0, y)| for one source: y sampled around the flowed cell
// centers x_t(x, xi_m), then refined by coordinate golden-section search.
template <int Dim>
SupEstimate<Dim> kernel_sup(const CoefficientField<Dim>& field, double mu, double t, const Vec<Dim>& x,
                            const KernelQuadratureOptions& opts = {}) {
  const auto cells = band_cells<Dim>(mu, t);
  const KernelQuadrature<Dim> K(field, mu, t, x, cells, opts);
  const double rt = std::sqrt(t), scale = rt + 1.0 / std::sqrt(mu);
  auto mag = [&](const Vec<Dim>& y) { return std::abs(K(y)); };
  SupEstimate<Dim> best;
  for (const auto& m : cells) {
    Vec<Dim> xi;
    for (int d = 0; d < Dim; ++d) xi[d] = m[d] / rt;
    if (band_cutoff(mu, xi.norm()) == 0.0) continue;
    const auto p = integrate_flow(field, x, xi, t, parametrix_steps(mu, t, xi.norm(), opts.steps_per_unit));
    auto probe = [&](const Vec<Dim>& y) {
      const double v = mag(y);
      if (v > best.value) best = {v, y};
    };
    for (int a = -4; a <= 4; ++a) {
      if constexpr (Dim == 1) {
        probe(Vec<1>(p.z[0] + a * scale / 2));
      } else {
        for (int b = -4; b <= 4; ++b) probe(Vec<2>(p.z[0] + a * scale / 2, p.z[1] + b * scale / 2));
      }
    }
  }
  // local refinement around the best sample
  double step = scale / 2;
  for (int round = 0; round < 3; ++round, step /= 4) {
    for (int d = 0; d < Dim; ++d) {
      Vec<Dim> y = best.at;
      const double c = y[d];
      const double arg = golden_maximize(
          [&](double v) {
            y[d] = v;
            return mag(y);
          },
          c - step, c + step);
      y[d] = arg;
      const double v = mag(y);
      if (v > best.value) best = {v, y};
    }
  }
  return best;
}

// sup_{x,y} |K(t, x, 0, y)| over the time grid and its log-log slope.
template <int Dim>
ExperimentRecord dispersive_scan(const CoefficientField<Dim>& field, double mu, const std::vector<double>& tgrid,
                                 DispersiveOptions opts = {}) {
  require(tgrid.size() >= 6, "dispersive_scan: need at least six times");
  for (double t : tgrid)
    require(t >= (1 - 1e-9) / (mu * mu) && t <= opts.eps / mu * (1 + 1e-9),
            "dispersive_scan: times must lie in [mu^-2, eps mu^-1]");
  ExperimentRecord rec;
  rec.name = "dispersive";
  rec.params["mu"] = format_number(mu);
  rec.params["dim"] = std::to_string(Dim);
  rec.params["sources"] = std::to_string(opts.sources);
  rec.table.columns = {"t", "supK", "fitted", "log_residual"};
  const bool flat = constant_metric(field);
  std::vector<double> sups;
  for (double t : tgrid) {
    double s = 0;
    if (flat) {
      s = sup_estimate(constant_metric_kernel<Dim>(field.metric_jet(Vec<Dim>::Zero()).g, mu, t)).value;
    } else {
      for (int j = 0; j < opts.sources; ++j)
        s = std::max(s, kernel_sup<Dim>(field, mu, t, Vec<Dim>::Constant(kTwoPi * j / opts.sources + 0.1),
                                   opts.quadrature).value);
    }
    sups.push_back(s);
  }
  const auto fit = fit_power_law(tgrid, sups);
  for (std::size_t i = 0; i < tgrid.size(); ++i) {
    const double fitted = std::exp(fit.intercept) * std::pow(tgrid[i], fit.slope);
    rec.table.add_row({tgrid[i], sups[i], fitted, std::log(sups[i] / fitted)});
  }
  rec.scalars["slope"] = fit.slope;
  rec.scalars["intercept"] = fit.intercept;
  rec.scalars["fit_residual"] = fit.residual;
  rec.scalars["sup_at_tmin"] = sups.front();
  rec.scalars["short_time_constant"] = sups.front() / std::pow(mu, Dim);
  rec.check("fit_residual", fit.residual <= opts.max_residual, fit.residual,
            "rms log residual <= " + format_number(opts.max_residual));
  return rec;
}

// t^{-1/2} |(x - z) - d_zeta zeta_t . (x_t - z_t)| / (1 + mu |x - z|^2), x_t = x_t(x, xi_m).
template <int Dim>
ExperimentRecord xz_bound_check(const CoefficientField<Dim>& field, double mu, int samples, double eps = 0.3,
                                std::uint64_t seed = 5) {
  ExperimentRecord rec;
  rec.name = "xz_bound";
  rec.params["mu"] = format_number(mu);
  rec.table.columns = {"t", "x_minus_z", "xi_minus_zeta", "ratio"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
  double worst = 0;
  int drawn = 0;
  while (drawn < samples) {
    const double t = std::pow(mu, -2.0) * std::pow(eps * mu, u(rng));
    const double rt = std::sqrt(t);
    Vec<Dim> dir;
    if constexpr (Dim == 1) dir[0] = u(rng) < 0.5 ? -1.0 : 1.0;
    else {
      const double th = kTwoPi * u(rng);
      dir = Vec<2>(std::cos(th), std::sin(th));
    }
    const double r = mu / 4 * std::pow(16.0, u(rng));
    Vec<Dim> xim;
    for (int d = 0; d < Dim; ++d) xim[d] = std::round(rt * r * dir[d]) / rt;
    if (xim.norm() < mu / 4 || xim.norm() > 4 * mu) continue;
    Vec<Dim> x, zeta, z;
    for (int d = 0; d < Dim; ++d) {
      x[d] = kTwoPi * u(rng);
      zeta[d] = xim[d] + s(rng) / rt;
      z[d] = x[d] + 4 * s(rng) / std::sqrt(mu);
    }
    const int steps = parametrix_steps(mu, t, std::max(xim.norm(), zeta.norm()), 128);
    const auto px = integrate_flow(field, x, xim, t, steps);
    const auto pz = integrate_flow(field, z, zeta, t, steps);
    const Vec<Dim> num = (x - z) - pz.dzeta_dzeta.transpose() * (px.z - pz.z);
    const double ratio = num.norm() / rt / (1 + mu * (x - z).squaredNorm());
    worst = std::max(worst, ratio);
    rec.table.add_row({t, (x - z).norm(), (xim - zeta).norm(), ratio});
    ++drawn;
  }
  rec.scalars["max_ratio"] = worst;
  return rec;
}

}  // namespace wps
