#pragma once

// Divergence-form operator P f = rho^{-1} sum_ij d_i (rho g^{ij} d_j f) on the
// torus [0, 2 pi)^n, its coefficient field, and the reductions applied to it:
// doubling across a boundary, frequency truncation, and rescaling.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wps/core/error.hpp"
#include "wps/core/fourier_series.hpp"
#include "wps/core/grid_function.hpp"

namespace wps {

inline constexpr double kDefaultC0 = 0.05;

// One real coefficient function: exact Fourier representation plus its
// samples on the field grid. The series is authoritative; samples are derived
// from it except for fields built directly from grid data.
template <int Dim>
struct Coefficient {
  FourierSeries<Dim> series;
  std::vector<double> samples;

  static Coefficient from_series(FourierSeries<Dim> s, int n) {
    Coefficient c;
    c.series = std::move(s);
    const auto g = c.series.sample(n);
    c.samples.resize(g.count());
    for (std::size_t i = 0; i < g.count(); ++i) c.samples[i] = g[i].real();
    return c;
  }
  static Coefficient from_samples(std::vector<double> v, int n) {
    Coefficient c;
    std::vector<cd> z(v.begin(), v.end());
    c.series = FourierSeries<Dim>::from_grid(GridFunction<Dim>(n, std::move(z)));
    c.samples = std::move(v);
    return c;
  }
  GridFunction<Dim> grid(int n) const {
    return GridFunction<Dim>(n, std::vector<cd>(samples.begin(), samples.end()));
  }
};

template <int Dim>
struct RescaledField;

template <int Dim>
struct MetricJet {
  Mat<Dim> g = Mat<Dim>::Identity();
  std::array<Mat<Dim>, Dim> dg{};                   // d_k g
  std::array<std::array<Mat<Dim>, Dim>, Dim> d2g{};  // d_k d_l g
};

template <int Dim>
class CoefficientField {
 public:
  static constexpr int kComponents = Dim * (Dim + 1) / 2;

  CoefficientField() = default;

  // gInv lists the upper triangle row by row: (g11) or (g11, g12, g22).
  CoefficientField(int n, std::array<Coefficient<Dim>, kComponents> g_inv, Coefficient<Dim> rho,
                   double c0 = kDefaultC0)
      : n_(n), g_(std::move(g_inv)), rho_(std::move(rho)), c0_(c0) {
    for (auto& b : b_) b = Coefficient<Dim>::from_series(FourierSeries<Dim>(), n);
  }

  static CoefficientField flat(int n, double c0 = kDefaultC0) {
    std::array<Coefficient<Dim>, kComponents> g;
    for (int i = 0; i < Dim; ++i)
      for (int j = i; j < Dim; ++j)
        g[component(i, j)] = Coefficient<Dim>::from_series(
            i == j ? FourierSeries<Dim>::constant(1.0) : FourierSeries<Dim>(), n);
    return CoefficientField(n, std::move(g), Coefficient<Dim>::from_series(FourierSeries<Dim>::constant(1.0), n), c0);
  }

  static CoefficientField from_series(int n, std::array<FourierSeries<Dim>, kComponents> g,
                                      FourierSeries<Dim> rho, double c0 = kDefaultC0) {
    std::array<Coefficient<Dim>, kComponents> gc;
    for (int c = 0; c < kComponents; ++c) gc[c] = Coefficient<Dim>::from_series(std::move(g[c]), n);
    return CoefficientField(n, std::move(gc), Coefficient<Dim>::from_series(std::move(rho), n), c0);
  }

  static CoefficientField from_samples(int n, std::array<std::vector<double>, kComponents> g,
                                       std::vector<double> rho, double c0 = kDefaultC0) {
    std::array<Coefficient<Dim>, kComponents> gc;
    for (int c = 0; c < kComponents; ++c) gc[c] = Coefficient<Dim>::from_samples(std::move(g[c]), n);
    CoefficientField f(n, std::move(gc), Coefficient<Dim>::from_samples(std::move(rho), n), c0);
    return f;
  }

  static constexpr int component(int i, int j) {
    if (i > j) std::swap(i, j);
    return Dim == 1 ? 0 : (i == 0 ? j : 2);
  }

  int grid_size() const { return n_; }
  double lip_bound() const { return c0_; }
  double freq_support() const { return freq_support_; }
  bool periodic() const { return scale_ == 1.0; }
  double scale() const { return scale_; }
  double regularization_error() const { return regularization_error_; }

  const Coefficient<Dim>& g(int i, int j) const { return g_[component(i, j)]; }
  const Coefficient<Dim>& rho() const { return rho_; }
  const Coefficient<Dim>& b(int i) const { return b_[i]; }
  const std::array<Coefficient<Dim>, kComponents>& g_components() const { return g_; }

  CoefficientField with_drift(std::array<FourierSeries<Dim>, Dim> b) const {
    CoefficientField f = *this;
    for (int i = 0; i < Dim; ++i) f.b_[i] = Coefficient<Dim>::from_series(std::move(b[i]), n_);
    return f;
  }

  // Largest wavenumber present in any metric coefficient.
  double max_wavenumber() const {
    double k = 0;
    for (const auto& c : g_) k = std::max(k, c.series.max_wavenumber());
    return k;
  }

  Mat<Dim> metric_at_sample(std::size_t idx) const {
    Mat<Dim> m;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) m(i, j) = g(i, j).samples[idx];
    return m;
  }

  // Exact value and derivatives of (g^{ij}) at an arbitrary point.
  MetricJet<Dim> metric_jet(const Vec<Dim>& x) const {
    MetricJet<Dim> mj;
    for (int i = 0; i < Dim; ++i)
      for (int j = i; j < Dim; ++j) {
        const auto jt = g(i, j).series.jet(x);
        mj.g(i, j) = mj.g(j, i) = jt.value;
        for (int k = 0; k < Dim; ++k) {
          mj.dg[k](i, j) = mj.dg[k](j, i) = jt.grad[k];
          for (int l = 0; l < Dim; ++l) mj.d2g[k][l](i, j) = mj.d2g[k][l](j, i) = jt.hess(k, l);
        }
      }
    return mj;
  }

  // Largest |d_k g^{ij}| over the sample grid.
  double metric_gradient_bound() const {
    double m = 0;
    GridFunction<Dim> probe(n_);
    for (std::size_t idx = 0; idx < probe.count(); ++idx) {
      const auto mj = metric_jet(probe.point(idx));
      for (int k = 0; k < Dim; ++k) m = std::max(m, mj.dg[k].cwiseAbs().maxCoeff());
    }
    return m;
  }

  double min_metric_eigenvalue() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t idx = 0; idx < rho_.samples.size(); ++idx) {
      Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(metric_at_sample(idx), Eigen::EigenvaluesOnly);
      m = std::min(m, es.eigenvalues()[0]);
    }
    return m;
  }
  double min_density() const { return *std::min_element(rho_.samples.begin(), rho_.samples.end()); }

  // Throws PreconditionError if the ellipticity or density bound 1 - 2 c0 fails.
  void validate() const {
    const double floor = 1.0 - 2.0 * c0_;
    require(floor > 0, "CoefficientField: c0 must be below 1/2");
    require(min_metric_eigenvalue() >= floor, "CoefficientField: ellipticity bound 1 - 2 c0 violated");
    require(min_density() >= floor, "CoefficientField: density bound 1 - 2 c0 violated");
  }

 private:
  template <int D>
  friend CoefficientField<D> regularize(const CoefficientField<D>&, double);
  template <int D>
  friend RescaledField<D> rescale_to_unit(const CoefficientField<D>&, double, int, int);
  template <int D>
  friend CoefficientField<D> double_metric(const CoefficientField<D>&);

  int n_ = 0;
  std::array<Coefficient<Dim>, kComponents> g_{};
  Coefficient<Dim> rho_{};
  std::array<Coefficient<Dim>, Dim> b_{};
  double c0_ = kDefaultC0;
  double freq_support_ = std::numeric_limits<double>::infinity();
  double scale_ = 1.0;
  double regularization_error_ = 0.0;
};

// P f = rho^{-1} sum_ij d_i (rho g^{ij} d_j f), spectral differentiation.
template <int Dim>
GridFunction<Dim> assemble_operator(const CoefficientField<Dim>& field, const GridFunction<Dim>& f) {
  require(f.size() == field.grid_size(), "assemble_operator: grid mismatch");
  require(field.periodic(), "assemble_operator: rescaled fields are not periodic on the torus");
  field.validate();
  const std::size_t count = f.count();
  std::array<GridFunction<Dim>, Dim> df;
  for (int j = 0; j < Dim; ++j) df[j] = f.derivative(j);
  GridFunction<Dim> out(f.size());
  for (int i = 0; i < Dim; ++i) {
    GridFunction<Dim> flux(f.size());
    for (std::size_t idx = 0; idx < count; ++idx) {
      cd s = 0;
      for (int j = 0; j < Dim; ++j) s += field.g(i, j).samples[idx] * df[j][idx];
      flux[idx] = field.rho().samples[idx] * s;
    }
    out += flux.derivative(i);
  }
  for (std::size_t idx = 0; idx < count; ++idx) out[idx] /= field.rho().samples[idx];
  return out;
}

// Principal part A f = sum_ij g^{ij} d_i d_j f.
template <int Dim>
GridFunction<Dim> apply_principal(const CoefficientField<Dim>& field, const GridFunction<Dim>& f) {
  require(f.size() == field.grid_size(), "apply_principal: grid mismatch");
  GridFunction<Dim> out(f.size());
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) {
      const auto dij = f.fourier_multiply([&](const Lattice<Dim>& k) -> cd {
        return -static_cast<double>(k[i]) * static_cast<double>(k[j]);
      });
      for (std::size_t idx = 0; idx < f.count(); ++idx) out[idx] += field.g(i, j).samples[idx] * dij[idx];
    }
  return out;
}

// L2(dx) adjoint of the principal part: A* h = sum_ij d_i d_j (g^{ij} h).
template <int Dim>
GridFunction<Dim> apply_principal_adjoint(const CoefficientField<Dim>& field, const GridFunction<Dim>& h) {
  require(h.size() == field.grid_size(), "apply_principal_adjoint: grid mismatch");
  GridFunction<Dim> out(h.size());
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) {
      GridFunction<Dim> gh(h.size());
      for (std::size_t idx = 0; idx < h.count(); ++idx) gh[idx] = field.g(i, j).samples[idx] * h[idx];
      out += gh.fourier_multiply([&](const Lattice<Dim>& k) -> cd {
        return -static_cast<double>(k[i]) * static_cast<double>(k[j]);
      });
    }
  return out;
}

// Even reflection across x_n = 0 (and, by periodicity, x_n = pi). Only samples
// with x_n in [0, pi] are read. The result is Lipschitz but generally not
// smooth, so its spectrum is untruncated.
template <int Dim>
CoefficientField<Dim> double_metric(const CoefficientField<Dim>& half) {
  const int n = half.grid_size();
  require(n % 2 == 0, "double_metric: grid size must be even so that x_n = pi is a node");
  require(half.periodic(), "double_metric: input must live on the torus");
  GridFunction<Dim> probe(n);
  const int normal = Dim - 1;
  auto mirror = [&](std::size_t idx) {
    auto ij = probe.index(idx);
    if (ij[normal] > n / 2) ij[normal] = n - ij[normal];
    return probe.flat(ij);
  };
  for (std::size_t idx = 0; idx < probe.count(); ++idx) {
    if (probe.index(idx)[normal] > n / 2) continue;
    for (int i = 0; i < Dim - 1; ++i)
      require(half.g(i, normal).samples[idx] == 0.0,
              "double_metric: boundary-normal form requires g^{ni} = 0 for i != n");
    require(half.rho().samples[idx] > 0.0, "double_metric: density must be positive");
  }
  auto reflect = [&](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t idx = 0; idx < v.size(); ++idx) out[idx] = v[mirror(idx)];
    return out;
  };
  std::array<std::vector<double>, CoefficientField<Dim>::kComponents> g;
  for (int c = 0; c < CoefficientField<Dim>::kComponents; ++c) g[c] = reflect(half.g_[c].samples);
  return CoefficientField<Dim>::from_samples(n, std::move(g), reflect(half.rho_.samples), half.lip_bound());
}

// Sharp Fourier-ball truncation of every coefficient to |k| < lambda^{2/3}.
// Records the sup-norm deviation over the field grid.
template <int Dim>
CoefficientField<Dim> regularize(const CoefficientField<Dim>& field, double lambda) {
  require(lambda >= 1.0, "regularize: lambda must be >= 1");
  require(field.periodic(), "regularize: input must live on the torus");
  const double radius = std::pow(lambda, 2.0 / 3.0);
  const int n = field.grid_size();
  CoefficientField<Dim> out = field;
  double dev = 0;
  auto apply = [&](const Coefficient<Dim>& in, Coefficient<Dim>& res) {
    auto cut = in.series.truncated(radius);
    if (cut.size() == in.series.size()) {
      res = in;
      return;
    }
    // Rebuild samples from the grid spectrum so the result stays exactly band-limited.
    auto spec = in.grid(n).spectrum();
    GridFunction<Dim> probe(n);
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      const auto k = probe.frequency(idx);
      double kk = 0;
      for (int d = 0; d < Dim; ++d) kk += static_cast<double>(k[d]) * k[d];
      if (std::sqrt(kk) >= radius) spec[idx] = 0.0;
    }
    const auto g = GridFunction<Dim>::from_spectrum(n, std::move(spec));
    res.series = std::move(cut);
    res.samples.resize(g.count());
    for (std::size_t i = 0; i < g.count(); ++i) {
      res.samples[i] = g[i].real();
      dev = std::max(dev, std::abs(res.samples[i] - in.samples[i]));
    }
  };
  for (int c = 0; c < CoefficientField<Dim>::kComponents; ++c) apply(field.g_[c], out.g_[c]);
  apply(field.rho_, out.rho_);
  for (int i = 0; i < Dim; ++i) apply(field.b_[i], out.b_[i]);
  out.freq_support_ = std::min(field.freq_support_, radius);
  out.regularization_error_ = std::max(field.regularization_error_, dev);
  return out;
}

// Largest difference quotient |f(x+h) - f(x)| / h between grid neighbours.
template <int Dim>
double lipschitz_seminorm(const std::vector<double>& samples, int n) {
  GridFunction<Dim> probe(n);
  double m = 0;
  for (std::size_t idx = 0; idx < samples.size(); ++idx) {
    auto ij = probe.index(idx);
    for (int d = 0; d < Dim; ++d) {
      auto nb = ij;
      nb[d] = (nb[d] + 1) % n;
      m = std::max(m, std::abs(samples[probe.flat(nb)] - samples[idx]) / probe.spacing());
    }
  }
  return m;
}

// Coefficients x -> g_lambda(lambda^{-1/3} x) with mu = lambda^{2/3}, plus the
// measured constants C_alpha in |d^alpha g| <= C_alpha mu^{max(0,|alpha|-2)/2}.
template <int Dim>
struct RescaledField {
  CoefficientField<Dim> field;
  double mu = 0;
  struct Bound {
    Lattice<Dim> alpha{};
    int order = 0;
    double sup = 0;       // sup |d^alpha g| over all metric and density coefficients
    double constant = 0;  // sup / mu^{max(0, order - 2)/2}
  };
  std::vector<Bound> bounds;
};

template <int Dim>
RescaledField<Dim> rescale_to_unit(const CoefficientField<Dim>& field, double lambda, int max_order,
                                   int scan_points) {
  require(std::isfinite(field.freq_support()), "rescale_to_unit: field must be regularized first");
  require(field.periodic(), "rescale_to_unit: field is already rescaled");
  const double s = std::pow(lambda, -1.0 / 3.0);
  RescaledField<Dim> out;
  out.mu = std::pow(lambda, 2.0 / 3.0);
  CoefficientField<Dim> r = field;
  const int n = field.grid_size();
  auto resample = [&](const Coefficient<Dim>& in, Coefficient<Dim>& res) {
    res.series = in.series.dilated(s);
    const auto g = res.series.sample(n);
    res.samples.resize(g.count());
    for (std::size_t i = 0; i < g.count(); ++i) res.samples[i] = g[i].real();
  };
  for (int c = 0; c < CoefficientField<Dim>::kComponents; ++c) resample(field.g_[c], r.g_[c]);
  resample(field.rho_, r.rho_);
  for (int i = 0; i < Dim; ++i) resample(field.b_[i], r.b_[i]);
  r.freq_support_ = field.freq_support_ * s;
  r.scale_ = s;
  out.field = std::move(r);

  // Derivatives of the rescaled coefficients over one full period equal
  // s^{|alpha|} times those of the original over the torus.
  if (scan_points <= 0) scan_points = std::max(64, static_cast<int>(16 * field.freq_support()));
  if (Dim == 2) scan_points = std::min(scan_points, 256);
  GridFunction<Dim> probe(scan_points);
  std::vector<const Coefficient<Dim>*> coeffs;
  for (const auto& c : field.g_) coeffs.push_back(&c);
  coeffs.push_back(&field.rho_);
  for (int order = 0; order <= max_order; ++order) {
    std::vector<Lattice<Dim>> alphas;
    if constexpr (Dim == 1) {
      alphas.push_back({order});
    } else {
      for (int a = 0; a <= order; ++a) alphas.push_back({a, order - a});
    }
    for (const auto& alpha : alphas) {
      double sup = 0;
      for (const auto* c : coeffs)
        for (std::size_t idx = 0; idx < probe.count(); ++idx)
          sup = std::max(sup, std::abs(c->series.derivative(probe.point(idx), alpha)));
      sup *= std::pow(s, order);
      typename RescaledField<Dim>::Bound b;
      b.alpha = alpha;
      b.order = order;
      b.sup = sup;
      b.constant = sup / std::pow(out.mu, 0.5 * std::max(0, order - 2));
      out.bounds.push_back(b);
    }
  }
  return out;
}

template <int Dim>
RescaledField<Dim> rescale_to_unit(const CoefficientField<Dim>& field, double lambda) {
  return rescale_to_unit(field, lambda, 4, 0);
}

}  // namespace wps
