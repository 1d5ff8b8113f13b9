#pragma once

// Reference solutions and mode families: dense spectral resolution of the
// discretized operator, disk whispering-gallery and sphere highest-weight
// modes, mixed space-time norms and loss-exponent fits.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wps/coeffield.hpp"
#include "wps/core/error.hpp"
#include "wps/core/grid_function.hpp"
#include "wps/core/numerics.hpp"
#include "wps/core/record.hpp"

namespace wps {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Largest grids accepted by the dense decomposition.
inline constexpr int kMaxDenseGrid1D = 1024;
inline constexpr int kMaxDenseGrid2D = 64;

// Eigenpairs of -P on the collocation grid: -P phi_k = lambda_k phi_k with
// lambda ascending and phi_k orthonormal in sum phi_a phi_b rho h^n.
template <int Dim>
class SpectralDecomposition {
 public:
  explicit SpectralDecomposition(const CoefficientField<Dim>& field) : n_(field.grid_size()) {
    require(n_ <= (Dim == 1 ? kMaxDenseGrid1D : kMaxDenseGrid2D),
            "SpectralDecomposition: grid too large for a dense decomposition");
    GridFunction<Dim> e(n_);
    const std::size_t N = e.count();
    const double h = std::pow(e.spacing(), Dim);
    rho_ = Eigen::VectorXd(N);
    for (std::size_t i = 0; i < N; ++i) rho_[i] = field.rho().samples[i];
    // S = W^{1/2} (-P) W^{-1/2}, W = diag(rho), is symmetric for the
    // spectral discretization.
    Eigen::MatrixXd S(N, N);
    for (std::size_t j = 0; j < N; ++j) {
      e[j] = 1.0;
      const auto col = assemble_operator(field, e);
      e[j] = 0.0;
      for (std::size_t i = 0; i < N; ++i) S(i, j) = -col[i].real() * std::sqrt(rho_[i] / rho_[j]);
    }
    asymmetry_ = (S - S.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, S.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd Ssym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Ssym);
    if (solver.info() != Eigen::Success) throw NumericalError("SpectralDecomposition: eigensolver failed");
    eigenvalues_ = solver.eigenvalues();
    modes_ = solver.eigenvectors();
    for (std::size_t i = 0; i < N; ++i) modes_.row(i) /= std::sqrt(rho_[i] * h);
    h_ = h;
  }

  int grid_size() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(eigenvalues_.size()); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t k) const { return eigenvalues_[static_cast<Eigen::Index>(k)]; }
  GridFunction<Dim> mode(std::size_t k) const {
    std::vector<cd> v(size());
    for (std::size_t i = 0; i < size(); ++i) v[i] = modes_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    return GridFunction<Dim>(n_, std::move(v));
  }
  // Relative asymmetry of the assembled matrix before symmetrization.
  double asymmetry() const { return asymmetry_; }

  // <f, phi_k>_rho for every k.
  Eigen::VectorXcd coefficients(const GridFunction<Dim>& f) const {
    require(f.size() == n_, "SpectralDecomposition: grid mismatch");
    Eigen::VectorXcd w(size());
    for (std::size_t i = 0; i < size(); ++i) w[i] = f[i] * rho_[i] * h_;
    return modes_.transpose() * w;
  }
  GridFunction<Dim> synthesize(const Eigen::VectorXcd& c) const {
    const Eigen::VectorXcd v = modes_ * c;
    return GridFunction<Dim>(n_, std::vector<cd>(v.data(), v.data() + v.size()));
  }

  // u(t) = sum_k e^{i t lambda_k} <f, phi_k>_rho phi_k
  GridFunction<Dim> evolve(const GridFunction<Dim>& f, double t) const { return evolve_coefficients(coefficients(f), t); }
  std::vector<GridFunction<Dim>> evolve(const GridFunction<Dim>& f, const std::vector<double>& times) const {
    const auto c = coefficients(f);
    std::vector<GridFunction<Dim>> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(evolve_coefficients(c, t));
    return out;
  }

  double weighted_norm(const GridFunction<Dim>& f) const {
    double s = 0;
    for (std::size_t i = 0; i < size(); ++i) s += std::norm(f[i]) * rho_[i];
    return std::sqrt(s * h_);
  }

 private:
  GridFunction<Dim> evolve_coefficients(const Eigen::VectorXcd& c, double t) const {
    Eigen::VectorXcd d(c.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) d[k] = c[k] * std::polar(1.0, t * eigenvalues_[k]);
    return synthesize(d);
  }

  int n_;
  double h_ = 0;
  double asymmetry_ = 0;
  Eigen::VectorXd rho_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd modes_;
};

template <int Dim>
GridFunction<Dim> spectral_evolve(const CoefficientField<Dim>& field, const GridFunction<Dim>& f, double t) {
  return SpectralDecomposition<Dim>(field).evolve(f, t);
}

// (sum_k (1 + |lambda_k|)^s |<f, phi_k>_rho|^2)^{1/2}
template <int Dim>
double sobolev_norm(const SpectralDecomposition<Dim>& dec, const GridFunction<Dim>& f, double s) {
  const auto c = dec.coefficients(f);
  double acc = 0;
  for (Eigen::Index k = 0; k < c.size(); ++k) acc += std::pow(1 + std::abs(dec.eigenvalues()[k]), s) * std::norm(c[k]);
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Mixed norms ||u||_{L^p([0, T]; L^q)} on a quadrature grid.

struct SpatialQuadrature {
  std::vector<double> weights;
};

template <int Dim>
SpatialQuadrature torus_quadrature(int n) {
  return {std::vector<double>(ipow(n, Dim), std::pow(kTwoPi / n, Dim))};
}

inline double lq_norm(std::span<const cd> u, const SpatialQuadrature& quad, double q) {
  require(u.size() == quad.weights.size(), "lq_norm: samples do not match quadrature");
  require(q >= 2, "lq_norm: exponent must be at least 2");
  double s = 0;
  if (std::isinf(q)) {
    for (const auto& v : u) s = std::max(s, std::abs(v));
    return s;
  }
  for (std::size_t i = 0; i < u.size(); ++i) s += quad.weights[i] * std::pow(std::abs(u[i]), q);
  return std::pow(s, 1 / q);
}

// Samples u(t_j) at uniform t_j = j T / (J - 1); trapezoid in time.
inline double mixed_norm(const std::vector<std::vector<cd>>& u, const SpatialQuadrature& quad, double T, double p,
                         double q) {
  require(p >= 2 && q >= 2, "mixed_norm: exponents must be at least 2");
  require(u.size() >= 2 && T > 0, "mixed_norm: need at least two time samples on a positive interval");
  std::vector<double> inner;
  inner.reserve(u.size());
  for (const auto& v : u) inner.push_back(lq_norm(v, quad, q));
  if (std::isinf(p)) return *std::max_element(inner.begin(), inner.end());
  const double dt = T / static_cast<double>(u.size() - 1);
  double s = 0;
  for (std::size_t j = 0; j < inner.size(); ++j)
    s += (j == 0 || j + 1 == inner.size() ? 0.5 : 1.0) * std::pow(inner[j], p);
  return std::pow(s * dt, 1 / p);
}

template <int Dim>
double mixed_norm(const std::vector<GridFunction<Dim>>& u, double T, double p, double q) {
  require(!u.empty(), "mixed_norm: no samples");
  std::vector<std::vector<cd>> v;
  v.reserve(u.size());
  for (const auto& g : u) v.emplace_back(g.values().begin(), g.values().end());
  return mixed_norm(v, torus_quadrature<Dim>(u.front().size()), T, p, q);
}

// ---------------------------------------------------------------------------
// Mode families.

enum class Domain { Torus, Disk, Sphere };

inline std::string domain_name(Domain d) {
  switch (d) {
    case Domain::Torus: return "torus";
    case Domain::Disk: return "disk";
    case Domain::Sphere: return "sphere";
  }
  return "";
}

struct Mode {
  int k = 0;
  double eigenvalue = 0;
  std::vector<cd> samples;
};

struct ModeFamily {
  Domain domain = Domain::Torus;
  SpatialQuadrature quadrature;
  std::vector<Mode> modes;
};

// Composite Gauss-Legendre rule on [a, b].
inline QuadratureRule composite_gauss(int panels, int order, double a, double b) {
  QuadratureRule out;
  for (int p = 0; p < panels; ++p) {
    const auto q = gauss_legendre(order, a + (b - a) * p / panels, a + (b - a) * (p + 1) / panels);
    out.nodes.insert(out.nodes.end(), q.nodes.begin(), q.nodes.end());
    out.weights.insert(out.weights.end(), q.weights.begin(), q.weights.end());
  }
  return out;
}

// First positive zero j_{k,1} of J_k: bisection inside [k, k + 2 k^{1/3} + 4]
// after locating a sign change near the asymptotic seed.
inline double bessel_first_zero(int k) {
  require(k >= 0, "bessel_first_zero: order must be non-negative");
  auto J = [k](double x) { return std::cyl_bessel_j(static_cast<double>(k), x); };
  const double lo0 = std::max(static_cast<double>(k), 1.0), hi0 = k + 2 * std::cbrt(static_cast<double>(k)) + 4;
  const double c = std::cbrt(static_cast<double>(std::max(k, 1)));
  const double seed = k == 0 ? 2.404825557695773 : k + 1.8557571 * c + 1.033150 / c - 0.00397 / k;
  // walk outward from the seed to the first sign change above lo0
  const int scan = 400;
  double a = lo0, fa = J(a), b = 0;
  bool found = false;
  for (int i = 1; i <= scan && !found; ++i) {
    b = lo0 + (hi0 - lo0) * i / scan;
    const double fb = J(b);
    if ((fa > 0) != (fb > 0)) {
      found = true;
      break;
    }
    a = b;
    fa = fb;
  }
  if (!found || std::abs(0.5 * (a + b) - seed) > 0.5 * (hi0 - lo0))
    throw NumericalError("bessel_first_zero: no sign change bracketed for order " + std::to_string(k));
  while (b - a > 1e-12 * b) {
    const double m = 0.5 * (a + b), fm = J(m);
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// Polar grid: composite Gauss in r on [0, 1], uniform in theta.
struct PolarGrid {
  QuadratureRule radial;
  int angles = 0;
};

inline PolarGrid disk_grid(int k) {
  // J_k(j r) is negligible for r < k / j; panels resolve the k^{-2/3} boundary layer.
  return {composite_gauss(32, 16, 0.0, 1.0), 2 * k + 8};
}

// Dirichlet eigenfunction c_k J_k(j_{k,1} r) e^{i k theta} on the unit disk.
inline Mode disk_gallery_mode(int k, const PolarGrid& grid) {
  require(k >= 1, "disk_gallery_mode: k must be at least 1");
  const double j = bessel_first_zero(k);
  const auto& r = grid.radial;
  double mass = 0;
  std::vector<double> prof(r.nodes.size());
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    prof[i] = std::cyl_bessel_j(static_cast<double>(k), j * r.nodes[i]);
    mass += r.weights[i] * prof[i] * prof[i] * r.nodes[i];
  }
  const double c = 1 / std::sqrt(kTwoPi * mass);
  Mode m;
  m.k = k;
  m.eigenvalue = j * j;
  m.samples.reserve(prof.size() * grid.angles);
  for (std::size_t i = 0; i < prof.size(); ++i)
    for (int a = 0; a < grid.angles; ++a) m.samples.push_back(c * prof[i] * std::polar(1.0, kTwoPi * k * a / grid.angles));
  return m;
}

inline SpatialQuadrature polar_quadrature(const PolarGrid& grid) {
  SpatialQuadrature q;
  for (std::size_t i = 0; i < grid.radial.nodes.size(); ++i)
    for (int a = 0; a < grid.angles; ++a)
      q.weights.push_back(grid.radial.weights[i] * grid.radial.nodes[i] * kTwoPi / grid.angles);
  return q;
}

// Bessel's equation residual r^2 J'' + r J' + (j^2 r^2 - k^2) J for J = J_k(j r),
// largest over the radial nodes, relative to max |J|.
inline double disk_radial_residual(int k, const PolarGrid& grid) {
  const double j = bessel_first_zero(k), nu = k;
  auto J = [&](double order, double x) { return std::cyl_bessel_j(order, x); };
  double worst = 0, top = 0;
  for (double r : grid.radial.nodes) {
    const double x = j * r;
    const double f = J(nu, x);
    const double d1 = 0.5 * (J(nu - 1, x) - J(nu + 1, x)) * j;
    const double d2 = 0.25 * (J(nu - 2, x) - 2 * f + J(nu + 2, x)) * j * j;
    worst = std::max(worst, std::abs(r * r * d2 + r * d1 + (j * j * r * r - nu * nu) * f));
    top = std::max(top, std::abs(f));
  }
  return worst / top;
}

inline ModeFamily disk_gallery_family(int kmin, int kmax) {
  require(kmin >= 1 && kmax >= kmin, "disk_gallery_family: bad index range");
  ModeFamily fam;
  fam.domain = Domain::Disk;
  // one grid for all members so that they share the quadrature
  const PolarGrid grid = disk_grid(kmax);
  fam.quadrature = polar_quadrature(grid);
  for (int k = kmin; k <= kmax; ++k) fam.modes.push_back(disk_gallery_mode(k, grid));
  return fam;
}

// Sphere grid: Gauss in cos(theta), uniform in phi.
struct SphereGrid {
  QuadratureRule polar;  // nodes are cos(theta)
  int angles = 0;
};

inline SphereGrid sphere_grid(int k) { return {composite_gauss(16, 16, -1.0, 1.0), 2 * k + 8}; }

inline SpatialQuadrature sphere_quadrature(const SphereGrid& grid) {
  SpatialQuadrature q;
  for (double w : grid.polar.weights)
    for (int a = 0; a < grid.angles; ++a) q.weights.push_back(w * kTwoPi / grid.angles);
  return q;
}

// Y_k^k = c_k (sin theta)^k e^{i k phi}, unit norm in L^2(S^2).
inline Mode sphere_highest_weight(int k, const SphereGrid& grid) {
  require(k >= 1, "sphere_highest_weight: k must be at least 1");
  const auto& q = grid.polar;
  double mass = 0;
  std::vector<double> prof(q.nodes.size());
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    prof[i] = std::pow(1 - q.nodes[i] * q.nodes[i], 0.5 * k);
    mass += q.weights[i] * prof[i] * prof[i];
  }
  const double c = 1 / std::sqrt(kTwoPi * mass);
  Mode m;
  m.k = k;
  m.eigenvalue = static_cast<double>(k) * (k + 1);
  for (std::size_t i = 0; i < prof.size(); ++i)
    for (int a = 0; a < grid.angles; ++a) m.samples.push_back(c * prof[i] * std::polar(1.0, kTwoPi * k * a / grid.angles));
  return m;
}

// |Delta Y + k (k + 1) Y| at the quadrature nodes, from the closed-form
// derivatives of (sin theta)^k, relative to max |Y|.
inline double sphere_laplacian_residual(int k, const SphereGrid& grid) {
  double worst = 0, top = 0;
  for (double c : grid.polar.nodes) {
    const double s = std::sqrt(1 - c * c);
    const double f = std::pow(s, k);
    // (1/s) d/dtheta (s d/dtheta s^k) - k^2 s^{k-2}
    const double lap = k * (k * std::pow(s, k - 2) * c * c - f) - k * k * std::pow(s, k - 2);
    worst = std::max(worst, std::abs(lap + k * (k + 1.0) * f));
    top = std::max(top, f);
  }
  return worst / top;
}

// Mass of |Y_k^k|^2 within |theta - pi/2| <= width.
inline double sphere_band_mass(int k, double width, const SphereGrid& grid) {
  const auto m = sphere_highest_weight(k, grid);
  const auto q = sphere_quadrature(grid);
  double in = 0;
  for (std::size_t i = 0; i < grid.polar.nodes.size(); ++i) {
    const double theta = std::acos(grid.polar.nodes[i]);
    if (std::abs(theta - 0.5 * std::numbers::pi) > width) continue;
    for (int a = 0; a < grid.angles; ++a) {
      const std::size_t idx = i * grid.angles + a;
      in += q.weights[idx] * std::norm(m.samples[idx]);
    }
  }
  return in;
}

inline ModeFamily sphere_highest_weight_family(int kmin, int kmax) {
  require(kmin >= 1 && kmax >= kmin, "sphere_highest_weight_family: bad index range");
  ModeFamily fam;
  fam.domain = Domain::Sphere;
  const SphereGrid grid = sphere_grid(kmax);
  fam.quadrature = sphere_quadrature(grid);
  for (int k = kmin; k <= kmax; ++k) fam.modes.push_back(sphere_highest_weight(k, grid));
  return fam;
}

// Normalized plane waves (2 pi)^{-1/2} e^{ikx} on a 1D torus grid.
inline ModeFamily torus_plane_wave_family(int kmin, int kmax, int n) {
  require(kmin >= 1 && kmax >= kmin && 2 * kmax < n, "torus_plane_wave_family: bad index range");
  ModeFamily fam;
  fam.domain = Domain::Torus;
  fam.quadrature = torus_quadrature<1>(n);
  for (int k = kmin; k <= kmax; ++k) {
    Mode m;
    m.k = k;
    m.eigenvalue = static_cast<double>(k) * k;
    for (int i = 0; i < n; ++i) m.samples.push_back(std::polar(1 / std::sqrt(kTwoPi), kTwoPi * k * i / n));
    fam.modes.push_back(std::move(m));
  }
  return fam;
}

// Time evolution of one mode at time t, as samples on the family quadrature.
using ModeEvolution = std::function<std::vector<cd>(const Mode&, double)>;

// Stationary evolution e^{i t lambda} phi.
inline ModeEvolution stationary_evolution() {
  return [](const Mode& m, double t) {
    std::vector<cd> v = m.samples;
    const cd phase = std::polar(1.0, t * m.eigenvalue);
    for (auto& x : v) x *= phase;
    return v;
  };
}

struct LossFitOptions {
  double T = 1.0;
  int time_samples = 17;
};

// r_k = ||evolve(phi_k)||_{L^p([0,T]; L^q)} / ||phi_k||_{L^2}; slope of
// log r_k against log lambda_k^{1/2}.
inline ExperimentRecord loss_exponent_fit(const ModeFamily& fam, double p, double q,
                                          const ModeEvolution& evolve = stationary_evolution(),
                                          LossFitOptions opts = {}) {
  require(fam.modes.size() >= 6, "loss_exponent_fit: need at least six modes");
  ExperimentRecord rec;
  rec.name = "modes";
  rec.params["domain"] = domain_name(fam.domain);
  rec.params["p"] = format_number(p);
  rec.params["q"] = format_number(q);
  rec.params["T"] = format_number(opts.T);
  rec.table.columns = {"k", "lambda", "lq_norm", "quotient"};
  std::vector<double> freq, quot;
  for (const auto& m : fam.modes) {
    std::vector<std::vector<cd>> u;
    for (int j = 0; j < opts.time_samples; ++j) u.push_back(evolve(m, opts.T * j / (opts.time_samples - 1)));
    const double l2 = lq_norm(m.samples, fam.quadrature, 2.0);
    const double r = mixed_norm(u, fam.quadrature, opts.T, p, q) / l2;
    rec.table.add_row({static_cast<double>(m.k), m.eigenvalue, lq_norm(m.samples, fam.quadrature, q), r});
    if (m.eigenvalue > 0 && r > 0) {
      freq.push_back(std::sqrt(m.eigenvalue));
      quot.push_back(r);
    }
  }
  if (freq.size() < 3) throw NumericalError("loss_exponent_fit: fewer than three usable modes");
  const auto fit = fit_power_law(freq, quot);
  rec.scalars["slope"] = fit.slope;
  rec.scalars["intercept"] = fit.intercept;
  rec.scalars["fit_residual"] = fit.residual;
  return rec;
}

// ---------------------------------------------------------------------------
// Strichartz quotients of the exact evolution for random band-limited data.

template <int Dim>
double strichartz_quotient(const SpectralDecomposition<Dim>& dec, const GridFunction<Dim>& f, double T, double p,
                           double q, int time_samples = 129) {
  std::vector<double> times(time_samples);
  for (int j = 0; j < time_samples; ++j) times[j] = T * j / (time_samples - 1);
  return mixed_norm(dec.evolve(f, times), T, p, q) / f.l2_norm();
}

}  // namespace wps
