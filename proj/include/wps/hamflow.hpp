#pragma once

// Bicharacteristic flow of a(x, xi) = -xi^T G(x) xi:
//   dz/dt = -2 G(z) zeta,   dzeta_k/dt = zeta^T (d_k G)(z) zeta,
// integrated jointly with the variational equations for the Jacobian
// d(z_t, zeta_t)/d(z, zeta), the action int sigma and int d^2_zeta a.

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "wps/coeffield.hpp"
#include "wps/core/record.hpp"

namespace wps {

template <int Dim>
struct FlowPoint {
  double t = 0;
  Vec<Dim> z = Vec<Dim>::Zero();
  Vec<Dim> zeta = Vec<Dim>::Zero();
  Mat<Dim> dz_dz = Mat<Dim>::Identity();      // d z_t / d z
  Mat<Dim> dz_dzeta = Mat<Dim>::Zero();       // d z_t / d zeta
  Mat<Dim> dzeta_dz = Mat<Dim>::Zero();       // d zeta_t / d z
  Mat<Dim> dzeta_dzeta = Mat<Dim>::Identity();
  double action = 0;                           // int_0^t sigma(chi_s) ds
  Mat<Dim> hessian_integral = Mat<Dim>::Zero();  // int_0^t d^2_zeta a(chi_s) ds

  // d_zeta zeta_t^T d_z z_t - d_zeta z_t^T d_z zeta_t - I
  double symplectic_residual() const {
    const Mat<Dim> m = dzeta_dzeta.transpose() * dz_dz - dz_dzeta.transpose() * dzeta_dz - Mat<Dim>::Identity();
    return m.cwiseAbs().maxCoeff();
  }

  // Max deviation of J^T Omega J from Omega over all blocks.
  double full_symplectic_residual() const {
    Eigen::Matrix<double, 2 * Dim, 2 * Dim> J, Omega = Eigen::Matrix<double, 2 * Dim, 2 * Dim>::Zero();
    J << dz_dz, dz_dzeta, dzeta_dz, dzeta_dzeta;
    Omega.template topRightCorner<Dim, Dim>() = Mat<Dim>::Identity();
    Omega.template bottomLeftCorner<Dim, Dim>() = -Mat<Dim>::Identity();
    return (J.transpose() * Omega * J - Omega).cwiseAbs().maxCoeff();
  }
};

// sigma = a - xi . d_xi a = xi^T G xi
template <int Dim>
double symbol_sigma(const CoefficientField<Dim>& field, const Vec<Dim>& x, const Vec<Dim>& xi) {
  return xi.dot(field.metric_jet(x).g * xi);
}

namespace detail {

template <int Dim>
struct FlowLayout {
  static constexpr int kZ = 0, kZeta = Dim, kJ = 2 * Dim, kAction = kJ + 4 * Dim * Dim, kHess = kAction + 1,
                       kSize = kHess + Dim * Dim;
  using State = Eigen::Matrix<double, kSize, 1>;
  using Jac = Eigen::Matrix<double, 2 * Dim, 2 * Dim>;

  static State pack(const FlowPoint<Dim>& p) {
    State s;
    s.template segment<Dim>(kZ) = p.z;
    s.template segment<Dim>(kZeta) = p.zeta;
    Jac J;
    J << p.dz_dz, p.dz_dzeta, p.dzeta_dz, p.dzeta_dzeta;
    s.template segment<4 * Dim * Dim>(kJ) = Eigen::Map<const Eigen::Matrix<double, 4 * Dim * Dim, 1>>(J.data());
    s[kAction] = p.action;
    s.template segment<Dim * Dim>(kHess) = Eigen::Map<const Eigen::Matrix<double, Dim * Dim, 1>>(p.hessian_integral.data());
    return s;
  }
  static FlowPoint<Dim> unpack(const State& s, double t) {
    FlowPoint<Dim> p;
    p.t = t;
    p.z = s.template segment<Dim>(kZ);
    p.zeta = s.template segment<Dim>(kZeta);
    const Jac J = Eigen::Map<const Jac>(s.template segment<4 * Dim * Dim>(kJ).data());
    p.dz_dz = J.template topLeftCorner<Dim, Dim>();
    p.dz_dzeta = J.template topRightCorner<Dim, Dim>();
    p.dzeta_dz = J.template bottomLeftCorner<Dim, Dim>();
    p.dzeta_dzeta = J.template bottomRightCorner<Dim, Dim>();
    p.action = s[kAction];
    p.hessian_integral = Eigen::Map<const Mat<Dim>>(s.template segment<Dim * Dim>(kHess).data());
    return p;
  }
};

template <int Dim>
typename FlowLayout<Dim>::State flow_rhs(const CoefficientField<Dim>& field, const typename FlowLayout<Dim>::State& s,
                                         bool with_jacobian) {
  using L = FlowLayout<Dim>;
  typename L::State d = L::State::Zero();
  const Vec<Dim> z = s.template segment<Dim>(L::kZ), zeta = s.template segment<Dim>(L::kZeta);
  const auto mj = field.metric_jet(z);
  const Vec<Dim> gz = mj.g * zeta;
  d.template segment<Dim>(L::kZ) = -2.0 * gz;
  std::array<Vec<Dim>, Dim> dgz;
  for (int k = 0; k < Dim; ++k) {
    dgz[k] = mj.dg[k] * zeta;
    d[L::kZeta + k] = zeta.dot(dgz[k]);
  }
  d[L::kAction] = zeta.dot(gz);
  Eigen::Map<Mat<Dim>>(d.template segment<Dim * Dim>(L::kHess).data()) = -2.0 * mj.g;
  if (!with_jacobian) return d;
  typename L::Jac A;
  for (int i = 0; i < Dim; ++i)
    for (int k = 0; k < Dim; ++k) {
      A(i, k) = -2.0 * dgz[k][i];
      A(i, Dim + k) = -2.0 * mj.g(i, k);
      A(Dim + k, i) = zeta.dot(mj.d2g[k][i] * zeta);
      A(Dim + k, Dim + i) = 2.0 * dgz[k][i];
    }
  const typename L::Jac J = Eigen::Map<const typename L::Jac>(s.template segment<4 * Dim * Dim>(L::kJ).data());
  const typename L::Jac dJ = A * J;
  d.template segment<4 * Dim * Dim>(L::kJ) = Eigen::Map<const Eigen::Matrix<double, 4 * Dim * Dim, 1>>(dJ.data());
  return d;
}

}  // namespace detail

// Classical RK4 with `steps` equal steps from `start` over duration t (t < 0
// integrates backward). `visit(point)` is called after every step.
template <int Dim, class Visit>
FlowPoint<Dim> integrate_flow_from(const CoefficientField<Dim>& field, const FlowPoint<Dim>& start, double t, int steps,
                                   Visit&& visit, bool with_jacobian = true) {
  require(steps >= 1, "integrate_flow: need at least one step");
  using L = detail::FlowLayout<Dim>;
  auto s = L::pack(start);
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    const auto k1 = detail::flow_rhs(field, s, with_jacobian);
    const auto k2 = detail::flow_rhs<Dim>(field, s + 0.5 * h * k1, with_jacobian);
    const auto k3 = detail::flow_rhs<Dim>(field, s + 0.5 * h * k2, with_jacobian);
    const auto k4 = detail::flow_rhs<Dim>(field, s + h * k3, with_jacobian);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    visit(L::unpack(s, start.t + h * (i + 1)));
  }
  return L::unpack(s, start.t + t);
}

template <int Dim>
FlowPoint<Dim> integrate_flow(const CoefficientField<Dim>& field, const Vec<Dim>& z0, const Vec<Dim>& zeta0, double t,
                              int steps) {
  FlowPoint<Dim> p;
  p.z = z0;
  p.zeta = zeta0;
  return integrate_flow_from(field, p, t, steps, [](const FlowPoint<Dim>&) {});
}

// Steps for duration t at frequency scale mu: 1024 per unit mu^{-1}.
inline int default_flow_steps(double mu, double t, int per_unit = 1024) {
  return std::max(8, static_cast<int>(std::ceil(per_unit * std::abs(t) * mu)));
}

template <int Dim>
double flow_distance(const FlowPoint<Dim>& a, const FlowPoint<Dim>& b) {
  using L = detail::FlowLayout<Dim>;
  const auto sa = L::pack(a), sb = L::pack(b);
  // position and Jacobian absolute; frequency and integrals relative to |zeta|
  const double scale = std::max(1.0, a.zeta.norm());
  double d = (a.z - b.z).cwiseAbs().maxCoeff();
  d = std::max(d, (a.zeta - b.zeta).cwiseAbs().maxCoeff() / scale);
  d = std::max(d, (sa.template segment<4 * Dim * Dim>(L::kJ) - sb.template segment<4 * Dim * Dim>(L::kJ)).cwiseAbs().maxCoeff() /
                      scale);
  d = std::max(d, std::abs(a.action - b.action) / (scale * scale));
  return d;
}

template <int Dim>
struct CertifiedFlow {
  FlowPoint<Dim> point;
  double error_estimate = 0;  // Richardson estimate from step halving
  bool certified = false;
};

template <int Dim>
CertifiedFlow<Dim> integrate_flow_certified(const CoefficientField<Dim>& field, const Vec<Dim>& z0,
                                            const Vec<Dim>& zeta0, double t, int steps, double tol) {
  const auto coarse = integrate_flow(field, z0, zeta0, t, steps);
  CertifiedFlow<Dim> out;
  out.point = integrate_flow(field, z0, zeta0, t, 2 * steps);
  out.error_estimate = flow_distance(coarse, out.point) / 15.0;
  out.certified = out.error_estimate <= tol;
  return out;
}

// Observed order log2(|y_N - y_2N| / |y_2N - y_4N|).
template <int Dim>
double step_halving_order(const CoefficientField<Dim>& field, const Vec<Dim>& z0, const Vec<Dim>& zeta0, double t,
                          int steps) {
  const auto a = integrate_flow(field, z0, zeta0, t, steps);
  const auto b = integrate_flow(field, z0, zeta0, t, 2 * steps);
  const auto c = integrate_flow(field, z0, zeta0, t, 4 * steps);
  return std::log2(flow_distance(a, b) / flow_distance(b, c));
}

template <int Dim>
std::vector<FlowPoint<Dim>> integrate_trajectory(const CoefficientField<Dim>& field, const Vec<Dim>& z0,
                                                 const Vec<Dim>& zeta0, double t, int steps) {
  FlowPoint<Dim> p;
  p.z = z0;
  p.zeta = zeta0;
  std::vector<FlowPoint<Dim>> out{p};
  integrate_flow_from(field, p, t, steps, [&](const FlowPoint<Dim>& q) { out.push_back(q); });
  return out;
}

template <int Dim>
Table trajectory_table(const std::vector<FlowPoint<Dim>>& traj) {
  Table tab;
  tab.columns.push_back("t");
  auto axis = [](const char* name, int i) { return std::string(name) + std::to_string(i + 1); };
  for (int i = 0; i < Dim; ++i) tab.columns.push_back(axis("z", i));
  for (int i = 0; i < Dim; ++i) tab.columns.push_back(axis("zeta", i));
  for (const char* block : {"Jzz", "Jzzeta", "Jzetaz", "Jzetazeta"})
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) tab.columns.push_back(std::string(block) + "_" + std::to_string(i + 1) + std::to_string(j + 1));
  tab.columns.push_back("symplectic_residual");
  for (const auto& p : traj) {
    std::vector<double> row{p.t};
    for (int i = 0; i < Dim; ++i) row.push_back(p.z[i]);
    for (int i = 0; i < Dim; ++i) row.push_back(p.zeta[i]);
    for (const Mat<Dim>* m : {&p.dz_dz, &p.dz_dzeta, &p.dzeta_dz, &p.dzeta_dzeta})
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) row.push_back((*m)(i, j));
    row.push_back(p.symplectic_residual());
    tab.add_row(std::move(row));
  }
  return tab;
}

// ---------------------------------------------------------------------------
// Lemma-style derivative bounds.

template <int Dim>
struct FlowSample {
  Vec<Dim> z;
  Vec<Dim> zeta;
  double t;
};

// z uniform on the torus, |zeta| log-uniform in [mu/4, 4 mu] with uniform
// direction, t uniform in (0, tmax].
template <int Dim>
std::vector<FlowSample<Dim>> draw_flow_samples(double mu, int count, double tmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FlowSample<Dim>> out;
  for (int i = 0; i < count; ++i) {
    FlowSample<Dim> s;
    for (int d = 0; d < Dim; ++d) s.z[d] = kTwoPi * u(rng);
    const double r = mu * std::pow(16.0, u(rng)) / 4.0;
    if constexpr (Dim == 1) {
      s.zeta[0] = (u(rng) < 0.5 ? -r : r);
    } else {
      const double th = kTwoPi * u(rng);
      s.zeta = Vec<2>(r * std::cos(th), r * std::sin(th));
    }
    s.t = tmax * (1.0 - u(rng));
    out.push_back(s);
  }
  return out;
}

inline double japanese(double s) { return std::sqrt(1.0 + s * s); }

// Max ratios of the first-derivative bounds, the integrated-Hessian bound and
// the second-derivative envelope mu^{2-k} t <mu^{3/2} t> (j + k = 2), the
// latter by central differences of the variational Jacobians.
template <int Dim>
ExperimentRecord jacobian_bounds_report(const CoefficientField<Dim>& field, double mu, int samples,
                                        std::uint64_t seed = 1) {
  ExperimentRecord rec;
  rec.name = "jacobian_bounds";
  rec.params["mu"] = format_number(mu);
  rec.params["samples"] = std::to_string(samples);
  rec.table.columns = {"t", "zeta_norm", "dz_dz", "dz_dzeta", "dzeta_dz", "dzeta_dzeta", "hessian_integral",
                       "second_zz", "second_zzeta", "second_zetazeta"};
  const double dz = 1e-4 / std::sqrt(mu), dzeta = 1e-4 * mu;
  require(dz > 1e-12 && dzeta > 1e-12, "jacobian_bounds_report: finite-difference step underflow");
  auto norm = [](const auto& m) { return m.cwiseAbs().maxCoeff(); };
  std::vector<double> mx(8, 0.0);
  for (const auto& s : draw_flow_samples<Dim>(mu, samples, 1.0 / mu, seed)) {
    const int steps = default_flow_steps(mu, s.t);
    const auto p = integrate_flow(field, s.z, s.zeta, s.t, steps);
    const double t = s.t;
    std::vector<double> r(8);
    r[0] = norm(p.dz_dz - Mat<Dim>::Identity()) / (mu * t);
    r[1] = norm(p.dz_dzeta) / t;
    r[2] = norm(p.dzeta_dz) / (mu * mu * t);
    r[3] = norm(p.dzeta_dzeta - Mat<Dim>::Identity()) / (mu * t);
    r[4] = norm(p.dz_dzeta - p.hessian_integral) / (mu * t * t);
    // second derivatives: differentiate the Jacobian blocks in z and zeta
    double zz = 0, zzeta = 0, zetazeta = 0;
    for (int d = 0; d < Dim; ++d) {
      Vec<Dim> e = Vec<Dim>::Zero();
      e[d] = 1.0;
      const auto pz = integrate_flow(field, Vec<Dim>(s.z + dz * e), s.zeta, t, steps);
      const auto mz = integrate_flow(field, Vec<Dim>(s.z - dz * e), s.zeta, t, steps);
      const auto pk = integrate_flow(field, s.z, Vec<Dim>(s.zeta + dzeta * e), t, steps);
      const auto mk = integrate_flow(field, s.z, Vec<Dim>(s.zeta - dzeta * e), t, steps);
      // mu |d d z_t| + |d d zeta_t|
      zz = std::max(zz, mu * norm((pz.dz_dz - mz.dz_dz) / (2 * dz)) + norm((pz.dzeta_dz - mz.dzeta_dz) / (2 * dz)));
      zzeta = std::max(zzeta, mu * norm((pk.dz_dz - mk.dz_dz) / (2 * dzeta)) +
                                  norm((pk.dzeta_dz - mk.dzeta_dz) / (2 * dzeta)));
      zetazeta = std::max(zetazeta, mu * norm((pk.dz_dzeta - mk.dz_dzeta) / (2 * dzeta)) +
                                        norm((pk.dzeta_dzeta - mk.dzeta_dzeta) / (2 * dzeta)));
    }
    const double bracket = japanese(std::pow(mu, 1.5) * t);
    r[5] = zz / (mu * mu * t * bracket);
    r[6] = zzeta / (mu * t * bracket);
    r[7] = zetazeta / (t * bracket);
    for (int i = 0; i < 8; ++i) mx[i] = std::max(mx[i], r[i]);
    rec.table.add_row({t, s.zeta.norm(), r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7]});
  }
  const char* names[] = {"dz_dz",     "dz_dzeta",  "dzeta_dz",     "dzeta_dzeta",
                         "hessian_integral", "second_zz", "second_zzeta", "second_zetazeta"};
  for (int i = 0; i < 8; ++i) rec.scalars[std::string("max_") + names[i]] = mx[i];
  return rec;
}

// Discrepancy in (z_t(z,zeta), zeta_t(z,zeta)) = (z_{mu t}(z, zeta/mu), mu zeta_{mu t}(z, zeta/mu)).
template <int Dim>
ExperimentRecord rescaling_check(const CoefficientField<Dim>& field, double mu, int samples, double t = 0,
                                 std::uint64_t seed = 2) {
  ExperimentRecord rec;
  rec.name = "rescaling";
  rec.params["mu"] = format_number(mu);
  rec.table.columns = {"t", "zeta_norm", "position_gap", "frequency_gap"};
  double worst = 0;
  for (const auto& s : draw_flow_samples<Dim>(mu, samples, 1.0 / mu, seed)) {
    const double tt = t > 0 ? t : s.t;
    const int steps = default_flow_steps(mu, tt);
    const auto lhs = integrate_flow(field, s.z, s.zeta, tt, steps);
    const auto rhs = integrate_flow(field, s.z, Vec<Dim>(s.zeta / mu), mu * tt, steps);
    const double dpos = (lhs.z - rhs.z).cwiseAbs().maxCoeff();
    const double dfreq = (lhs.zeta - mu * rhs.zeta).cwiseAbs().maxCoeff() / lhs.zeta.norm();
    worst = std::max({worst, dpos, dfreq});
    rec.table.add_row({tt, s.zeta.norm(), dpos, dfreq});
  }
  rec.scalars["max_discrepancy"] = worst;
  return rec;
}

// |x_t(x, xi_m) - x_t(x, xi_l)| / (2 t^{1/2} |m - l|) over cell centers
// xi_m = t^{-1/2} m inside the band; the factor 2 is |d^2_xi a| for the flat metric.
template <int Dim>
ExperimentRecord separation_check(const CoefficientField<Dim>& field, double mu, double eps = 0.3, int samples = 8,
                                  std::uint64_t seed = 3) {
  ExperimentRecord rec;
  rec.name = "separation";
  rec.params["mu"] = format_number(mu);
  rec.params["eps"] = format_number(eps);
  rec.table.columns = {"t", "m", "l", "ratio"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double lo = INFINITY, hi = 0;
  for (int i = 0; i < samples; ++i) {
    const double t = eps / mu * std::pow(mu, -u(rng));  // log-uniform in [mu^{-2} eps, eps mu^{-1}]
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = kTwoPi * u(rng);
    const double rt = std::sqrt(t);
    const int m0 = static_cast<int>(std::ceil(rt * mu / 4)), m1 = static_cast<int>(std::floor(rt * 4 * mu));
    if (m1 <= m0) continue;
    std::uniform_int_distribution<int> pick(m0, m1);
    for (int trial = 0; trial < 4; ++trial) {
      int m = pick(rng), l = pick(rng);
      if (m == l) l = (m == m1 ? m - 1 : m + 1);
      Vec<Dim> dir = Vec<Dim>::Zero();
      dir[0] = 1.0;
      if constexpr (Dim == 2) dir = Vec<2>(std::cos(kTwoPi * u(rng)), std::sin(kTwoPi * u(rng))).normalized();
      const int steps = default_flow_steps(mu, t);
      const auto a = integrate_flow(field, x, Vec<Dim>(dir * (m / rt)), t, steps);
      const auto b = integrate_flow(field, x, Vec<Dim>(dir * (l / rt)), t, steps);
      const double ratio = (a.z - b.z).norm() / (2.0 * rt * std::abs(m - l));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      rec.table.add_row({t, static_cast<double>(m), static_cast<double>(l), ratio});
    }
  }
  rec.scalars["min_ratio"] = lo;
  rec.scalars["max_ratio"] = hi;
  rec.check("separation_ratio_in_range", lo >= 0.5 && hi <= 2.0, hi, "ratio in [1/2, 2]");
  return rec;
}

}  // namespace wps
