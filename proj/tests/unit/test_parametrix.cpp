#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "support/random_fields.hpp"
#include "wps/parametrix.hpp"
#include "wps/presets.hpp"

namespace {

using namespace wps;

GridFunction<1> band_data(double mu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return wps::testing::random_band<1>(default_field_grid(1, mu), mu / 4, 4 * mu, rng);
}

TEST(ActionPhase, FlatClosedForm) {
  const auto field = CoefficientField<2>::flat(16);
  const Vec<2> x(1.0, 2.0), xi(20.0, -9.0);
  EXPECT_NEAR(action_phase(field, 32.0, x, xi, 0.01), 0.01 * xi.squaredNorm(), 1e-10);
  EXPECT_EQ(action_phase(field, 32.0, x, xi, 0.0), 0.0);
}

TEST(ActionPhase, MatchesForwardAction) {
  // Along the backward trajectory psi equals t sigma at the endpoint.
  const double mu = 32;
  const auto field = perturbed_field<2>(mu, 64);
  const Vec<2> x(0.3, 4.0), xi(25.0, 11.0);
  const double t = 1.0 / mu;
  EXPECT_NEAR(action_phase(field, mu, x, xi, t), t * symbol_sigma(field, x, xi), 1e-9 * mu);
}

TEST(ActionPhase, RejectsFrequencyOutsideBand) {
  const auto field = CoefficientField<1>::flat(16);
  EXPECT_THROW(action_phase(field, 32.0, Vec<1>(0.0), Vec<1>(1.0), 0.01), PreconditionError);
  EXPECT_THROW(action_phase(field, 32.0, Vec<1>(0.0), Vec<1>(300.0), 0.01), PreconditionError);
}

TEST(Evolve, ZeroTimeIsIdentity) {
  const double mu = 32;
  const auto f = band_data(mu, 1);
  const auto u = evolve_homogeneous(f, perturbed_field<1>(mu, f.size()), mu, 0.0);
  EXPECT_LT((u - f).l2_norm() / f.l2_norm(), 1e-10);
}

TEST(Evolve, RejectsDataOutsideBand) {
  const double mu = 32;
  std::mt19937_64 rng(2);
  const auto f = wps::testing::random_band<1>(default_field_grid(1, mu), 1, 4, rng);
  EXPECT_THROW(evolve_homogeneous(f, CoefficientField<1>::flat(f.size()), mu, 0.01), PreconditionError);
}

TEST(Evolve, FlatAccuracyAndEnergy) {
  std::vector<double> constants;
  for (double mu : {16.0, 32.0, 64.0}) {
    const auto f = band_data(mu, 3);
    const auto flat = CoefficientField<1>::flat(f.size());
    for (double t : {1 / (mu * mu), 0.3 / mu, 1 / mu}) {
      const auto u = evolve_homogeneous(f, flat, mu, t);
      const double err = (u - wps::testing::flat_evolution(f, t)).l2_norm() / f.l2_norm();
      const double energy = u.l2_norm() / f.l2_norm();
      EXPECT_GE(energy, 0.99) << mu << " " << t;
      EXPECT_LE(energy, 1.01) << mu << " " << t;
      if (t == 1 / (mu * mu)) {
        EXPECT_LE(err, 5 / mu);
      }
      constants.push_back(err / (mu * t));
    }
  }
  EXPECT_LE(max_over_min(constants), 4.0);
}

TEST(Evolve, ShortcutMatchesGenericPath) {
  const double mu = 16;
  const auto f = band_data(mu, 4);
  const auto flat = CoefficientField<1>::flat(f.size());
  ParametrixOptions generic;
  generic.constant_metric_shortcut = false;
  const auto a = evolve_homogeneous(f, flat, mu, 1 / mu, generic);
  const auto b = evolve_homogeneous(f, flat, mu, 1 / mu);
  EXPECT_LT((a - b).l2_norm() / f.l2_norm(), 1e-10);
}

TEST(Evolve, PerturbedEnergyUniformAndStepConverged) {
  std::vector<double> energies;
  for (double mu : {16.0, 32.0}) {
    const auto f = band_data(mu, 5);
    const auto field = perturbed_field<1>(mu, f.size());
    const auto u = evolve_homogeneous(f, field, mu, 1 / mu);
    energies.push_back(u.l2_norm() / f.l2_norm());
    EXPECT_LE(energies.back(), 1.01);
    ParametrixOptions fine;
    fine.steps_per_unit = 128;
    const auto v = evolve_homogeneous(f, field, mu, 1 / mu, fine);
    EXPECT_LT((u - v).l2_norm() / f.l2_norm(), 1e-6);
  }
  EXPECT_LE(max_over_min(energies), 1.05);
}

TEST(Evolve, NarrowWindowThrows) {
  const double mu = 32;
  const auto f = band_data(mu, 6);
  const auto field = perturbed_field<1>(mu, f.size());
  const auto [lo, hi] = detail::spectral_box(f);
  const auto grid = PhaseSpaceGrid<1>::covering(mu, lo, hi);
  const ParametrixState<1> state(field, grid, 4 / mu);
  EXPECT_THROW(state.apply(f), NumericalError);
}

TEST(Duhamel, ZeroForcingIsHomogeneous) {
  const double mu = 16;
  const auto f = band_data(mu, 7);
  const auto field = perturbed_field<1>(mu, f.size());
  const std::vector<GridFunction<1>> zero(3, GridFunction<1>(f.size()));
  const auto a = evolve_duhamel(f, zero, field, mu, 0.5 / mu);
  const auto b = evolve_homogeneous(f, field, mu, 0.5 / mu);
  EXPECT_EQ((a - b).sup_norm(), 0.0);
}

TEST(Duhamel, LinearInForcing) {
  const double mu = 16;
  const auto f = band_data(mu, 8);
  const auto field = perturbed_field<1>(mu, f.size());
  std::vector<GridFunction<1>> F1, F2, F3;
  for (std::uint64_t j = 0; j < 3; ++j) {
    F1.push_back(band_data(mu, 20 + j));
    F2.push_back(band_data(mu, 30 + j));
    F3.push_back(F1.back() + cd(2.0, -1.0) * F2.back());
  }
  const double t = 0.5 / mu;
  const auto u0 = evolve_homogeneous(f, field, mu, t);
  const auto a = evolve_duhamel(f, F1, field, mu, t) - u0;
  const auto b = evolve_duhamel(f, F2, field, mu, t) - u0;
  const auto c = evolve_duhamel(f, F3, field, mu, t) - u0;
  const auto combo = a + cd(2.0, -1.0) * b;
  EXPECT_LT((c - combo).l2_norm() / c.l2_norm(), 1e-12);
}

TEST(Duhamel, PhaseSpaceSelfConsistency) {
  // For smooth V(t, x, xi) and G = (d_t + H_a . grad + i sigma) V:
  //   V(t) = e^{-i psi(t)} V(0, chi_{-t}) + int_0^t e^{-i psi(t - r)} G(r, chi_{r - t}) dr.
  const double mu = 32, t = 1 / mu;
  const auto field = perturbed_field<2>(mu, 64);
  auto V = [](double r, const Vec<2>& x, const Vec<2>& xi) {
    return std::exp(cd(0.3 * r, std::sin(x[0]) + 0.5 * std::cos(x[1]) + 0.02 * xi[0] - 0.01 * xi[1]));
  };
  auto G = [&](double r, const Vec<2>& x, const Vec<2>& xi) {
    const auto jet = field.metric_jet(x);
    const Vec<2> xdot = -2 * jet.g * xi;
    Vec<2> xidot;
    for (int k = 0; k < 2; ++k) xidot[k] = xi.dot(jet.dg[k] * xi);
    const cd phase_dt(0.3, 0.0);
    const cd dx0(0, std::cos(x[0])), dx1(0, -0.5 * std::sin(x[1]));
    const cd dxi0(0, 0.02), dxi1(0, -0.01);
    const cd sigma(0, xi.dot(jet.g * xi));
    return (phase_dt + xdot[0] * dx0 + xdot[1] * dx1 + xidot[0] * dxi0 + xidot[1] * dxi1 + sigma) * V(r, x, xi);
  };
  for (const auto& [x, xi] : {std::pair{Vec<2>(0.5, 1.0), Vec<2>(30.0, -10.0)},
                              std::pair{Vec<2>(4.0, 2.5), Vec<2>(-12.0, 50.0)}}) {
    const auto back = flow_back(field, mu, x, xi, t, 256);
    const cd homogeneous = std::polar(1.0, -back.psi) * V(0, back.z, back.zeta);
    const cd forced = duhamel_integral<2>(field, mu, x, xi, t, 2048, G, 256);
    const cd target = V(t, x, xi);
    EXPECT_LT(std::abs(homogeneous + forced - target) / std::abs(target), 1e-3);
  }
}

TEST(Kernel, FlatSourceFormMatchesOracle) {
  const double mu = 32;
  const auto flat = CoefficientField<1>::flat(64);
  for (double t : {1 / (mu * mu), 0.3 / mu}) {
    const wps::testing::FlatKernelOracle1D oracle(mu, t);
    const KernelQuadrature<1> K(flat, mu, t, Vec<1>(0.0), band_cells<1>(mu, t));
    double top = 0, err = 0;
    for (double r : {0.0, 0.05, 0.3, 1.0, -0.7, -2.0}) {
      top = std::max(top, std::abs(oracle(r)));
      err = std::max(err, std::abs(K(Vec<1>(r)) - oracle(r)));
    }
    EXPECT_LT(err / top, 1e-2) << t;
  }
}

TEST(Kernel, ConstantMetricMultiplierMatchesOracle) {
  const double mu = 32;
  for (double t : {1 / (mu * mu), 0.3 / mu}) {
    const wps::testing::FlatKernelOracle1D oracle(mu, t);
    const auto K = constant_metric_kernel<1>(Mat<1>::Identity(), mu, t);
    double top = 0, err = 0;
    for (double r : {0.0, 0.05, 0.3, 1.0, -0.7, -2.0, 5.0}) {
      const double x = r >= 0 ? r / 2 : r / 2 + kTwoPi;  // period 4 pi
      top = std::max(top, std::abs(oracle(r)));
      err = std::max(err, std::abs(K.evaluate(Vec<1>(x)) - oracle(r)));
    }
    EXPECT_LT(err / top, 1e-4) << t;
  }
}

TEST(Kernel, FlatTranslationAndReflection) {
  const double mu = 16, t = 0.1 / mu;
  const auto flat = CoefficientField<1>::flat(64);
  const auto cells = band_cells<1>(mu, t);
  const KernelQuadrature<1> A(flat, mu, t, Vec<1>(0.0), cells);
  const KernelQuadrature<1> B(flat, mu, t, Vec<1>(1.3), cells);
  for (double r : {0.0, 0.1, 0.35, 0.8}) {
    const double a = std::abs(A(Vec<1>(r)));
    EXPECT_NEAR(a, std::abs(B(Vec<1>(1.3 + r))), 1e-8 * std::max(a, 1.0));
    EXPECT_NEAR(a, std::abs(A(Vec<1>(-r))), 1e-8 * std::max(a, 1.0));
  }
}

TEST(Kernel, ShortTimeSupBound) {
  for (double mu : {16.0, 32.0}) {
    const double t = 1 / (mu * mu);
    EXPECT_LE(sup_estimate(constant_metric_kernel<1>(Mat<1>::Identity(), mu, t)).value, 10 * mu);
    EXPECT_LE(kernel_sup<1>(perturbed_field<1>(mu, 512), mu, t, Vec<1>(0.1)).value, 10 * mu);
  }
}

template <int Dim>
double cell_decay_order(const CoefficientField<Dim>& field, double mu, double t) {
  const double rt = std::sqrt(t);
  Lattice<Dim> m{};
  m[0] = static_cast<int>(std::round(2 * mu * rt));
  Vec<Dim> x = Vec<Dim>::Constant(0.4), xi = Vec<Dim>::Zero();
  xi[0] = m[0] / rt;
  const KernelQuadrature<Dim> K(field, mu, t, x, {m});
  const auto center = integrate_flow(field, x, xi, t, 256).z;
  std::vector<double> dist, envelope;
  for (int j = 1; j <= 5; ++j) {
    const double d = rt * std::pow(2.0, j);
    double e = 0;
    for (double s = d; s <= 40 * rt; s += rt / 16)
      for (double sign : {-1.0, 1.0}) {
        Vec<Dim> y = center;
        y[0] += sign * s;
        e = std::max(e, std::abs(K(y)));
      }
    dist.push_back(1 + d / rt);
    envelope.push_back(e);
  }
  return -fit_power_law(dist, envelope).slope;
}

TEST(Kernel, CellDecayOrder) {
  for (double mu : {16.0, 64.0}) {
    EXPECT_GE(cell_decay_order(CoefficientField<1>::flat(64), mu, 0.3 / mu), 4.0);
    EXPECT_GE(cell_decay_order(perturbed_field<1>(mu, 512), mu, 0.3 / mu), 4.0);
  }
}

TEST(Kernel, QuadratureRefinementStable) {
  const double mu = 16, t = 0.3 / mu;
  const auto field = perturbed_field<1>(mu, 512);
  const auto cells = band_cells<1>(mu, t);
  KernelQuadratureOptions fine;
  fine.refine = 2;
  const KernelQuadrature<1> A(field, mu, t, Vec<1>(0.4), cells);
  const KernelQuadrature<1> B(field, mu, t, Vec<1>(0.4), cells, fine);
  std::vector<double> ys;
  double top = 0;
  for (double y = -4.0; y <= 4.0; y += 0.05) {
    ys.push_back(y);
    top = std::max(top, std::abs(A(Vec<1>(y))));
  }
  for (double y : ys) EXPECT_LE(std::abs(A(Vec<1>(y)) - B(Vec<1>(y))), 1e-3 * top) << y;
}

TEST(Kernel, CellSumEqualsFullKernel) {
  const double mu = 16, t = 0.2 / mu;
  const auto field = perturbed_field<1>(mu, 512);
  const auto cells = band_cells<1>(mu, t);
  const KernelQuadrature<1> K(field, mu, t, Vec<1>(1.0), cells);
  cd s = 0;
  for (const auto& m : cells) s += kernel_cell<1>(field, mu, t, Vec<1>(1.0), Vec<1>(0.8), m);
  EXPECT_LT(std::abs(s - K(Vec<1>(0.8))), 1e-10 * std::max(1.0, std::abs(s)));
}

TEST(Dispersive, FlatSlopes) {
  const double mu1 = 32;
  const auto r1 = dispersive_scan(CoefficientField<1>::flat(64), mu1, logspace(1 / (mu1 * mu1), 0.3 / mu1, 8));
  EXPECT_NEAR(r1.scalar("slope"), -0.5, 0.15);
  EXPECT_LE(r1.scalar("short_time_constant"), 10.0);
  const double mu2 = 16;
  const auto r2 = dispersive_scan(CoefficientField<2>::flat(16), mu2, logspace(1 / (mu2 * mu2), 0.3 / mu2, 6));
  EXPECT_NEAR(r2.scalar("slope"), -1.0, 0.2);
  EXPECT_LE(r2.scalar("short_time_constant"), 10.0);
}

TEST(Dispersive, PerturbedSlope1D) {
  const double mu = 16;
  const auto r = dispersive_scan(perturbed_field<1>(mu, 512), mu, logspace(1 / (mu * mu), 0.3 / mu, 6));
  EXPECT_NEAR(r.scalar("slope"), -0.5, 0.2);
  EXPECT_TRUE(r.all_pass());
}

TEST(Dispersive, RejectsTimesOutsideRange) {
  const double mu = 16;
  EXPECT_THROW(dispersive_scan(CoefficientField<1>::flat(64), mu, logspace(1e-5, 0.3 / mu, 6)), PreconditionError);
  EXPECT_THROW(dispersive_scan(CoefficientField<1>::flat(64), mu, logspace(1 / (mu * mu), 1.0, 6)), PreconditionError);
}

TEST(XzBound, FlatClosedForm) {
  // Flat: the numerator is 2t (xi_m - zeta) with |xi_m - zeta| <= (2/t)^{1/2}.
  const auto rec = xz_bound_check(CoefficientField<2>::flat(16), 32.0, 40);
  EXPECT_LE(rec.scalar("max_ratio"), 2 * std::sqrt(2.0) + 1e-9);
}

TEST(XzBound, PerturbedMuUniform) {
  std::vector<double> v;
  for (double mu : {16.0, 32.0, 64.0}) v.push_back(xz_bound_check(perturbed_field<2>(mu, 64), mu, 40).scalar("max_ratio"));
  EXPECT_GT(*std::min_element(v.begin(), v.end()), 0.0);
  EXPECT_LE(max_over_min(v), 4.0);
}

}  // namespace
