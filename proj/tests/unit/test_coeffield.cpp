#include <gtest/gtest.h>

#include <random>

#include "support/dirichlet.hpp"
#include "wps/coeffield.hpp"
#include "wps/core/numerics.hpp"
#include "wps/presets.hpp"

namespace {

using namespace wps;

GridFunction<1> random_grid(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  GridFunction<1> f(n);
  for (std::size_t i = 0; i < f.count(); ++i) f[i] = cd(nd(rng), nd(rng));
  return f;
}

TEST(AssembleOperator, FlatPlaneWaveIsEigenfunction) {
  const auto field = CoefficientField<1>::flat(32);
  const auto f = GridFunction<1>::from_function(32, [](const Vec<1>& x) { return std::polar(1.0, x[0]); });
  const auto pf = assemble_operator(field, f);
  for (std::size_t i = 0; i < f.count(); ++i) EXPECT_LT(std::abs(pf[i] + f[i]), 1e-12);
}

TEST(AssembleOperator, FlatTwoDimensionalPlaneWave) {
  const auto field = CoefficientField<2>::flat(16);
  const auto f = GridFunction<2>::from_function(16, [](const Vec<2>& x) { return std::polar(1.0, 2 * x[0] - 3 * x[1]); });
  const auto pf = assemble_operator(field, f);
  for (std::size_t i = 0; i < f.count(); ++i) EXPECT_LT(std::abs(pf[i] + 13.0 * f[i]), 1e-10);
}

TEST(AssembleOperator, SelfAdjointInDensityWeightedProduct) {
  std::mt19937_64 rng(7);
  const auto field = perturbed_field<1>(32, 128);
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = random_grid(128, rng), h = random_grid(128, rng);
    const cd lhs = assemble_operator(field, f).inner(h, field.rho().samples);
    const cd rhs = f.inner(assemble_operator(field, h), field.rho().samples);
    const double scale = assemble_operator(field, f).l2_norm() * h.l2_norm();
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * scale);
  }
}

TEST(AssembleOperator, SelfAdjointTwoDimensional) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  const auto field = perturbed_field<2>(16, 32);
  GridFunction<2> f(32), h(32);
  for (std::size_t i = 0; i < f.count(); ++i) {
    f[i] = cd(nd(rng), nd(rng));
    h[i] = cd(nd(rng), nd(rng));
  }
  const cd lhs = assemble_operator(field, f).inner(h, field.rho().samples);
  const cd rhs = f.inner(assemble_operator(field, h), field.rho().samples);
  EXPECT_LT(std::abs(lhs - rhs), 1e-10 * assemble_operator(field, f).l2_norm() * h.l2_norm());
}

TEST(AssembleOperator, Linear) {
  std::mt19937_64 rng(9);
  const auto field = perturbed_field<1>(32, 64);
  const auto f = random_grid(64, rng), h = random_grid(64, rng);
  const cd a(0.3, -1.2);
  const auto lhs = assemble_operator(field, a * f + h);
  const auto rhs = a * assemble_operator(field, f) + assemble_operator(field, h);
  EXPECT_LT((lhs - rhs).l2_norm(), 1e-12 * lhs.l2_norm());
}

// Fourth-order finite differences of d(g df) on an 8x refined grid.
TEST(AssembleOperator, MatchesRefinedFiniteDifferences) {
  const int n = 32, fine = 8 * n;
  auto g = [](double x) { return 1.0 + 0.1 * std::cos(x); };
  const auto field = CoefficientField<1>::from_series(
      n, {cosine_mode<1>(Vec<1>(0.0), 1.0, 0) + cosine_mode<1>(Vec<1>(1.0), 0.1, 0)}, FourierSeries<1>::constant(1.0));
  const auto f = GridFunction<1>::from_function(n, [](const Vec<1>& x) { return std::polar(1.0, x[0]); });
  const auto pf = assemble_operator(field, f);

  const double h = kTwoPi / fine;
  auto d4 = [&](const std::vector<cd>& v, int i) {
    auto at = [&](int j) { return v[(j % fine + fine) % fine]; };
    return (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h);
  };
  std::vector<cd> u(fine), flux(fine);
  for (int i = 0; i < fine; ++i) u[i] = std::polar(1.0, i * h);
  for (int i = 0; i < fine; ++i) flux[i] = g(i * h) * d4(u, i);
  double err = 0, ref = 0;
  for (int i = 0; i < n; ++i) {
    const cd oracle = d4(flux, 8 * i);
    err = std::max(err, std::abs(pf[i] - oracle));
    ref = std::max(ref, std::abs(oracle));
  }
  EXPECT_LT(err / ref, 1e-6);
}

TEST(AssembleOperator, RejectsGridMismatch) {
  const auto field = CoefficientField<1>::flat(32);
  EXPECT_THROW(assemble_operator(field, GridFunction<1>(64)), PreconditionError);
}

TEST(AssembleOperator, RejectsBrokenEllipticity) {
  const auto field = CoefficientField<1>::from_series(16, {FourierSeries<1>::constant(0.5)},
                                                      FourierSeries<1>::constant(1.0), 0.05);
  EXPECT_THROW(assemble_operator(field, GridFunction<1>(16)), PreconditionError);
}

TEST(DoubleMetric, ConstantCoefficientsUnchanged) {
  const auto flat = CoefficientField<2>::flat(16);
  const auto d = double_metric(flat);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(d.g_components()[c].samples, flat.g_components()[c].samples);
  EXPECT_EQ(d.rho().samples, flat.rho().samples);
}

TEST(DoubleMetric, LinearHalfMetricKeepsLipschitzSeminorm) {
  const int n = 256;
  GridFunction<1> probe(n);
  std::vector<double> g(n), rho(n, 1.0);
  for (int i = 0; i < n; ++i) {
    const double x = probe.point(i)[0];
    g[i] = x <= std::numbers::pi ? 1.0 + x / std::numbers::pi : 7.0;  // upper half is ignored
  }
  const auto half = CoefficientField<1>::from_samples(n, {g}, rho, 0.05);
  const auto d = double_metric(half);
  std::vector<double> half_only(g.begin(), g.begin() + n / 2 + 1);
  double semi_in = 0;
  for (int i = 0; i < n / 2; ++i)
    semi_in = std::max(semi_in, std::abs(half_only[i + 1] - half_only[i]) / probe.spacing());
  const double semi_out = lipschitz_seminorm<1>(d.g(0, 0).samples, n);
  EXPECT_NEAR(semi_out, 1.0 / std::numbers::pi, 1e-12);
  EXPECT_NEAR(semi_out, semi_in, 1e-12);
  for (int i = 1; i < n; ++i) EXPECT_EQ(d.g(0, 0).samples[i], d.g(0, 0).samples[n - i]);
  for (int i = 0; i <= n / 2; ++i) EXPECT_EQ(d.g(0, 0).samples[i], g[i]);
  EXPECT_TRUE(std::isinf(d.freq_support()));
}

TEST(DoubleMetric, EvenInNormalVariableTwoDimensional) {
  const auto p = perturbed_field<2>(16, 32);
  std::array<std::vector<double>, 3> g = {p.g(0, 0).samples, std::vector<double>(p.rho().samples.size(), 0.0),
                                          p.g(1, 1).samples};
  const auto d = double_metric(CoefficientField<2>::from_samples(32, g, p.rho().samples));
  GridFunction<2> probe(32);
  for (std::size_t idx = 0; idx < probe.count(); ++idx) {
    auto ij = probe.index(idx);
    if (ij[1] <= 16) {
      EXPECT_EQ(d.g(0, 0).samples[idx], p.g(0, 0).samples[idx]);
      continue;
    }
    auto mirror = ij;
    mirror[1] = 32 - ij[1];
    EXPECT_EQ(d.g(1, 1).samples[idx], d.g(1, 1).samples[probe.flat(mirror)]);
    EXPECT_EQ(d.rho().samples[idx], d.rho().samples[probe.flat(mirror)]);
  }
}

TEST(DoubleMetric, RejectsOffDiagonalNormalCoefficients) {
  const auto p = perturbed_field<2>(16, 32);
  EXPECT_THROW(double_metric(p), PreconditionError);
}

TEST(DoubleMetric, RejectsNegativeDensity) {
  std::vector<double> g(16, 1.0), rho(16, 1.0);
  rho[3] = -0.5;
  // Built directly so that validate() is not run before doubling.
  const auto half = CoefficientField<1>::from_samples(16, {g}, rho);
  EXPECT_THROW(double_metric(half), PreconditionError);
}

TEST(DoubleMetric, DirichletEigenfunctionExtends) {
  const auto r = wps::testing::doubled_dirichlet_residual();
  EXPECT_GT(r.eigenvalue, 0.5);
  EXPECT_LT(r.residual, 1e-6);
}

TEST(Regularize, BandLimitedInputIsIdentical) {
  const auto p = perturbed_field<1>(16, 64);
  const auto r = regularize(p, 512);  // radius 64 > 3
  EXPECT_EQ(r.g(0, 0).samples, p.g(0, 0).samples);
  EXPECT_EQ(r.rho().samples, p.rho().samples);
  EXPECT_DOUBLE_EQ(r.freq_support(), std::pow(512.0, 2.0 / 3.0));
  EXPECT_EQ(r.regularization_error(), 0.0);
}

TEST(Regularize, SpectrumVanishesOutsideBall) {
  const auto lip = lipschitz_field<1>(512, 0.1);
  const double lambda = 256, radius = std::pow(lambda, 2.0 / 3.0);
  const auto r = regularize(lip, lambda);
  const auto spec = r.g(0, 0).grid(512).spectrum();
  GridFunction<1> probe(512);
  int nonzero_inside = 0;
  for (std::size_t idx = 0; idx < spec.size(); ++idx) {
    const double k = std::abs(probe.frequency(idx)[0]);
    if (k >= radius) {
      EXPECT_LT(std::abs(spec[idx]), 1e-15);
    } else if (std::abs(spec[idx]) > 1e-8) {
      ++nonzero_inside;
    }
  }
  EXPECT_GT(nonzero_inside, 10);
  for (const auto& md : r.g(0, 0).series.modes()) EXPECT_LT(md.k.norm(), radius);
}

TEST(Regularize, IsProjection) {
  const auto lip = lipschitz_field<1>(512, 0.1);
  const auto once = regularize(lip, 256);
  const auto twice = regularize(once, 256);
  EXPECT_EQ(once.g(0, 0).samples, twice.g(0, 0).samples);
  EXPECT_EQ(once.g(0, 0).series.size(), twice.g(0, 0).series.size());
}

TEST(Regularize, SupErrorScalesLikeInverseCutoff) {
  const double eps = 0.1;
  const auto lip = lipschitz_field<1>(4096, eps);
  std::vector<double> ratios;
  for (double lambda : {64.0, 256.0, 1024.0}) {
    const auto r = regularize(lip, lambda);
    ratios.push_back(r.regularization_error() / (eps * std::pow(lambda, -2.0 / 3.0)));
  }
  for (double q : ratios) EXPECT_GT(q, 0.0);
  EXPECT_LE(max_over_min(ratios), 4.0);
}

TEST(Rescale, FlatStaysFlat) {
  const auto flat = regularize(CoefficientField<2>::flat(16), 64);
  const auto r = rescale_to_unit(flat, 64);
  EXPECT_DOUBLE_EQ(r.mu, 16.0);
  for (std::size_t idx = 0; idx < r.field.rho().samples.size(); ++idx) {
    EXPECT_EQ(r.field.g(0, 0).samples[idx], 1.0);
    EXPECT_EQ(r.field.g(0, 1).samples[idx], 0.0);
  }
  for (const auto& b : r.bounds)
    if (b.order > 0) { EXPECT_EQ(b.sup, 0.0); }
}

TEST(Rescale, SupportRadiusIsRootMu) {
  const auto lip = lipschitz_field<1>(1024, 0.05);
  for (double lambda : {64.0, 512.0}) {
    const auto r = rescale_to_unit(regularize(lip, lambda), lambda);
    EXPECT_NEAR(r.field.freq_support(), std::sqrt(r.mu), 1e-9 * r.mu);
    EXPECT_LT(r.field.max_wavenumber(), std::sqrt(r.mu) + 1e-9);
    EXPECT_FALSE(r.field.periodic());
  }
}

TEST(Rescale, PreservesPointwiseValues) {
  const auto reg = regularize(lipschitz_field<1>(1024, 0.05), 512);
  const auto r = rescale_to_unit(reg, 512);
  const double s = std::pow(512.0, -1.0 / 3.0);
  for (double x : {0.1, 0.7, 2.3}) {
    EXPECT_NEAR(r.field.g(0, 0).series(Vec<1>(x / s)), reg.g(0, 0).series(Vec<1>(x)), 1e-12);
  }
}

TEST(Rescale, DerivativeConstantsStable) {
  const auto lip = lipschitz_field<1>(8192, 0.05);
  std::map<int, std::vector<double>> by_order;
  for (double lambda : {64.0, 512.0, 4096.0}) {
    const auto r = rescale_to_unit(regularize(lip, lambda), lambda);
    for (const auto& b : r.bounds) {
      EXPECT_TRUE(std::isfinite(b.constant));
      by_order[b.order].push_back(b.constant);
    }
  }
  for (const auto& [order, cs] : by_order) {
    if (order == 0) continue;
    EXPECT_LE(max_over_min(cs), 4.0) << "order " << order;
  }
}

TEST(Rescale, RejectsUnregularizedInput) {
  EXPECT_THROW(rescale_to_unit(CoefficientField<1>::flat(16), 64), PreconditionError);
}

TEST(Presets, ConfigRoundTrip) {
  std::istringstream is(
      "# custom metric\nname = custom\ndim = 1\nc0 = 0.05\nmu = 32\ng11 = 0 1.0 | 1 0.02\nrho = 0 1 | 1 0 -0.01\n");
  const auto cfg = parse_preset_config(is);
  const auto field = make_preset<1>(cfg);
  EXPECT_NEAR(field.g(0, 0).series(Vec<1>(0.3)), 1.0 + 0.02 * std::cos(0.3), 1e-14);
  EXPECT_NEAR(field.rho().series(Vec<1>(0.3)), 1.0 + 0.01 * std::sin(0.3), 1e-14);
}

TEST(Presets, PerturbedSatisfiesHypotheses) {
  for (double mu : {16.0, 32.0, 64.0}) {
    const auto p1 = perturbed_field<1>(mu, 256);
    EXPECT_NO_THROW(p1.validate());
    EXPECT_LT(p1.max_wavenumber(), std::sqrt(mu));
    const auto p2 = perturbed_field<2>(mu, 32);
    EXPECT_NO_THROW(p2.validate());
    EXPECT_LT(p2.max_wavenumber(), std::sqrt(mu));
    EXPECT_NEAR(p2.rho().series(Vec<2>::Zero()), 1.0, 1e-15);
  }
}

TEST(Presets, RejectsUnknownNames) {
  std::istringstream bad_key("colour = red\n");
  EXPECT_THROW(parse_preset_config(bad_key), PreconditionError);
  PresetConfig cfg;
  cfg.name = "zoll";
  EXPECT_THROW(make_preset<1>(cfg), PreconditionError);
}

}  // namespace
