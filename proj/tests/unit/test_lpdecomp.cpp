#include <gtest/gtest.h>

#include <random>

#include "wps/lpdecomp.hpp"

namespace {

using namespace wps;

GridFunction<1> random_band(int n, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<cd> c(n);
  for (int i = 0; i < n; ++i) {
    const double k = std::abs(wavenumber(i, n));
    if (k >= lo && k <= hi) c[i] = cd(nd(rng), nd(rng));
  }
  return GridFunction<1>::from_spectrum(n, std::move(c));
}

TEST(LittlewoodPaley, MultipliersSumToOne) {
  for (int n : {64, 1024}) {
    const int bands = dyadic_band_count<1>(n);
    for (int k = -n / 2; k < n / 2; ++k) {
      double s = 0;
      for (int j = 0; j < bands; ++j) s += dyadic_multiplier(j, std::abs(k));
      EXPECT_NEAR(s, 1.0, 1e-12) << k;
    }
  }
  const int bands2 = dyadic_band_count<2>(32);
  for (int a = -16; a < 16; ++a)
    for (int b = -16; b < 16; ++b) {
      double s = 0;
      for (int j = 0; j < bands2; ++j) s += dyadic_multiplier(j, std::hypot(a, b));
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(LittlewoodPaley, PlaneWaveLandsInOneBand) {
  const auto f = GridFunction<1>::from_function(64, [](const Vec<1>& x) { return std::polar(1.0, 8 * x[0]); });
  const auto parts = lp_partition(f);
  int nonzero = 0;
  GridFunction<1> sum(64);
  for (const auto& p : parts) {
    if (p.l2_norm() > 1e-12) ++nonzero;
    sum += p;
  }
  EXPECT_GE(nonzero, 1);
  EXPECT_LE(nonzero, 2);
  EXPECT_LT((sum - f).l2_norm(), 1e-12 * f.l2_norm());
}

TEST(LittlewoodPaley, BandsConfinedToAnnuli) {
  std::mt19937_64 rng(1);
  const auto f = random_band(256, 0, 128, rng);
  const auto parts = lp_partition(f);
  for (std::size_t j = 1; j < parts.size(); ++j) {
    const auto c = parts[j].spectrum();
    for (int i = 0; i < 256; ++i) {
      const double k = std::abs(wavenumber(i, 256));
      if (k < std::ldexp(1.0, static_cast<int>(j) - 1) || k > std::ldexp(1.0, static_cast<int>(j) + 1)) {
        EXPECT_LT(std::abs(c[i]), 1e-14);
      }
    }
  }
}

TEST(LittlewoodPaley, SquareFunctionEquivalence) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_band(512, 0, 256, rng);
    double s = 0;
    GridFunction<1> sum(512);
    for (const auto& p : lp_partition(f)) {
      s += std::pow(p.l2_norm(), 2);
      sum += p;
    }
    // Brute-force frequency sum of sum_j beta_j^2 |fhat|^2.
    const auto c = f.spectrum();
    double brute = 0;
    for (int i = 0; i < 512; ++i) {
      double b2 = 0;
      for (int j = 0; j < dyadic_band_count<1>(512); ++j) b2 += std::pow(dyadic_multiplier(j, std::abs(wavenumber(i, 512))), 2);
      brute += b2 * std::norm(c[i]) * kTwoPi;
    }
    const double ratio = s / std::pow(f.l2_norm(), 2);
    EXPECT_NEAR(s, brute, 1e-10 * brute);
    EXPECT_GE(ratio, 1.0 / 3.0);
    EXPECT_LE(ratio, 3.0);
    EXPECT_LT((sum - f).l2_norm(), 1e-12 * f.l2_norm());
  }
}

TEST(BandProject, IdentityOnBand) {
  std::mt19937_64 rng(3);
  for (double mu : {16.0, 32.0, 64.0}) {
    const auto f = random_band(1024, mu / 4, 4 * mu, rng);
    EXPECT_LT((band_project(f, mu) - f).l2_norm(), 1e-12 * f.l2_norm());
  }
}

TEST(BandProject, KillsLowFrequencies) {
  const auto f = GridFunction<1>::from_function(256, [](const Vec<1>& x) { return std::polar(1.0, x[0]); });
  EXPECT_LT(band_project(f, 64).sup_norm(), 1e-15);
}

TEST(BandProject, Contraction) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_band(1024, 0, 512, rng);
    EXPECT_LE(band_project(f, 32).l2_norm(), f.l2_norm() * (1 + 1e-14));
  }
}

TEST(BandProject, SupportAndPlateau) {
  const double mu = 32;
  for (double r = 0; r < 400; r += 0.25) {
    const double v = band_multiplier(mu, r);
    if (r >= mu / 4 && r <= 4 * mu) { EXPECT_EQ(v, 1.0) << r; }
    if (r <= mu / 8 || r >= 8 * mu) { EXPECT_EQ(v, 0.0) << r; }
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(CellPartition, SumsToOneOnWindow) {
  for (double t : {1e-3, 1.0 / 64, 0.3}) {
    const double lo = -40, hi = 55;
    const auto cells = cell_partition<1>(t, lo, hi);
    for (double z = lo; z <= hi; z += 0.137) {
      double s = 0;
      for (const auto& c : cells) s += c(Vec<1>(z));
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
  const auto cells2 = cell_partition<2>(0.05, -10, 10);
  for (double a = -10; a <= 10; a += 1.3)
    for (double b = -10; b <= 10; b += 0.7) {
      double s = 0;
      for (const auto& c : cells2) s += c(Vec<2>(a, b));
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
}

TEST(CellPartition, CountMatchesEnumeration) {
  for (double t : {1e-4, 1e-3, 0.02, 0.5}) {
    const double lo = 8, hi = 128;
    const auto cells = cell_partition<1>(t, lo, hi);
    // A cell is needed iff its support (m-1, m+1)/sqrt(t) meets [lo, hi].
    int brute = 0;
    for (int m = -10000; m <= 10000; ++m) {
      const double a = (m - 1) / std::sqrt(t), b = (m + 1) / std::sqrt(t);
      if (a < hi && b > lo) ++brute;
    }
    EXPECT_EQ(static_cast<int>(cells.size()), brute);
    EXPECT_NEAR(static_cast<double>(cells.size()), (hi - lo) * std::sqrt(t), 2.5);
    EXPECT_EQ(cell_partition<2>(t, lo, hi).size(), cells.size() * cells.size());
  }
}

TEST(CellPartition, HalvingTimeWidensSpacing) {
  const double t = 0.01;
  auto spacing = [](double tt) {
    auto c = cell_partition<1>(tt, 0, 50);
    return c[1].center()[0] - c[0].center()[0];
  };
  EXPECT_NEAR(spacing(t / 2) / spacing(t), std::sqrt(2.0), 1e-14);
}

TEST(CellPartition, ScaledDerivativesBounded) {
  // (t^{-1/2} d_zeta)^k phi_m = phi^{(k)}(s): bounded divided differences.
  const double h = 1e-3;
  double d1 = 0, d2 = 0;
  for (double s = -1.2; s <= 1.2; s += h) {
    d1 = std::max(d1, std::abs(cell_profile(s + h) - cell_profile(s)) / h);
    d2 = std::max(d2, std::abs(cell_profile(s + h) - 2 * cell_profile(s) + cell_profile(s - h)) / (h * h));
  }
  EXPECT_LT(d1, 10.0);
  EXPECT_LT(d2, 100.0);
  const auto table = band_pass<1>(32).tabulate(300, 3001);
  for (std::size_t i = 2; i < table.size(); ++i)
    EXPECT_LT(std::abs(table[i] - 2 * table[i - 1] + table[i - 2]), 1e-2);
}

TEST(CellPartition, RejectsNonPositiveTime) { EXPECT_THROW(cell_partition<1>(0.0, 0, 1), PreconditionError); }

}  // namespace
