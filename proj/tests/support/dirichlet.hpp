#pragma once

// Chebyshev collocation on [0, pi] for the Dirichlet problem of a half metric;
// the odd extension of the lowest eigenfunction is tested against the doubled
// operator on the torus.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "wps/coeffield.hpp"

namespace wps::testing {

struct DoublingResidual {
  double eigenvalue = 0;
  double residual = 0;  // ||P_doubled phi + lambda phi|| / (lambda ||phi||)
};

inline DoublingResidual doubled_dirichlet_residual(int m = 64, int n = 128) {
  auto g = [](double x) { return 1.0 + 0.1 * std::cos(x) + 0.05 * std::cos(2 * x); };
  auto rho = [](double x) { return 1.0 + 0.05 * std::cos(x); };
  const double pi = std::numbers::pi;
  Eigen::VectorXd s(m + 1), x(m + 1);
  for (int j = 0; j <= m; ++j) {
    s[j] = std::cos(pi * j / m);
    x[j] = 0.5 * pi * (1.0 - s[j]);
  }
  Eigen::MatrixXd D(m + 1, m + 1);
  auto c = [&](int j) { return (j == 0 || j == m ? 2.0 : 1.0) * (j % 2 ? -1.0 : 1.0); };
  for (int i = 0; i <= m; ++i) {
    double row = 0;
    for (int j = 0; j <= m; ++j) {
      if (i == j) continue;
      D(i, j) = c(i) / c(j) / (s[i] - s[j]);
      row += D(i, j);
    }
    D(i, i) = -row;
  }
  D *= -2.0 / pi;  // ds/dx
  Eigen::VectorXd rg(m + 1), r(m + 1);
  for (int j = 0; j <= m; ++j) {
    rg[j] = rho(x[j]) * g(x[j]);
    r[j] = rho(x[j]);
  }
  Eigen::MatrixXd L = r.cwiseInverse().asDiagonal() * D * rg.asDiagonal() * D;
  Eigen::MatrixXd Li = L.block(1, 1, m - 1, m - 1);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Li);
  int best = 0;
  for (int k = 1; k < m - 1; ++k)
    if (std::abs(es.eigenvalues()[k].real()) < std::abs(es.eigenvalues()[best].real())) best = k;
  const double lambda = -es.eigenvalues()[best].real();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m + 1);
  u.segment(1, m - 1) = es.eigenvectors().col(best).real();

  auto interp = [&](double xx) {  // barycentric Chebyshev interpolation
    const double ss = 1.0 - 2.0 * xx / pi;
    double num = 0, den = 0;
    for (int j = 0; j <= m; ++j) {
      const double d = ss - s[j];
      if (std::abs(d) < 1e-15) return u[j];
      const double w = (j % 2 ? -1.0 : 1.0) * (j == 0 || j == m ? 0.5 : 1.0) / d;
      num += w * u[j];
      den += w;
    }
    return num / den;
  };

  GridFunction<1> probe(n);
  std::vector<double> gs(n), rs(n);
  for (int i = 0; i < n; ++i) {
    const double xx = probe.point(i)[0];
    gs[i] = xx <= pi ? g(xx) : 3.0;  // the far half is overwritten by the doubling
    rs[i] = xx <= pi ? rho(xx) : 2.0;
  }
  const auto doubled = double_metric(CoefficientField<1>::from_samples(n, {gs}, rs));
  GridFunction<1> phi(n);
  for (int i = 0; i < n; ++i) {
    const double xx = probe.point(i)[0];
    phi[i] = xx <= pi ? interp(xx) : -interp(kTwoPi - xx);
  }
  auto res = assemble_operator(doubled, phi);
  res += lambda * phi;
  return {lambda, res.l2_norm() / (lambda * phi.l2_norm())};
}

}  // namespace wps::testing
