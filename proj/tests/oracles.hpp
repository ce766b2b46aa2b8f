// Closed-form reference solutions and finite-difference helpers shared by
// the unit and acceptance suites. Nothing here calls into the solver code
// it is used to check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tsr/dense_network.hpp"

namespace oracle {

inline double greenshields_flux(double v_f, double rho) { return v_f * rho * (1.0 - rho); }

// Entropy solution of the Riemann problem for f = v_f rho (1 - rho) with the
// jump at x_c and t > 0.
inline double riemann(double v_f, double rho_l, double rho_r, double x_c, double t, double x) {
  const double xi = (x - x_c) / t;
  if (rho_l <= rho_r) {
    const double s = v_f * (1.0 - rho_l - rho_r);
    return xi < s ? rho_l : rho_r;
  }
  const double lo = v_f * (1.0 - 2.0 * rho_l);
  const double hi = v_f * (1.0 - 2.0 * rho_r);
  if (xi <= lo) return rho_l;
  if (xi >= hi) return rho_r;
  return 0.5 * (1.0 - xi / v_f);
}

// Cell average of the Riemann solution on [a, b] by composite Simpson.
inline double riemann_cell_average(double v_f, double rho_l, double rho_r, double x_c, double t,
                                   double a, double b, int panels = 64) {
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double x0 = a + k * h;
    sum += (riemann(v_f, rho_l, rho_r, x_c, t, x0) +
            4.0 * riemann(v_f, rho_l, rho_r, x_c, t, x0 + 0.5 * h) +
            riemann(v_f, rho_l, rho_r, x_c, t, x0 + h)) * h / 6.0;
  }
  return sum / (b - a);
}

// Travelling viscous front of rho_t + f'(rho) rho_x = nu rho_xx joining
// rho_l (upstream) to rho_r > rho_l. Through u = v_f (1 - 2 rho) this is
// the Burgers profile u = s - A tanh(A (x - s t - x0) / (2 nu)).
struct ViscousFront {
  double v_f;
  double rho_l;
  double rho_r;
  double nu;
  double x0 = 0.0;

  double u_l() const { return v_f * (1.0 - 2.0 * rho_l); }
  double u_r() const { return v_f * (1.0 - 2.0 * rho_r); }
  double speed() const { return 0.5 * (u_l() + u_r()); }
  double amplitude() const { return 0.5 * (u_l() - u_r()); }

  tsr::ThetaDerivs operator()(double t, double x) const {
    const double s = speed();
    const double a = amplitude();
    const double k = a / (2.0 * nu);
    const double th = std::tanh(k * (x - s * t - x0));
    const double sech2 = 1.0 - th * th;
    const double u = s - a * th;
    const double u_x = -a * k * sech2;
    const double u_xx = 2.0 * a * k * k * th * sech2;
    const double u_t = -s * u_x;
    const double c = -1.0 / (2.0 * v_f);
    return {0.5 * (1.0 - u / v_f), c * u_t, c * u_x, c * u_xx};
  }
};

// Fourth-order central-difference gradient of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& p, double h) {
  Eigen::VectorXd g(p.size());
  Eigen::VectorXd q = p;
  auto at = [&](Eigen::Index i, double v) {
    q(i) = v;
    const double r = f(q);
    q(i) = p(i);
    return r;
  };
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(p(i)));
    const double f2 = at(i, p(i) + 2.0 * step);
    const double f1 = at(i, p(i) + step);
    const double m1 = at(i, p(i) - step);
    const double m2 = at(i, p(i) - 2.0 * step);
    g(i) = (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * step);
  }
  return g;
}

// Worst relative mismatch over components whose magnitude exceeds `floor`,
// measured against max(|a|, |b|).
inline double worst_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                   double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

// Floor for gradient comparisons: components a millionth of the largest one
// are below what central differences resolve in double precision.
inline double gradient_floor(const Eigen::VectorXd& g) { return 1e-6 * g.lpNorm<Eigen::Infinity>(); }

}  // namespace oracle
