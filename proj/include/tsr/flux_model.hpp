#pragma once

#include <memory>

namespace tsr {

/// Tolerance for densities that drift slightly outside [0,1] in floating point.
inline constexpr double kDensitySlack = 1e-9;

/// Checks rho against [-slack, 1+slack] and clamps it into [0,1].
/// Throws DomainError for anything further out (including NaN).
double checked_density(double rho);

/// A concave flux law f(rho) with its derivative F = f' and the particle
/// speed V(rho) = f(rho)/rho. The checked entry points clamp and validate
/// rho; the `raw_` variants evaluate the closed form on any real input and
/// are meant for network outputs that are not constrained to [0,1].
class FluxLaw {
 public:
  virtual ~FluxLaw() = default;

  virtual double raw_flux(double rho) const = 0;
  virtual double raw_characteristic_speed(double rho) const = 0;
  /// f''(rho), used when differentiating residuals.
  virtual double raw_characteristic_slope(double rho) const = 0;
  virtual double raw_agent_speed(double rho) const = 0;
  /// dV/drho.
  virtual double raw_agent_speed_slope(double rho) const = 0;
  /// Density of maximal flux.
  virtual double critical_density() const = 0;
  virtual double free_flow_speed() const = 0;

  double flux(double rho) const { return raw_flux(checked_density(rho)); }
  double characteristic_speed(double rho) const {
    return raw_characteristic_speed(checked_density(rho));
  }
  double agent_speed(double rho) const {
    return raw_agent_speed(checked_density(rho));
  }
};

/// Greenshields law V = v_f (1 - rho), f = v_f rho (1 - rho).
class Greenshields final : public FluxLaw {
 public:
  explicit Greenshields(double v_f);

  // Written as V(rho) * rho so that agent_speed(rho) * rho == flux(rho) bitwise.
  double raw_flux(double rho) const override { return raw_agent_speed(rho) * rho; }
  double raw_characteristic_speed(double rho) const override {
    return v_f_ * (1.0 - 2.0 * rho);
  }
  double raw_characteristic_slope(double) const override { return -2.0 * v_f_; }
  double raw_agent_speed(double rho) const override { return v_f_ * (1.0 - rho); }
  double raw_agent_speed_slope(double) const override { return -v_f_; }
  double critical_density() const override { return 0.5; }
  double free_flow_speed() const override { return v_f_; }

 private:
  double v_f_;
};

using FluxLawPtr = std::shared_ptr<const FluxLaw>;

inline FluxLawPtr make_greenshields(double v_f) {
  return std::make_shared<const Greenshields>(v_f);
}

}  // namespace tsr
