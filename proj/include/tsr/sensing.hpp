#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tsr/agents.hpp"
#include "tsr/godunov.hpp"

namespace tsr {

/// Measurement noise. Density noise is i.i.d. N(mu_rho, sigma_rho^2). Position
/// noise is a per-agent random walk whose increments over a gap dt have
/// variance sigma_y * dt (sigma_y is a variance per unit time).
struct NoiseConfig {
  double sigma_rho = 0.0;
  double mu_rho = 0.0;
  double sigma_y = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Noisy Lagrangian samples plus the unlabeled collocation sets. Per-instant
/// arrays are row-major with one row of n_agents values per time t_k.
struct MeasurementSet {
  Domain domain;
  double v_f = 1.0;
  int n_agents = 0;
  std::vector<double> times;
  std::vector<double> positions;
  std::vector<double> densities;
  std::vector<double> colloc_t;
  std::vector<double> colloc_x;
  std::vector<double> ode_times;

  int n_data() const { return static_cast<int>(times.size()); }
  int n_colloc() const { return static_cast<int>(colloc_t.size()); }
  int n_ode() const { return static_cast<int>(ode_times.size()); }
  double position(int k, int agent) const {
    return positions[static_cast<std::size_t>(k) * n_agents + agent];
  }
  double density(int k, int agent) const {
    return densities[static_cast<std::size_t>(k) * n_agents + agent];
  }
  /// Lower/upper edge of the measured envelope at time t: min/max of the
  /// noisy positions at the bracketing instants, linearly interpolated.
  std::pair<double, double> envelope_at(double t) const;
};

/// Samples every agent at n_data instants uniformly spaced on [0, T].
/// Values are not clamped to [0,1]. Throws ConfigError for n_data < 2.
MeasurementSet measure(const DensityField& field, const AgentTrajectories& traj, int n_data,
                       const NoiseConfig& noise);

/// Fills ms.colloc_* by rejection sampling the measured envelope and
/// ms.ode_times uniformly on [0, T]. Throws GeometryError if fewer than 1% of
/// the candidate points land inside the envelope. Returns the acceptance rate.
double sample_collocation(MeasurementSet& ms, int n_f, int n_g, std::uint64_t seed,
                        double margin = 0.0);

/// Affine maps of t and x onto [-1, 1].
class Standardizer {
 public:
  Standardizer() = default;
  explicit Standardizer(const Domain& domain);

  double t_to_std(double t) const { return t * t_scale_ - 1.0; }
  double x_to_std(double x) const { return (x - x_min_) * x_scale_ - 1.0; }
  double t_from_std(double s) const { return (s + 1.0) / t_scale_; }
  double x_from_std(double s) const { return x_min_ + (s + 1.0) / x_scale_; }
  /// d(std)/d(physical) factors, 2/T and 2/L.
  double t_scale() const { return t_scale_; }
  double x_scale() const { return x_scale_; }
  double t_max() const { return 2.0 / t_scale_; }
  double x_min() const { return x_min_; }
  double length() const { return 2.0 / x_scale_; }

 private:
  double t_scale_ = 2.0;
  double x_scale_ = 2.0;
  double x_min_ = 0.0;
};

/// Maps times and positions of a measurement set to [-1, 1].
std::pair<MeasurementSet, Standardizer> standardize(const MeasurementSet& ms,
                                                    const Domain& domain);

}  // namespace tsr
