#pragma once

#include <span>
#include <vector>

#include "tsr/flux_model.hpp"
#include "tsr/godunov.hpp"

namespace tsr {

/// Probe positions and speeds sampled at the solver time steps.
/// Storage is row-major: one row of N agents per stored instant.
struct AgentTrajectories {
  int n_agents = 0;
  std::vector<double> times;
  std::vector<double> positions;
  std::vector<double> speeds;
  /// Set when an agent left the road; the series then stop at the last
  /// instant where every agent was still inside.
  bool truncated = false;

  int n_times() const { return static_cast<int>(times.size()); }
  double position(int step, int agent) const {
    return positions[static_cast<std::size_t>(step) * n_agents + agent];
  }
  double speed(int step, int agent) const {
    return speeds[static_cast<std::size_t>(step) * n_agents + agent];
  }
  /// Linear interpolation in time; exact for the explicit Euler integrator.
  double position_at(int agent, double t) const;
};

struct AdvanceResult {
  std::vector<double> positions;
  std::vector<double> speeds;  ///< speeds used for the step
  bool exited = false;
};

/// One explicit Euler step y += dt * V(rho(t, y+)). Keeps agents strictly
/// ordered by nudging a trailing agent back by 1e-9 dx on ties.
AdvanceResult advance_agents(const DensityField& field, const FluxLaw& law, double t,
                             std::span<const double> positions, double dt);

/// Integrates every agent from y0 over the whole field horizon.
AgentTrajectories integrate_trajectories(const DensityField& field, std::span<const double> y0);

/// Number of vehicles between a and b at time t: integral of the field row.
double vehicle_count(const DensityField& field, double t, double a, double b);

}  // namespace tsr
