#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsr/flux_model.hpp"

namespace tsr {

/// Space-time window [0, t_max] x [x_min, x_max] discretized into n_cells.
struct Domain {
  double t_max = 1.0;
  double x_min = 0.0;
  double x_max = 1.0;
  int n_cells = 100;

  double length() const { return x_max - x_min; }
  double dx() const { return length() / n_cells; }
  /// Throws ConfigError unless t_max > 0, x_max > x_min and n_cells >= 2.
  void validate() const;
};

/// Safety factor applied to the CFL bound dx / max|F|.
inline constexpr double kCflFactor = 0.9;

struct TimeGrid {
  int n_steps = 0;
  double dt = 0.0;
};

/// Smallest integer step count whose uniform step satisfies the CFL bound.
TimeGrid make_time_grid(const Domain& domain, const FluxLaw& law);

/// Piecewise-constant initial and boundary data. Levels left empty are drawn
/// from a seeded RNG: `ic_segments` equal-width initial segments and
/// `boundary_pieces` equal-duration pieces per boundary, all uniform in
/// [level_min, level_max].
struct ScenarioSpec {
  std::uint64_t seed = 42;
  double v_f = 1.0;
  int ic_segments = 6;
  int boundary_pieces = 4;
  double level_min = 0.1;
  double level_max = 0.9;
  std::vector<double> ic_levels;
  std::vector<double> inflow_levels;
  std::vector<double> outflow_levels;

  void validate() const;
  /// Copy of this spec with every level list filled in.
  ScenarioSpec resolved() const;
  /// Smallest and largest level appearing in the resolved data.
  std::pair<double, double> level_bounds() const;
};

/// Cell-averaged densities on the (time step, cell) grid, plus the boundary
/// fluxes used at each step.
class DensityField {
 public:
  DensityField() = default;
  DensityField(Domain domain, TimeGrid grid, double v_f);

  const Domain& domain() const { return domain_; }
  int n_steps() const { return grid_.n_steps; }
  int n_cells() const { return domain_.n_cells; }
  double dt() const { return grid_.dt; }
  double dx() const { return domain_.dx(); }
  double v_f() const { return v_f_; }

  double time(int step) const { return step * grid_.dt; }
  double cell_center(int cell) const { return domain_.x_min + (cell + 0.5) * dx(); }

  double at(int step, int cell) const {
    return values_[static_cast<std::size_t>(step) * domain_.n_cells + cell];
  }
  std::span<const double> row(int step) const;
  std::span<double> row(int step);
  /// Total mass sum(rho) * dx of a row.
  double mass(int step) const;

  std::vector<double>& inflow() { return inflow_; }
  std::vector<double>& outflow() { return outflow_; }
  const std::vector<double>& inflow() const { return inflow_; }
  const std::vector<double>& outflow() const { return outflow_; }
  const std::vector<double>& values() const { return values_; }

  /// Index of the stored row at or just below t. Throws DomainError outside [0, T].
  int row_below(double t) const;
  /// Index of the cell containing x, right cell on interfaces.
  int cell_of(double x) const;

 private:
  Domain domain_{};
  TimeGrid grid_{};
  double v_f_ = 1.0;
  std::vector<double> values_;
  std::vector<double> inflow_;
  std::vector<double> outflow_;
};

/// Demand/supply Godunov flux across an interface.
double godunov_numerical_flux(const FluxLaw& law, double rho_left, double rho_right);

struct StepResult {
  std::vector<double> row;
  double inflow = 0.0;
  double outflow = 0.0;
};

/// One conservative update with ghost cells boundary_in / boundary_out.
/// Throws ConfigError if dt violates the CFL bound.
StepResult godunov_step(const FluxLaw& law, std::span<const double> row, double dt, double dx,
                        double boundary_in, double boundary_out);

DensityField simulate(const ScenarioSpec& spec, const Domain& domain);

/// rho(t, x+) read from the piecewise-constant field; no time interpolation.
double sample_density(const DensityField& field, double t, double x);

}  // namespace tsr
