#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsr/agents.hpp"
#include "tsr/godunov.hpp"
#include "tsr/pinn.hpp"
#include "tsr/sensing.hpp"
#include "tsr/trainer.hpp"

namespace tsr {

/// Relative L2 error sqrt(sum (rho_hat - rho)^2 / sum rho^2) over the grid
/// points (t_n, x_i) lying inside the true agent envelope [y_1(t), y_N(t)]
/// with t_n >= t_from. Throws DomainError when no grid point qualifies.
double generalization_error(const DensityEvaluator& density, const DensityField& field,
                            const AgentTrajectories& traj, double t_from = 0.0);
double generalization_error(const PinnModel& model, const DensityField& field,
                            const AgentTrajectories& traj, double t_from = 0.0);

struct EvaluationReport {
  /// Inside the envelope for t >= eval_t_from (the headline number).
  double error = 0.0;
  double error_inside = 0.0;   ///< inside the envelope, all t
  double error_outside = 0.0;  ///< outside the envelope, all t
  double error_early = 0.0;    ///< inside, t < T/5
  double error_late = 0.0;     ///< inside, t >= T/5
  double trajectory_rmse = 0.0;
  double seconds = 0.0;
};

/// `t_from_fraction` is the fraction of T excluded from the headline error.
EvaluationReport evaluate(const PinnModel& model, const DensityField& field,
                          const AgentTrajectories& traj, double t_from_fraction = 0.2);

/// Writes <prefix>_error.csv (|Theta - rho| on the field grid, same layout as
/// the field CSV), <prefix>_true_traj.csv and <prefix>_reconstructed_traj.csv.
/// Returns the written paths.
std::vector<std::filesystem::path> export_error_heatmap(const PinnModel& model,
                                                         const DensityField& field,
                                                         const AgentTrajectories& traj,
                                                         const std::filesystem::path& prefix);

/// A space-time grid read back from CSV: times along columns, x along rows.
struct GridCsv {
  std::vector<double> times;
  std::vector<double> x;
  std::vector<double> values;  ///< row-major [time][cell]
  double at(std::size_t step, std::size_t cell) const { return values[step * x.size() + cell]; }
};

GridCsv read_grid_csv(const std::filesystem::path& path);

struct SampleStats {
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
};

SampleStats summarize(std::vector<double> values);

}  // namespace tsr
