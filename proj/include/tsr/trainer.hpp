#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsr/errors.hpp"
#include "tsr/optimizer.hpp"
#include "tsr/pinn.hpp"

namespace tsr {

/// One training stage: loss weights, frozen blocks and optimizer budgets.
/// Adam runs first when adam_iters > 0, then L-BFGS when lbfgs_iters > 0.
struct StageConfig {
  std::string name;
  LossWeights weights;
  std::vector<ParamBlock> frozen;
  int adam_iters = 0;
  double adam_lr = 1e-3;
  int lbfgs_iters = 0;
  double grad_tol = 1e-5;
  double rel_tol = 1e-12;
  int lbfgs_history = 50;
};

struct StageSchedule {
  std::vector<StageConfig> stages;

  void validate() const;
  /// Trajectories first, then density with Phi frozen, then everything.
  static StageSchedule staged();
  /// Single L-BFGS stage with the final-stage weights.
  static StageSchedule naive();
};

struct TrainConfig {
  /// When unset the density network size follows ThetaArchitecture::from_domain.
  bool auto_architecture = true;
  ThetaArchitecture architecture;
  std::uint64_t seed = 0;
  double gamma0 = 0.1;
  LossKind loss = LossKind::kCoupled;
  StageSchedule schedule = StageSchedule::staged();
};

struct StageReport {
  std::string name;
  std::vector<double> adam_trace;
  std::vector<double> lbfgs_trace;
  std::string termination;
  /// L-BFGS runs restricted to the smooth subspace after a failed line search.
  int subspace_restarts = 0;
  int evaluations = 0;
  double seconds = 0.0;
  LossBreakdown final_terms;
};

struct TrainReport {
  std::uint64_t seed = 0;
  std::vector<StageReport> stages;
  double seconds = 0.0;
  double final_loss = 0.0;
  double gamma_squared = 0.0;
  std::vector<double> bias;
};

struct TrainResult {
  PinnModel model;
  TrainReport report;
};

/// A stage hit a non-finite loss. Carries the stage name and the last finite
/// parameter vector.
class TrainingError : public NumericError {
 public:
  TrainingError(std::string stage, Eigen::VectorXd checkpoint, const std::string& what)
      : NumericError(stage, what), checkpoint_(std::move(checkpoint)) {}
  const std::string& stage() const { return term(); }
  const Eigen::VectorXd& checkpoint() const { return checkpoint_; }

 private:
  Eigen::VectorXd checkpoint_;
};

/// Objective restricted to the non-frozen blocks; `full` supplies the frozen values.
struct MaskedObjective {
  Objective objective;
  std::vector<Eigen::Index> free;

  Eigen::VectorXd gather(const Eigen::VectorXd& full) const;
  void scatter(const Eigen::VectorXd& reduced, Eigen::VectorXd& full) const;
};

MaskedObjective mask_objective(const PinnModel& model, const MeasurementSet& ms,
                               const LossWeights& w, LossKind kind,
                               const std::vector<ParamBlock>& frozen);

/// Builds the model (architecture, seeded init) and runs every stage.
TrainResult train(const MeasurementSet& ms, const TrainConfig& cfg);
/// Continues from an existing model.
TrainResult train(const MeasurementSet& ms, PinnModel model, const TrainConfig& cfg);

TrainResult staged_train(const MeasurementSet& ms, TrainConfig cfg);
TrainResult naive_train(const MeasurementSet& ms, TrainConfig cfg);

}  // namespace tsr
