#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tsr/agents.hpp"
#include "tsr/dense_network.hpp"
#include "tsr/flux_model.hpp"
#include "tsr/sensing.hpp"

namespace tsr {

/// Loss multipliers: data = lambda_1, physics = lambda_2, trajectory =
/// lambda_3, dynamics = lambda_4, viscosity = lambda_gamma. `bias_penalty`
/// is an optional L2 weight on the bias estimate (off by default).
struct LossWeights {
  double data = 1.0;
  double physics = 1.0;
  double trajectory = 0.0;
  double dynamics = 0.0;
  double viscosity = 0.0;
  double bias_penalty = 0.0;

  void validate() const;
};

/// kPhiRelu is the relu branch of Phi, a sub-range of kPhi.
enum class ParamBlock { kTheta, kPhi, kGamma, kBias, kPhiRelu };

struct BlockRange {
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Density network, trajectory network, viscosity root gamma (the residual
/// uses gamma^2) and the per-agent density bias estimate. The flat parameter
/// vector is laid out as theta | phi | gamma | bias.
class PinnModel {
 public:
  PinnModel() = default;
  PinnModel(const Domain& domain, double v_f, int n_agents, ThetaArchitecture arch);

  /// Seeded network initialization; gamma set to gamma0, bias to zero.
  void initialize(std::uint64_t seed, double gamma0 = 0.1);

  const Domain& domain() const { return domain_; }
  double v_f() const { return v_f_; }
  int n_agents() const { return phi.n_agents(); }
  const Standardizer& standardizer() const { return standardizer_; }
  const FluxLaw& law() const { return *law_; }

  std::size_t parameter_count() const;
  BlockRange block(ParamBlock b) const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);

  ThetaNet theta;
  PhiNet phi;
  double gamma = 0.1;
  Eigen::VectorXd bias;

 private:
  Domain domain_{};
  double v_f_ = 1.0;
  Standardizer standardizer_;
  FluxLawPtr law_;
};

/// Source of density values and physical derivatives. The network-backed
/// implementation records a tape; closed-form ones ignore it.
class DensityEvaluator {
 public:
  virtual ~DensityEvaluator() = default;
  virtual ThetaBatch evaluate(const Eigen::ArrayXd& t, const Eigen::ArrayXd& x, bool derivatives,
                              Tape* tape) const = 0;
  /// Adds parameter gradients (if any) and returns d(loss)/dx per point.
  virtual Eigen::ArrayXd backward(const Tape& tape, const ThetaBatch& points,
                                  const ThetaBatch& adjoint, std::span<double> grad) const = 0;
};

/// Source of agent positions and velocities.
class TrajectoryEvaluator {
 public:
  virtual ~TrajectoryEvaluator() = default;
  virtual PhiBatch evaluate(std::span<const double> t, PhiTape* tape) const = 0;
  virtual void backward(const PhiTape& tape, const Eigen::MatrixXd& position_adjoint,
                        const Eigen::MatrixXd& velocity_adjoint, std::span<double> grad) const = 0;
};

class NetworkDensity final : public DensityEvaluator {
 public:
  NetworkDensity(const ThetaNet& net, const Standardizer& s) : net_(net), s_(s) {}
  ThetaBatch evaluate(const Eigen::ArrayXd& t, const Eigen::ArrayXd& x, bool derivatives,
                      Tape* tape) const override;
  Eigen::ArrayXd backward(const Tape& tape, const ThetaBatch& points, const ThetaBatch& adjoint,
                          std::span<double> grad) const override;

 private:
  const ThetaNet& net_;
  const Standardizer& s_;
};

class NetworkTrajectories final : public TrajectoryEvaluator {
 public:
  NetworkTrajectories(const PhiNet& net, const Standardizer& s) : net_(net), s_(s) {}
  PhiBatch evaluate(std::span<const double> t, PhiTape* tape) const override;
  void backward(const PhiTape& tape, const Eigen::MatrixXd& position_adjoint,
                const Eigen::MatrixXd& velocity_adjoint, std::span<double> grad) const override;

 private:
  const PhiNet& net_;
  const Standardizer& s_;
};

/// Closed-form density with analytic derivatives; has no parameters.
class ExactDensity final : public DensityEvaluator {
 public:
  explicit ExactDensity(std::function<ThetaDerivs(double, double)> fn) : fn_(std::move(fn)) {}
  ThetaBatch evaluate(const Eigen::ArrayXd& t, const Eigen::ArrayXd& x, bool derivatives,
                      Tape* tape) const override;
  Eigen::ArrayXd backward(const Tape& tape, const ThetaBatch& points, const ThetaBatch& adjoint,
                          std::span<double> grad) const override;

 private:
  std::function<ThetaDerivs(double, double)> fn_;
};

/// Simulated trajectories replayed as a frozen trajectory source.
class RecordedTrajectories final : public TrajectoryEvaluator {
 public:
  explicit RecordedTrajectories(const AgentTrajectories& traj) : traj_(traj) {}
  PhiBatch evaluate(std::span<const double> t, PhiTape* tape) const override;
  void backward(const PhiTape&, const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                std::span<double>) const override {}

 private:
  const AgentTrajectories& traj_;
};

/// F_gamma = rho_t + F(rho) rho_x - gamma^2 rho_xx from a derivative jet.
double pde_residual(const ThetaDerivs& d, double gamma, const FluxLaw& law);
double pde_residual(const PinnModel& model, double t, double x);

/// G_i = dPhi_i/dt - V(clamp(Theta(t, Phi_i(t)))) for every agent.
std::vector<double> ode_residual(const PinnModel& model, double t);

/// Unweighted term values and the weighted total.
struct LossBreakdown {
  double data = 0.0;
  double physics = 0.0;
  double viscosity = 0.0;
  double trajectory = 0.0;
  double dynamics = 0.0;
  double bias_penalty = 0.0;
  double total = 0.0;
};

/// Replacements for the model's networks. A replaced block receives no gradient.
struct FieldOverrides {
  const DensityEvaluator* density = nullptr;
  const TrajectoryEvaluator* trajectories = nullptr;
};

/// Measurement term with stored positions, physics term, gamma penalty.
/// Terms whose weight is zero are skipped. Fills `grad` (full parameter
/// layout) when given.
LossBreakdown loss_noiseless(const PinnModel& model, const MeasurementSet& ms,
                             const LossWeights& w, Eigen::VectorXd* grad = nullptr,
                             const FieldOverrides& overrides = {});

/// Noiseless loss evaluated along Phi against rho~ - bias, plus the
/// trajectory and agent-dynamics terms.
LossBreakdown loss_coupled(const PinnModel& model, const MeasurementSet& ms, const LossWeights& w,
                           Eigen::VectorXd* grad = nullptr, const FieldOverrides& overrides = {});

enum class LossKind { kNoiseless, kCoupled };

/// Maps flat parameters to (loss, gradient).
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Objective over the full parameter vector of `model` (copied).
Objective make_objective(const PinnModel& model, const MeasurementSet& ms, const LossWeights& w,
                         LossKind kind);

}  // namespace tsr
