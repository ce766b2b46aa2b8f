#include "tsr/trainer.hpp"

#include <algorithm>
#include <chrono>

#include "tsr/errors.hpp"

namespace tsr {

void StageSchedule::validate() const {
  if (stages.empty()) throw ConfigError("schedule needs at least one stage");
  for (const auto& s : stages) {
    s.weights.validate();
    if (s.adam_iters < 0 || s.lbfgs_iters < 0) throw ConfigError("negative iteration budget");
    if (s.adam_iters == 0 && s.lbfgs_iters == 0) {
      throw ConfigError("stage '" + s.name + "' has no optimizer budget");
    }
  }
}

StageSchedule StageSchedule::staged() {
  StageSchedule s;
  StageConfig trajectories;
  trajectories.name = "trajectories";
  trajectories.weights = {.data = 0.0, .physics = 0.0, .trajectory = 1.0, .dynamics = 0.5,
                          .viscosity = 0.0};
  trajectories.frozen = {ParamBlock::kGamma, ParamBlock::kBias};
  trajectories.lbfgs_iters = 500;
  trajectories.grad_tol = 1e-5;
  s.stages.push_back(trajectories);

  StageConfig density;
  density.name = "density";
  density.weights = {.data = 1.0, .physics = 0.1, .trajectory = 0.0, .dynamics = 0.25,
                     .viscosity = 0.0};
  density.frozen = {ParamBlock::kPhi, ParamBlock::kBias};
  density.adam_iters = 1000;
  density.lbfgs_iters = 2000;
  s.stages.push_back(density);

  StageConfig coupled;
  coupled.name = "coupled";
  coupled.weights = {.data = 1.0, .physics = 1.0, .trajectory = 1.0, .dynamics = 0.5,
                     .viscosity = 0.1};
  coupled.lbfgs_iters = 3000;
  s.stages.push_back(coupled);
  return s;
}

StageSchedule StageSchedule::naive() {
  StageSchedule s;
  StageConfig single = staged().stages.back();
  single.name = "naive";
  s.stages.push_back(single);
  return s;
}

Eigen::VectorXd MaskedObjective::gather(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(free.size()));
  for (std::size_t i = 0; i < free.size(); ++i) r(static_cast<Eigen::Index>(i)) = full(free[i]);
  return r;
}

void MaskedObjective::scatter(const Eigen::VectorXd& reduced, Eigen::VectorXd& full) const {
  for (std::size_t i = 0; i < free.size(); ++i) full(free[i]) = reduced(static_cast<Eigen::Index>(i));
}

MaskedObjective mask_objective(const PinnModel& model, const MeasurementSet& ms,
                               const LossWeights& w, LossKind kind,
                               const std::vector<ParamBlock>& frozen) {
  MaskedObjective out;
  std::vector<bool> is_free(model.parameter_count(), true);
  for (ParamBlock b : frozen) {
    const BlockRange r = model.block(b);
    std::fill_n(is_free.begin() + static_cast<std::ptrdiff_t>(r.offset), r.size, false);
  }
  for (std::size_t i = 0; i < is_free.size(); ++i) {
    if (is_free[i]) out.free.push_back(static_cast<Eigen::Index>(i));
  }
  Objective full = make_objective(model, ms, w, kind);
  auto base = std::make_shared<Eigen::VectorXd>(model.parameters());
  auto full_grad = std::make_shared<Eigen::VectorXd>(base->size());
  const auto free = out.free;
  out.objective = [full, base, full_grad, free](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    for (std::size_t i = 0; i < free.size(); ++i) (*base)(free[i]) = p(static_cast<Eigen::Index>(i));
    const double v = full(*base, *full_grad);
    g.resize(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) g(static_cast<Eigen::Index>(i)) = (*full_grad)(free[i]);
    return v;
  };
  return out;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct LbfgsPhase {
  Eigen::VectorXd full;
  std::vector<double> trace;
  Termination reason = Termination::kMaxIter;
  std::string message;
  int evaluations = 0;
  int restarts = 0;
};

// Relu kinks of Phi crossing an ODE instant make the dynamics term jump, which
// stalls the line search. Kink locations depend on the relu branch alone, so
// the loss is smooth with that branch held fixed: alternate between the full
// free set and that subspace until neither makes progress.
LbfgsPhase run_lbfgs(const PinnModel& model, const MeasurementSet& ms, const StageConfig& stage,
                     LossKind kind, Eigen::VectorXd full) {
  std::vector<ParamBlock> smooth_frozen = stage.frozen;
  smooth_frozen.push_back(ParamBlock::kPhiRelu);
  const bool relu_frozen =
      std::any_of(stage.frozen.begin(), stage.frozen.end(),
                  [](ParamBlock b) { return b == ParamBlock::kPhi || b == ParamBlock::kPhiRelu; });
  LbfgsPhase out;
  out.full = full;
  int remaining = stage.lbfgs_iters;
  bool smooth = false;
  bool stalled_before = false;
  while (true) {
    PinnModel current = model;
    current.set_parameters(full);
    const MaskedObjective obj =
        mask_objective(current, ms, stage.weights, kind, smooth ? smooth_frozen : stage.frozen);
    LbfgsState lbfgs;
    lbfgs.max_iters = remaining;
    lbfgs.grad_tol = stage.grad_tol;
    lbfgs.rel_tol = stage.rel_tol;
    lbfgs.history = stage.lbfgs_history;
    OptimResult r = lbfgs_minimize(obj.objective, obj.gather(full), lbfgs);
    out.evaluations += r.evaluations;
    out.trace.insert(out.trace.end(), r.trace.begin() + (out.trace.empty() ? 0 : 1), r.trace.end());
    out.reason = r.reason;
    out.message = r.message;
    if (r.reason == Termination::kNonFinite) return out;
    obj.scatter(r.params, full);
    out.full = full;
    remaining -= r.iterations;
    if (r.reason != Termination::kLineSearch && !smooth) return out;
    if (remaining <= 0) return out;
    if (r.iterations == 0 && stalled_before) return out;
    stalled_before = r.iterations == 0;
    if (!smooth) {
      if (relu_frozen) return out;
      ++out.restarts;
    }
    smooth = !smooth;
  }
}

LossBreakdown breakdown(const PinnModel& model, const MeasurementSet& ms, const LossWeights& w,
                        LossKind kind) {
  return kind == LossKind::kCoupled ? loss_coupled(model, ms, w) : loss_noiseless(model, ms, w);
}

}  // namespace

TrainResult train(const MeasurementSet& ms, PinnModel model, const TrainConfig& cfg) {
  cfg.schedule.validate();
  TrainResult result;
  result.report.seed = cfg.seed;
  const auto start = std::chrono::steady_clock::now();

  for (const StageConfig& stage : cfg.schedule.stages) {
    const auto stage_start = std::chrono::steady_clock::now();
    StageReport sr;
    sr.name = stage.name;
    MaskedObjective obj = mask_objective(model, ms, stage.weights, cfg.loss, stage.frozen);
    Eigen::VectorXd full = model.parameters();
    Eigen::VectorXd x = obj.gather(full);
    std::string termination = "none";

    if (stage.adam_iters > 0) {
      AdamState adam;
      adam.lr = stage.adam_lr;
      OptimResult r = adam_minimize(obj.objective, x, stage.adam_iters, adam);
      sr.adam_trace = r.trace;
      sr.evaluations += r.evaluations;
      if (r.reason == Termination::kNonFinite) {
        throw TrainingError(stage.name, full, "stage '" + stage.name + "': " + r.message);
      }
      x = std::move(r.params);
      termination = to_string(r.reason);
    }
    obj.scatter(x, full);
    if (stage.lbfgs_iters > 0) {
      LbfgsPhase r = run_lbfgs(model, ms, stage, cfg.loss, full);
      sr.lbfgs_trace = std::move(r.trace);
      sr.evaluations += r.evaluations;
      sr.subspace_restarts = r.restarts;
      if (r.reason == Termination::kNonFinite) {
        throw TrainingError(stage.name, r.full, "stage '" + stage.name + "': " + r.message);
      }
      full = std::move(r.full);
      termination = to_string(r.reason);
    }
    model.set_parameters(full);
    sr.termination = termination;
    sr.final_terms = breakdown(model, ms, stage.weights, cfg.loss);
    sr.seconds = seconds_since(stage_start);
    result.report.stages.push_back(std::move(sr));
  }

  result.report.seconds = seconds_since(start);
  result.report.final_loss = result.report.stages.back().final_terms.total;
  result.report.gamma_squared = model.gamma * model.gamma;
  result.report.bias.assign(model.bias.data(), model.bias.data() + model.bias.size());
  result.model = std::move(model);
  return result;
}

TrainResult train(const MeasurementSet& ms, const TrainConfig& cfg) {
  const ThetaArchitecture arch =
      cfg.auto_architecture ? ThetaArchitecture::from_domain(ms.domain.t_max, ms.domain.length())
                            : cfg.architecture;
  PinnModel model(ms.domain, ms.v_f, ms.n_agents, arch);
  model.initialize(cfg.seed, cfg.gamma0);
  return train(ms, std::move(model), cfg);
}

TrainResult staged_train(const MeasurementSet& ms, TrainConfig cfg) {
  cfg.schedule = StageSchedule::staged();
  return train(ms, cfg);
}

TrainResult naive_train(const MeasurementSet& ms, TrainConfig cfg) {
  cfg.schedule = StageSchedule::naive();
  return train(ms, cfg);
}

}  // namespace tsr
