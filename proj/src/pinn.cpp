#include "tsr/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "tsr/errors.hpp"
#include "tsr/random.hpp"

namespace tsr {

void LossWeights::validate() const {
  for (double v : {data, physics, trajectory, dynamics, viscosity, bias_penalty}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be non-negative");
  }
}

PinnModel::PinnModel(const Domain& domain, double v_f, int n_agents, ThetaArchitecture arch)
    : theta(arch),
      phi(n_agents),
      bias(Eigen::VectorXd::Zero(n_agents)),
      domain_(domain),
      v_f_(v_f),
      standardizer_(domain),
      law_(make_greenshields(v_f)) {}

void PinnModel::initialize(std::uint64_t seed, double gamma0) {
  auto theta_rng = make_rng(seed, Stream::kThetaInit);
  theta.network().initialize(theta_rng);
  auto phi_rng = make_rng(seed, Stream::kPhiInit);
  phi.initialize(phi_rng);
  gamma = gamma0;
  bias.setZero();
}

std::size_t PinnModel::parameter_count() const {
  return theta.parameter_count() + phi.parameter_count() + 1 + static_cast<std::size_t>(bias.size());
}

BlockRange PinnModel::block(ParamBlock b) const {
  const std::size_t nt = theta.parameter_count();
  const std::size_t np = phi.parameter_count();
  switch (b) {
    case ParamBlock::kTheta: return {0, nt};
    case ParamBlock::kPhi: return {nt, np};
    case ParamBlock::kGamma: return {nt + np, 1};
    case ParamBlock::kBias: return {nt + np + 1, static_cast<std::size_t>(bias.size())};
    case ParamBlock::kPhiRelu:
      return {nt + phi.tanh_branch().parameter_count(), phi.relu_branch().parameter_count()};
  }
  return {};
}

Eigen::VectorXd PinnModel::parameters() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
  std::span<double> all(p.data(), static_cast<std::size_t>(p.size()));
  const auto bt = block(ParamBlock::kTheta);
  const auto bp = block(ParamBlock::kPhi);
  theta.network().pack(all.subspan(bt.offset, bt.size));
  phi.pack(all.subspan(bp.offset, bp.size));
  p(static_cast<Eigen::Index>(block(ParamBlock::kGamma).offset)) = gamma;
  p.segment(static_cast<Eigen::Index>(block(ParamBlock::kBias).offset), bias.size()) = bias;
  return p;
}

void PinnModel::set_parameters(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != parameter_count()) {
    throw ConfigError("parameter vector has the wrong length");
  }
  std::span<const double> all(p.data(), static_cast<std::size_t>(p.size()));
  const auto bt = block(ParamBlock::kTheta);
  const auto bp = block(ParamBlock::kPhi);
  theta.network().unpack(all.subspan(bt.offset, bt.size));
  phi.unpack(all.subspan(bp.offset, bp.size));
  gamma = p(static_cast<Eigen::Index>(block(ParamBlock::kGamma).offset));
  bias = p.segment(static_cast<Eigen::Index>(block(ParamBlock::kBias).offset), bias.size());
}

ThetaBatch NetworkDensity::evaluate(const Eigen::ArrayXd& t, const Eigen::ArrayXd& x,
                                    bool derivatives, Tape* tape) const {
  return net_.evaluate(s_, t, x, derivatives, tape);
}

Eigen::ArrayXd NetworkDensity::backward(const Tape& tape, const ThetaBatch&,
                                        const ThetaBatch& adjoint, std::span<double> grad) const {
  return net_.backward(s_, tape, adjoint, grad);
}

PhiBatch NetworkTrajectories::evaluate(std::span<const double> t, PhiTape* tape) const {
  return net_.evaluate(s_, t, tape);
}

void NetworkTrajectories::backward(const PhiTape& tape, const Eigen::MatrixXd& position_adjoint,
                                   const Eigen::MatrixXd& velocity_adjoint,
                                   std::span<double> grad) const {
  net_.backward(s_, tape, position_adjoint, velocity_adjoint, grad);
}

ThetaBatch ExactDensity::evaluate(const Eigen::ArrayXd& t, const Eigen::ArrayXd& x, bool,
                                  Tape*) const {
  ThetaBatch b;
  b.value.resize(t.size());
  b.dt.resize(t.size());
  b.dx.resize(t.size());
  b.dxx.resize(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const ThetaDerivs d = fn_(t(i), x(i));
    b.value(i) = d.value;
    b.dt(i) = d.dt;
    b.dx(i) = d.dx;
    b.dxx(i) = d.dxx;
  }
  return b;
}

Eigen::ArrayXd ExactDensity::backward(const Tape&, const ThetaBatch& points,
                                      const ThetaBatch& adjoint, std::span<double>) const {
  return adjoint.value * points.dx;
}

PhiBatch RecordedTrajectories::evaluate(std::span<const double> t, PhiTape*) const {
  const int n = traj_.n_agents;
  PhiBatch b;
  b.position.resize(n, static_cast<Eigen::Index>(t.size()));
  b.velocity.resize(n, static_cast<Eigen::Index>(t.size()));
  for (std::size_t j = 0; j < t.size(); ++j) {
    const auto& times = traj_.times;
    int seg = static_cast<int>(std::upper_bound(times.begin(), times.end(), t[j]) - times.begin()) - 1;
    seg = std::clamp(seg, 0, traj_.n_times() - 1);
    for (int i = 0; i < n; ++i) {
      b.position(i, static_cast<Eigen::Index>(j)) = traj_.position_at(i, t[j]);
      b.velocity(i, static_cast<Eigen::Index>(j)) = traj_.speed(seg, i);
    }
  }
  return b;
}

double pde_residual(const ThetaDerivs& d, double gamma, const FluxLaw& law) {
  return d.dt + law.raw_characteristic_speed(d.value) * d.dx - gamma * gamma * d.dxx;
}

double pde_residual(const PinnModel& model, double t, double x) {
  return pde_residual(theta_forward_derivs(model.theta, model.standardizer(), t, x), model.gamma,
                      model.law());
}

std::vector<double> ode_residual(const PinnModel& model, double t) {
  const PhiBatch phi = model.phi.evaluate(model.standardizer(), std::span<const double>(&t, 1));
  const int n = model.n_agents();
  Eigen::ArrayXd tt = Eigen::ArrayXd::Constant(n, t);
  Eigen::ArrayXd xx = phi.position.col(0).array();
  const ThetaBatch rho = model.theta.evaluate(model.standardizer(), tt, xx, false);
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double r = std::clamp(rho.value(i), 0.0, 1.0);
    g[static_cast<std::size_t>(i)] = phi.velocity(i, 0) - model.law().raw_agent_speed(r);
  }
  return g;
}

namespace {

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericError(term, std::string("non-finite value in loss term '") + term + "'");
  }
}

std::span<double> segment(Eigen::VectorXd* grad, const BlockRange& r) {
  if (!grad) return {};
  return {grad->data() + r.offset, r.size};
}

LossBreakdown evaluate_loss(const PinnModel& model, const MeasurementSet& ms,
                            const LossWeights& w, Eigen::VectorXd* grad,
                            const FieldOverrides& ov, bool coupled) {
  w.validate();
  if (ms.n_data() < 1 || ms.n_agents < 1) throw ConfigError("empty measurement set");
  if (ms.n_agents != model.n_agents()) {
    throw ConfigError("measurement set and model disagree on the agent count");
  }
  const int n = ms.n_agents;
  const int n_data = ms.n_data();
  const Standardizer& s = model.standardizer();
  const FluxLaw& law = model.law();

  if (grad) grad->setZero(static_cast<Eigen::Index>(model.parameter_count()));
  const NetworkDensity net_density(model.theta, s);
  const NetworkTrajectories net_traj(model.phi, s);
  const DensityEvaluator& density = ov.density ? *ov.density : net_density;
  const TrajectoryEvaluator& trajectories = ov.trajectories ? *ov.trajectories : net_traj;
  const std::span<double> theta_grad =
      ov.density ? std::span<double>{} : segment(grad, model.block(ParamBlock::kTheta));
  const std::span<double> phi_grad =
      ov.trajectories ? std::span<double>{} : segment(grad, model.block(ParamBlock::kPhi));
  const auto gamma_index = static_cast<Eigen::Index>(model.block(ParamBlock::kGamma).offset);
  const auto bias_offset = static_cast<Eigen::Index>(model.block(ParamBlock::kBias).offset);

  LossBreakdown out;

  // Trajectory estimates at the measurement instants followed by the ODE instants.
  const bool need_phi = coupled && (w.data > 0.0 || w.trajectory > 0.0 || w.dynamics > 0.0);
  const int n_ode = coupled && w.dynamics > 0.0 ? ms.n_ode() : 0;
  if (coupled && w.dynamics > 0.0 && n_ode == 0) throw ConfigError("no ODE collocation instants");
  std::vector<double> phi_times;
  PhiBatch phi;
  PhiTape phi_tape;
  Eigen::MatrixXd pos_adj, vel_adj;
  if (need_phi) {
    phi_times = ms.times;
    if (n_ode > 0) phi_times.insert(phi_times.end(), ms.ode_times.begin(), ms.ode_times.end());
    phi = trajectories.evaluate(phi_times, grad ? &phi_tape : nullptr);
    pos_adj = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(phi_times.size()));
    vel_adj = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(phi_times.size()));
  }

  if (w.data > 0.0) {
    const auto m = static_cast<Eigen::Index>(n_data) * n;
    Eigen::ArrayXd tb(m), xb(m), target(m);
    for (int k = 0; k < n_data; ++k) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Index j = static_cast<Eigen::Index>(k) * n + i;
        tb(j) = ms.times[static_cast<std::size_t>(k)];
        xb(j) = coupled ? phi.position(i, k) : ms.position(k, i);
        target(j) = ms.density(k, i) - (coupled ? model.bias(i) : 0.0);
      }
    }
    Tape tape;
    const ThetaBatch rho = density.evaluate(tb, xb, false, grad ? &tape : nullptr);
    const Eigen::ArrayXd r = target - rho.value;
    out.data = r.square().sum() / n_data;
    require_finite(out.data, "data");
    if (grad) {
      ThetaBatch adj;
      adj.value = (-2.0 * w.data / n_data) * r;
      const Eigen::ArrayXd x_adj = density.backward(tape, rho, adj, theta_grad);
      for (int k = 0; k < n_data; ++k) {
        for (int i = 0; i < n; ++i) {
          const Eigen::Index j = static_cast<Eigen::Index>(k) * n + i;
          if (coupled) {
            pos_adj(i, k) += x_adj(j);
            (*grad)(bias_offset + i) += adj.value(j);
          }
        }
      }
    }
  }

  if (coupled && w.trajectory > 0.0) {
    double sum = 0.0;
    const double scale = 2.0 * w.trajectory / (static_cast<double>(n_data) * n);
    for (int k = 0; k < n_data; ++k) {
      for (int i = 0; i < n; ++i) {
        const double e = phi.position(i, k) - ms.position(k, i);
        sum += e * e;
        if (grad) pos_adj(i, k) += scale * e;
      }
    }
    out.trajectory = sum / (static_cast<double>(n_data) * n);
    require_finite(out.trajectory, "trajectory");
  }

  if (n_ode > 0) {
    const auto m = static_cast<Eigen::Index>(n_ode) * n;
    Eigen::ArrayXd tb(m), xb(m);
    for (int l = 0; l < n_ode; ++l) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Index j = static_cast<Eigen::Index>(l) * n + i;
        tb(j) = ms.ode_times[static_cast<std::size_t>(l)];
        xb(j) = phi.position(i, n_data + l);
      }
    }
    Tape tape;
    const ThetaBatch rho = density.evaluate(tb, xb, false, grad ? &tape : nullptr);
    const double norm = static_cast<double>(n_ode) * n;
    double sum = 0.0;
    ThetaBatch adj;
    if (grad) adj.value = Eigen::ArrayXd::Zero(m);
    for (int l = 0; l < n_ode; ++l) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Index j = static_cast<Eigen::Index>(l) * n + i;
        const double raw = rho.value(j);
        const double clamped = std::clamp(raw, 0.0, 1.0);
        const double g = phi.velocity(i, n_data + l) - law.raw_agent_speed(clamped);
        sum += g * g;
        if (grad) {
          const double a = 2.0 * w.dynamics * g / norm;
          vel_adj(i, n_data + l) += a;
          const bool inside = raw > 0.0 && raw < 1.0;
          adj.value(j) = inside ? -a * law.raw_agent_speed_slope(clamped) : 0.0;
        }
      }
    }
    out.dynamics = sum / norm;
    require_finite(out.dynamics, "dynamics");
    if (grad) {
      const Eigen::ArrayXd x_adj = density.backward(tape, rho, adj, theta_grad);
      for (int l = 0; l < n_ode; ++l) {
        for (int i = 0; i < n; ++i) {
          pos_adj(i, n_data + l) += x_adj(static_cast<Eigen::Index>(l) * n + i);
        }
      }
    }
  }

  if (w.physics > 0.0) {
    if (ms.n_colloc() == 0) throw ConfigError("no collocation points for the physics term");
    const auto m = static_cast<Eigen::Index>(ms.n_colloc());
    const Eigen::Map<const Eigen::ArrayXd> tc(ms.colloc_t.data(), m);
    const Eigen::Map<const Eigen::ArrayXd> xc(ms.colloc_x.data(), m);
    Tape tape;
    const ThetaBatch d = density.evaluate(tc, xc, true, grad ? &tape : nullptr);
    const double g2 = model.gamma * model.gamma;
    Eigen::ArrayXd speed(m), slope(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      speed(j) = law.raw_characteristic_speed(d.value(j));
      slope(j) = law.raw_characteristic_slope(d.value(j));
    }
    const Eigen::ArrayXd res = d.dt + speed * d.dx - g2 * d.dxx;
    out.physics = res.square().sum() / static_cast<double>(m);
    require_finite(out.physics, "physics");
    if (grad) {
      const Eigen::ArrayXd a = (2.0 * w.physics / static_cast<double>(m)) * res;
      ThetaBatch adj;
      adj.value = a * slope * d.dx;
      adj.dt = a;
      adj.dx = a * speed;
      adj.dxx = -g2 * a;
      density.backward(tape, d, adj, theta_grad);
      (*grad)(gamma_index) += (a * d.dxx).sum() * (-2.0 * model.gamma);
    }
  }

  out.viscosity = model.gamma * model.gamma;
  if (grad) (*grad)(gamma_index) += 2.0 * w.viscosity * model.gamma;
  if (coupled) {
    out.bias_penalty = model.bias.squaredNorm();
    if (grad && w.bias_penalty > 0.0) {
      grad->segment(bias_offset, n) += 2.0 * w.bias_penalty * model.bias;
    }
  }

  if (need_phi && grad) trajectories.backward(phi_tape, pos_adj, vel_adj, phi_grad);

  out.total = w.data * out.data + w.physics * out.physics + w.viscosity * out.viscosity;
  if (coupled) {
    out.total += w.trajectory * out.trajectory + w.dynamics * out.dynamics +
                 w.bias_penalty * out.bias_penalty;
  }
  require_finite(out.total, "total");
  if (grad && !grad->allFinite()) throw NumericError("gradient", "non-finite gradient");
  return out;
}

}  // namespace

LossBreakdown loss_noiseless(const PinnModel& model, const MeasurementSet& ms,
                             const LossWeights& w, Eigen::VectorXd* grad,
                             const FieldOverrides& overrides) {
  return evaluate_loss(model, ms, w, grad, overrides, false);
}

LossBreakdown loss_coupled(const PinnModel& model, const MeasurementSet& ms, const LossWeights& w,
                           Eigen::VectorXd* grad, const FieldOverrides& overrides) {
  return evaluate_loss(model, ms, w, grad, overrides, true);
}

Objective make_objective(const PinnModel& model, const MeasurementSet& ms, const LossWeights& w,
                         LossKind kind) {
  auto work = std::make_shared<PinnModel>(model);
  auto data = std::make_shared<const MeasurementSet>(ms);
  return [work, data, w, kind](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    work->set_parameters(p);
    const LossBreakdown b = kind == LossKind::kCoupled ? loss_coupled(*work, *data, w, &g)
                                                       : loss_noiseless(*work, *data, w, &g);
    return b.total;
  };
}

}  // namespace tsr
