#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tsr/errors.hpp"
#include "tsr/pinn.hpp"

using namespace tsr;

namespace {

struct Fixture {
  DensityField field;
  AgentTrajectories traj;
  MeasurementSet ms;
};

Fixture make_fixture(std::uint64_t seed, NoiseConfig noise = {}) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.v_f = 1.5;
  const Domain d{.t_max = 1.0, .x_min = 0.0, .x_max = 4.0, .n_cells = 40};
  Fixture f;
  f.field = simulate(spec, d);
  f.traj = integrate_trajectories(f.field, std::vector<double>{0.5, 1.0, 1.5});
  f.ms = measure(f.field, f.traj, 12, noise);
  sample_collocation(f.ms, 40, 8, seed);
  return f;
}

PinnModel make_model(const MeasurementSet& ms, std::uint64_t seed) {
  PinnModel m(ms.domain, ms.v_f, ms.n_agents, ThetaArchitecture{2, 6});
  m.initialize(seed, 0.3);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  for (Eigen::Index i = 0; i < m.bias.size(); ++i) m.bias(i) = g(rng);
  // Shift the density output into the physical range.
  m.theta.network().layers().back().bias(0) = 0.5;
  return m;
}

// Zero-initialized relu biases put preactivations exactly on the kink, where
// finite differences are meaningless; a small jitter moves to a generic point.
PinnModel jittered(PinnModel m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.02, 0.02);
  Eigen::VectorXd p = m.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += u(rng);
  m.set_parameters(p);
  return m;
}

const LossWeights kAll{.data = 1.0, .physics = 0.7, .trajectory = 0.9, .dynamics = 0.5,
                       .viscosity = 0.1, .bias_penalty = 0.2};

// Straight-line evaluation of the losses, point by point.
LossBreakdown reference_loss(const PinnModel& m, const MeasurementSet& ms, const LossWeights& w,
                             bool coupled) {
  const Standardizer& s = m.standardizer();
  const double v_f = ms.v_f;
  const int n = ms.n_agents;
  LossBreakdown b;
  for (int k = 0; k < ms.n_data(); ++k) {
    const double t = ms.times[static_cast<std::size_t>(k)];
    const PhiDerivs phi = phi_forward_derivs(m.phi, s, t);
    for (int i = 0; i < n; ++i) {
      const double x = coupled ? phi.positions[static_cast<std::size_t>(i)] : ms.position(k, i);
      const double target = ms.density(k, i) - (coupled ? m.bias(i) : 0.0);
      const double e = target - theta_forward_derivs(m.theta, s, t, x).value;
      b.data += e * e;
      const double p = phi.positions[static_cast<std::size_t>(i)] - ms.position(k, i);
      b.trajectory += p * p;
    }
  }
  b.data /= ms.n_data();
  b.trajectory /= static_cast<double>(ms.n_data()) * n;
  for (int l = 0; l < ms.n_ode(); ++l) {
    const double t = ms.ode_times[static_cast<std::size_t>(l)];
    const PhiDerivs phi = phi_forward_derivs(m.phi, s, t);
    for (int i = 0; i < n; ++i) {
      const double rho = theta_forward_derivs(m.theta, s, t, phi.positions[static_cast<std::size_t>(i)]).value;
      const double g = phi.velocities[static_cast<std::size_t>(i)] -
                       v_f * (1.0 - std::clamp(rho, 0.0, 1.0));
      b.dynamics += g * g;
    }
  }
  b.dynamics /= static_cast<double>(ms.n_ode()) * n;
  for (int j = 0; j < ms.n_colloc(); ++j) {
    const ThetaDerivs d = theta_forward_derivs(m.theta, s, ms.colloc_t[static_cast<std::size_t>(j)],
                                               ms.colloc_x[static_cast<std::size_t>(j)]);
    const double r = d.dt + v_f * (1.0 - 2.0 * d.value) * d.dx - m.gamma * m.gamma * d.dxx;
    b.physics += r * r;
  }
  b.physics /= ms.n_colloc();
  b.viscosity = m.gamma * m.gamma;
  b.bias_penalty = m.bias.squaredNorm();
  b.total = w.data * b.data + w.physics * b.physics + w.viscosity * b.viscosity;
  if (coupled) {
    b.total += w.trajectory * b.trajectory + w.dynamics * b.dynamics +
               w.bias_penalty * b.bias_penalty;
  }
  return b;
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("pde residual examples") {
  const Greenshields law(2.0);
  CHECK(pde_residual(ThetaDerivs{0.37, 0.0, 0.0, 0.0}, 0.8, law) == 0.0);
  CHECK(pde_residual(ThetaDerivs{0.5, 0.3, 2.0, 0.0}, 0.0, law) == 0.3);

  const Fixture f = make_fixture(1);
  PinnModel m(f.ms.domain, f.ms.v_f, 3, ThetaArchitecture{3, 5});
  m.theta.network().layers().back().bias(0) = 0.42;
  m.gamma = 0.9;
  CHECK(pde_residual(m, 0.3, 1.7) == 0.0);
}

TEST_CASE("viscous front has a vanishing residual") {
  const Greenshields law(1.0);
  for (double nu : {0.01, 0.05, 0.2}) {
    const oracle::ViscousFront front{1.0, 0.2, 0.7, nu, 0.1};
    double worst = 0.0;
    for (double t : {0.0, 0.3, 1.0}) {
      for (int i = 0; i <= 200; ++i) {
        const double x = -1.0 + i * 0.01;
        worst = std::max(worst, std::abs(pde_residual(front(t, x), std::sqrt(nu), law)));
      }
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("ode residual examples") {
  const Fixture f = make_fixture(2);
  PinnModel jam(f.ms.domain, f.ms.v_f, 3, ThetaArchitecture{2, 4});
  jam.theta.network().layers().back().bias(0) = 1.0;
  for (double g : ode_residual(jam, 0.4)) CHECK(g == 0.0);

  // Trajectories moving at free-flow speed through an empty road.
  PinnModel free(f.ms.domain, f.ms.v_f, 1, ThetaArchitecture{2, 4});
  auto& layers = free.phi.relu_branch().layers();
  layers[0].bias(0) = 2.0;
  layers[0].weight(0, 0) = 1.0;
  layers[1].weight(0, 0) = 1.0;
  layers[2].weight(0, 0) = 1.0;
  const Standardizer& s = free.standardizer();
  layers[3].weight(0, 0) = f.ms.v_f * s.x_scale() / s.t_scale();
  free.phi.mix_tanh() = 0.0;
  free.phi.mix_relu() = 1.0;
  for (double t : {0.1, 0.5, 0.9}) {
    for (double g : ode_residual(free, t)) CHECK(std::abs(g) <= 1e-12);
  }

  const PinnModel m = make_model(f.ms, 3);
  const double h = 1e-6;
  for (double t : {0.2, 0.55, 0.8}) {
    const auto g = ode_residual(m, t);
    const PhiDerivs p = phi_forward_derivs(m.phi, m.standardizer(), t + h);
    const PhiDerivs q = phi_forward_derivs(m.phi, m.standardizer(), t - h);
    const PhiDerivs c = phi_forward_derivs(m.phi, m.standardizer(), t);
    for (std::size_t i = 0; i < 3; ++i) {
      const double rho =
          std::clamp(theta_forward_derivs(m.theta, m.standardizer(), t, c.positions[i]).value, 0.0, 1.0);
      const double expected = (p.positions[i] - q.positions[i]) / (2 * h) - f.ms.v_f * (1.0 - rho);
      CHECK(std::abs(g[i] - expected) <= 1e-5 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("measurement term arithmetic") {
  MeasurementSet ms;
  ms.domain = Domain{.t_max = 1.0, .x_min = 0.0, .x_max = 1.0, .n_cells = 10};
  ms.n_agents = 3;
  ms.times = {0.0, 0.5, 1.0};
  ms.positions = {0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1, 0.2, 0.3};
  ms.densities.assign(9, 0.5);
  const PinnModel m(ms.domain, 1.0, 3, ThetaArchitecture{2, 3});
  const LossWeights w{.data = 2.0, .physics = 0.0};
  const LossBreakdown b = loss_noiseless(m, ms, w);
  CHECK(b.data == doctest::Approx(3 * 0.25));
  CHECK(b.total == doctest::Approx(2.0 * 3 * 0.25));

  MeasurementSet empty = ms;
  empty.times.clear();
  CHECK_THROWS_AS(loss_noiseless(m, empty, w), ConfigError);
  CHECK_THROWS_AS(loss_noiseless(m, ms, LossWeights{.data = -1.0}), ConfigError);
}

TEST_CASE("losses match a straight-line re-implementation") {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    const Fixture f = make_fixture(seed, NoiseConfig{.sigma_rho = 0.1, .sigma_y = 0.01, .seed = seed});
    const PinnModel m = make_model(f.ms, seed);
    for (bool coupled : {false, true}) {
      const LossBreakdown got = coupled ? loss_coupled(m, f.ms, kAll) : loss_noiseless(m, f.ms, kAll);
      const LossBreakdown ref = reference_loss(m, f.ms, kAll, coupled);
      CHECK(close(got.data, ref.data, 1e-12));
      CHECK(close(got.physics, ref.physics, 1e-12));
      CHECK(close(got.viscosity, ref.viscosity, 1e-12));
      CHECK(close(got.total, ref.total, 1e-12));
      if (coupled) {
        CHECK(close(got.trajectory, ref.trajectory, 1e-12));
        CHECK(close(got.dynamics, ref.dynamics, 1e-12));
      }
    }
  }
}

TEST_CASE("zeroing a weight removes exactly that term") {
  const Fixture f = make_fixture(7, NoiseConfig{.sigma_rho = 0.1, .sigma_y = 0.01, .seed = 7});
  const PinnModel m = make_model(f.ms, 7);
  const LossBreakdown full = loss_coupled(m, f.ms, kAll);
  auto without = [&](double LossWeights::*field) {
    LossWeights w = kAll;
    w.*field = 0.0;
    return loss_coupled(m, f.ms, w).total;
  };
  CHECK(close(full.total - without(&LossWeights::data), kAll.data * full.data, 1e-10));
  CHECK(close(full.total - without(&LossWeights::physics), kAll.physics * full.physics, 1e-10));
  CHECK(close(full.total - without(&LossWeights::trajectory), kAll.trajectory * full.trajectory, 1e-10));
  CHECK(close(full.total - without(&LossWeights::dynamics), kAll.dynamics * full.dynamics, 1e-10));
  CHECK(close(full.total - without(&LossWeights::viscosity), kAll.viscosity * full.viscosity, 1e-10));
  CHECK(close(full.total - without(&LossWeights::bias_penalty), kAll.bias_penalty * full.bias_penalty, 1e-10));

  const LossWeights only_traj{.data = 0.0, .physics = 0.0, .trajectory = 1.0};
  const LossBreakdown t = loss_coupled(m, f.ms, only_traj);
  double sum = 0.0;
  for (int k = 0; k < f.ms.n_data(); ++k) {
    const PhiDerivs p = phi_forward_derivs(m.phi, m.standardizer(), f.ms.times[static_cast<std::size_t>(k)]);
    for (int i = 0; i < 3; ++i) {
      const double e = p.positions[static_cast<std::size_t>(i)] - f.ms.position(k, i);
      sum += e * e;
    }
  }
  CHECK(close(t.total, sum / (f.ms.n_data() * 3.0), 1e-12));
}

TEST_CASE("perfect model has zero coupled loss") {
  ScenarioSpec spec;
  spec.v_f = 1.5;
  spec.ic_levels = {0.3};
  spec.inflow_levels = {0.3};
  spec.outflow_levels = {0.3};
  const Domain d{.t_max = 1.0, .x_min = 0.0, .x_max = 4.0, .n_cells = 40};
  const DensityField field = simulate(spec, d);
  const AgentTrajectories traj = integrate_trajectories(field, std::vector<double>{0.5, 1.0});
  NoiseConfig noise;
  noise.mu_rho = 0.05;
  MeasurementSet ms = measure(field, traj, 10, noise);
  sample_collocation(ms, 30, 6, 1);
  PinnModel m(d, 1.5, 2, ThetaArchitecture{2, 4});
  m.gamma = 0.0;
  m.bias.setConstant(0.05);
  const ExactDensity truth([](double, double) { return ThetaDerivs{0.3, 0.0, 0.0, 0.0}; });
  const RecordedTrajectories recorded(traj);
  const LossWeights w{.data = 1.0, .physics = 1.0, .trajectory = 1.0, .dynamics = 0.5,
                      .viscosity = 0.1};
  const LossBreakdown b = loss_coupled(m, ms, w, nullptr, {&truth, &recorded});
  CHECK(b.total <= 1e-24);
}

TEST_CASE("coupled loss gradient matches finite differences on every block") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Fixture f = make_fixture(seed, NoiseConfig{.sigma_rho = 0.1, .sigma_y = 0.01, .seed = seed});
    const PinnModel m = jittered(make_model(f.ms, seed + 50), seed);
    const Objective obj = make_objective(m, f.ms, kAll, LossKind::kCoupled);
    const Eigen::VectorXd p = m.parameters();
    Eigen::VectorXd g(p.size());
    obj(p, g);
    auto value = [&](const Eigen::VectorXd& q) {
      Eigen::VectorXd scratch(q.size());
      return obj(q, scratch);
    };
    const Eigen::VectorXd fd = oracle::fd_gradient(value, p, 1e-5);
    CHECK(oracle::worst_relative_error(g, fd, oracle::gradient_floor(g)) <= 1e-4);
    const BlockRange bias = m.block(ParamBlock::kBias);
    const auto gi = static_cast<Eigen::Index>(m.block(ParamBlock::kGamma).offset);
    CHECK(std::abs(g(gi)) > 0.0);
    CHECK(g.segment(static_cast<Eigen::Index>(bias.offset), 3).norm() > 0.0);
  }
}

TEST_CASE("noiseless loss gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Fixture f = make_fixture(seed);
    const PinnModel m = jittered(make_model(f.ms, seed + 80), seed);
    const Objective obj = make_objective(m, f.ms, kAll, LossKind::kNoiseless);
    const Eigen::VectorXd p = m.parameters();
    Eigen::VectorXd g(p.size());
    obj(p, g);
    auto value = [&](const Eigen::VectorXd& q) {
      Eigen::VectorXd scratch(q.size());
      return obj(q, scratch);
    };
    CHECK(oracle::worst_relative_error(g, oracle::fd_gradient(value, p, 1e-5), oracle::gradient_floor(g)) <= 1e-4);
    // Trajectory and bias blocks take no part.
    const BlockRange phi = m.block(ParamBlock::kPhi);
    CHECK(g.segment(static_cast<Eigen::Index>(phi.offset), static_cast<Eigen::Index>(phi.size)).isZero(0.0));
  }
}

TEST_CASE("bias is identified when the fields are exact") {
  ScenarioSpec spec;
  spec.seed = 42;
  spec.v_f = 1.5;
  const Domain d{.t_max = 1.0, .x_min = 0.0, .x_max = 4.0, .n_cells = 40};
  const DensityField field = simulate(spec, d);
  const AgentTrajectories traj = integrate_trajectories(field, std::vector<double>{0.5, 1.0, 1.5});
  NoiseConfig noise;
  noise.mu_rho = 0.1;
  MeasurementSet ms = measure(field, traj, 30, noise);
  sample_collocation(ms, 50, 10, 3);
  PinnModel m(d, 1.5, 3, ThetaArchitecture{2, 4});
  const ExactDensity truth([&field](double t, double x) {
    return ThetaDerivs{sample_density(field, t, x), 0.0, 0.0, 0.0};
  });
  const RecordedTrajectories recorded(traj);
  const LossWeights w{.data = 1.0, .physics = 1.0, .trajectory = 1.0, .dynamics = 0.5,
                      .viscosity = 0.1};
  const auto off = static_cast<Eigen::Index>(m.block(ParamBlock::kBias).offset);
  // The loss is quadratic in the bias with Hessian 2 per component.
  Eigen::VectorXd g(static_cast<Eigen::Index>(m.parameter_count()));
  loss_coupled(m, ms, w, &g, {&truth, &recorded});
  m.bias -= 0.5 * g.segment(off, 3);
  loss_coupled(m, ms, w, &g, {&truth, &recorded});
  for (int i = 0; i < 3; ++i) CHECK(m.bias(i) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(g.segment(off, 3).norm() <= 1e-12);
}
