#include "tsr/sensing.hpp"

#include <algorithm>
#include <cmath>

#include "tsr/errors.hpp"
#include "tsr/random.hpp"

namespace tsr {

void NoiseConfig::validate() const {
  if (!(sigma_rho >= 0.0)) throw ConfigError("sigma_rho must be non-negative");
  if (!(sigma_y >= 0.0)) throw ConfigError("sigma_y must be non-negative");
  if (!std::isfinite(mu_rho)) throw ConfigError("mu_rho must be finite");
}

std::pair<double, double> MeasurementSet::envelope_at(double t) const {
  auto edges = [this](int k) {
    double lo = position(k, 0), hi = lo;
    for (int i = 1; i < n_agents; ++i) {
      lo = std::min(lo, position(k, i));
      hi = std::max(hi, position(k, i));
    }
    return std::pair{lo, hi};
  };
  if (t <= times.front()) return edges(0);
  if (t >= times.back()) return edges(n_data() - 1);
  const int hi = static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  const int lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  const auto [a0, b0] = edges(lo);
  const auto [a1, b1] = edges(hi);
  return {(1.0 - w) * a0 + w * a1, (1.0 - w) * b0 + w * b1};
}

MeasurementSet measure(const DensityField& field, const AgentTrajectories& traj, int n_data,
                       const NoiseConfig& noise) {
  if (n_data < 2) throw ConfigError("n_data must be at least 2");
  noise.validate();
  if (traj.truncated) throw ConfigError("trajectories were truncated; an agent left the road");

  MeasurementSet ms;
  ms.domain = field.domain();
  ms.v_f = field.v_f();
  ms.n_agents = traj.n_agents;
  const double t_max = field.domain().t_max;
  const auto n = static_cast<std::size_t>(n_data) * traj.n_agents;
  ms.times.resize(static_cast<std::size_t>(n_data));
  ms.positions.resize(n);
  ms.densities.resize(n);

  auto rho_rng = make_rng(noise.seed, Stream::kDensityNoise);
  auto pos_rng = make_rng(noise.seed, Stream::kPositionNoise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> walk(static_cast<std::size_t>(traj.n_agents), 0.0);

  for (int k = 0; k < n_data; ++k) {
    const double t = k == n_data - 1 ? t_max : t_max * k / (n_data - 1);
    ms.times[static_cast<std::size_t>(k)] = t;
    const double gap = k == 0 ? 0.0 : t - ms.times[static_cast<std::size_t>(k - 1)];
    for (int i = 0; i < traj.n_agents; ++i) {
      const auto idx = static_cast<std::size_t>(k) * traj.n_agents + i;
      const double y = traj.position_at(i, t);
      const double rho = sample_density(field, t, y);
      ms.densities[idx] = rho + noise.mu_rho + noise.sigma_rho * gauss(rho_rng);
      const double step = gauss(pos_rng);
      if (k > 0) walk[static_cast<std::size_t>(i)] += std::sqrt(noise.sigma_y * gap) * step;
      ms.positions[idx] = y + walk[static_cast<std::size_t>(i)];
    }
  }
  return ms;
}

double sample_collocation(MeasurementSet& ms, int n_f, int n_g, std::uint64_t seed, double margin) {
  if (n_f < 1 || n_g < 1) throw ConfigError("collocation counts must be at least 1");
  if (ms.n_data() < 2) throw ConfigError("measurement set has fewer than two instants");
  const double t_max = ms.domain.t_max;

  double x_lo = ms.positions.front(), x_hi = x_lo;
  for (double w : ms.positions) {
    x_lo = std::min(x_lo, w);
    x_hi = std::max(x_hi, w);
  }
  x_lo -= margin;
  x_hi += margin;

  auto rng = make_rng(seed, Stream::kCollocation);
  std::uniform_real_distribution<double> ut(0.0, t_max);
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  ms.colloc_t.clear();
  ms.colloc_x.clear();
  const long max_attempts = 100L * n_f + 1000;
  long attempts = 0;
  while (static_cast<int>(ms.colloc_t.size()) < n_f) {
    if (attempts >= max_attempts) {
      throw GeometryError("collocation acceptance rate below 1%");
    }
    ++attempts;
    const double t = ut(rng);
    const double x = ux(rng);
    const auto [lo, hi] = ms.envelope_at(t);
    if (x >= lo - margin && x <= hi + margin) {
      ms.colloc_t.push_back(t);
      ms.colloc_x.push_back(x);
    }
  }

  auto ode_rng = make_rng(seed, Stream::kOdeInstants);
  ms.ode_times.resize(static_cast<std::size_t>(n_g));
  for (auto& t : ms.ode_times) t = ut(ode_rng);
  std::sort(ms.ode_times.begin(), ms.ode_times.end());
  return static_cast<double>(n_f) / static_cast<double>(attempts);
}

Standardizer::Standardizer(const Domain& domain) {
  if (!(domain.t_max > 0.0) || !(domain.x_max > domain.x_min)) {
    throw ConfigError("cannot standardize a degenerate domain");
  }
  t_scale_ = 2.0 / domain.t_max;
  x_scale_ = 2.0 / domain.length();
  x_min_ = domain.x_min;
}

std::pair<MeasurementSet, Standardizer> standardize(const MeasurementSet& ms,
                                                    const Domain& domain) {
  const Standardizer std_map(domain);
  MeasurementSet out = ms;
  for (auto& t : out.times) t = std_map.t_to_std(t);
  for (auto& x : out.positions) x = std_map.x_to_std(x);
  for (auto& t : out.colloc_t) t = std_map.t_to_std(t);
  for (auto& x : out.colloc_x) x = std_map.x_to_std(x);
  for (auto& t : out.ode_times) t = std_map.t_to_std(t);
  return {std::move(out), std_map};
}

}  // namespace tsr
