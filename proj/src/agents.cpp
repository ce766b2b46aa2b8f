#include "tsr/agents.hpp"

#include <algorithm>
#include <cmath>

#include "tsr/errors.hpp"

namespace tsr {

namespace {

void require_ordered(std::span<const double> y) {
  if (y.empty()) throw ConfigError("at least one agent is required");
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (!(y[i - 1] < y[i])) throw ConfigError("agent positions must be strictly increasing");
  }
}

}  // namespace

double AgentTrajectories::position_at(int agent, double t) const {
  if (times.empty()) throw DomainError("empty trajectory");
  if (t <= times.front()) return position(0, agent);
  if (t >= times.back()) return position(n_times() - 1, agent);
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const int hi = static_cast<int>(it - times.begin());
  const int lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  return (1.0 - w) * position(lo, agent) + w * position(hi, agent);
}

AdvanceResult advance_agents(const DensityField& field, const FluxLaw& law, double t,
                             std::span<const double> positions, double dt) {
  require_ordered(positions);
  AdvanceResult out;
  out.positions.resize(positions.size());
  out.speeds.resize(positions.size());
  const double x_max = field.domain().x_max;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double v = law.agent_speed(sample_density(field, t, positions[i]));
    out.speeds[i] = v;
    out.positions[i] = positions[i] + dt * v;
    if (out.positions[i] > x_max) out.exited = true;
  }
  const double nudge = 1e-9 * field.dx();
  for (std::size_t i = positions.size() - 1; i-- > 0;) {
    if (out.positions[i] >= out.positions[i + 1]) out.positions[i] = out.positions[i + 1] - nudge;
  }
  return out;
}

AgentTrajectories integrate_trajectories(const DensityField& field, std::span<const double> y0) {
  require_ordered(y0);
  const Domain& dom = field.domain();
  if (y0.front() < dom.x_min || y0.back() > dom.x_max) {
    throw DomainError("initial agent positions must lie inside the road");
  }
  const Greenshields law(field.v_f());
  AgentTrajectories traj;
  traj.n_agents = static_cast<int>(y0.size());
  traj.times.push_back(0.0);
  traj.positions.assign(y0.begin(), y0.end());

  std::vector<double> current(y0.begin(), y0.end());
  for (int n = 0; n < field.n_steps(); ++n) {
    AdvanceResult next = advance_agents(field, law, field.time(n), current, field.dt());
    traj.speeds.insert(traj.speeds.end(), next.speeds.begin(), next.speeds.end());
    if (next.exited) {
      traj.truncated = true;
      break;
    }
    current = std::move(next.positions);
    traj.times.push_back(field.time(n + 1));
    traj.positions.insert(traj.positions.end(), current.begin(), current.end());
  }
  // Speeds at the final stored instant, so both series have matching shape.
  const int last = traj.n_times() - 1;
  traj.speeds.resize(static_cast<std::size_t>(last) * traj.n_agents);
  for (int i = 0; i < traj.n_agents; ++i) {
    traj.speeds.push_back(
        law.agent_speed(sample_density(field, traj.times.back(), traj.position(last, i))));
  }
  return traj;
}

double vehicle_count(const DensityField& field, double t, double a, double b) {
  if (a > b) throw DomainError("vehicle_count requires a <= b");
  const int first = field.cell_of(a);
  const int last = field.cell_of(b);
  const int step = field.row_below(t);
  if (a == b) return 0.0;
  const double x0 = field.domain().x_min;
  const double dx = field.dx();
  double total = 0.0;
  for (int i = first; i <= last; ++i) {
    const double lo = std::max(a, x0 + i * dx);
    const double hi = std::min(b, x0 + (i + 1) * dx);
    if (hi > lo) total += field.at(step, i) * (hi - lo);
  }
  return total;
}

}  // namespace tsr
