#include "tsr/godunov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tsr/errors.hpp"
#include "tsr/random.hpp"

namespace tsr {

void Domain::validate() const {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be positive");
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw ConfigError("x_max must exceed x_min");
  }
  if (n_cells < 2) throw ConfigError("n_cells must be at least 2");
}

TimeGrid make_time_grid(const Domain& domain, const FluxLaw& law) {
  domain.validate();
  // F is decreasing for a concave flux, so its extremes sit at 0 and 1.
  const double max_speed = std::max(std::abs(law.raw_characteristic_speed(0.0)),
                                    std::abs(law.raw_characteristic_speed(1.0)));
  const double dt_max = kCflFactor * domain.dx() / max_speed;
  TimeGrid grid;
  grid.n_steps = std::max(1, static_cast<int>(std::ceil(domain.t_max / dt_max)));
  grid.dt = domain.t_max / grid.n_steps;
  return grid;
}

namespace {

void check_levels(const std::vector<double>& levels, const char* what) {
  for (double v : levels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(what) + " level " + std::to_string(v) + " outside [0,1]");
    }
  }
}

std::vector<double> draw_levels(std::mt19937_64& rng, int count, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& v : out) v = dist(rng);
  return out;
}

double piece_value(const std::vector<double>& pieces, double fraction) {
  const auto n = static_cast<int>(pieces.size());
  const int idx = std::clamp(static_cast<int>(std::floor(fraction * n)), 0, n - 1);
  return pieces[static_cast<std::size_t>(idx)];
}

}  // namespace

void ScenarioSpec::validate() const {
  if (!(v_f > 0.0)) throw ConfigError("v_f must be positive");
  if (ic_levels.empty() && ic_segments < 1) throw ConfigError("ic_segments must be >= 1");
  if ((inflow_levels.empty() || outflow_levels.empty()) && boundary_pieces < 1) {
    throw ConfigError("boundary_pieces must be >= 1");
  }
  if (!(level_min >= 0.0 && level_max <= 1.0 && level_min <= level_max)) {
    throw ConfigError("level range must satisfy 0 <= level_min <= level_max <= 1");
  }
  check_levels(ic_levels, "initial");
  check_levels(inflow_levels, "inflow");
  check_levels(outflow_levels, "outflow");
}

ScenarioSpec ScenarioSpec::resolved() const {
  validate();
  ScenarioSpec out = *this;
  auto rng = make_rng(seed, Stream::kScenario);
  // Draw all three lists unconditionally so that overriding one list does not
  // shift the others.
  auto ic = draw_levels(rng, ic_segments, level_min, level_max);
  auto in = draw_levels(rng, boundary_pieces, level_min, level_max);
  auto ou = draw_levels(rng, boundary_pieces, level_min, level_max);
  if (out.ic_levels.empty()) out.ic_levels = std::move(ic);
  if (out.inflow_levels.empty()) out.inflow_levels = std::move(in);
  if (out.outflow_levels.empty()) out.outflow_levels = std::move(ou);
  return out;
}

std::pair<double, double> ScenarioSpec::level_bounds() const {
  const ScenarioSpec r = resolved();
  double lo = 1.0, hi = 0.0;
  for (const auto* list : {&r.ic_levels, &r.inflow_levels, &r.outflow_levels}) {
    for (double v : *list) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

DensityField::DensityField(Domain domain, TimeGrid grid, double v_f)
    : domain_(domain),
      grid_(grid),
      v_f_(v_f),
      values_(static_cast<std::size_t>(grid.n_steps + 1) * domain.n_cells, 0.0),
      inflow_(static_cast<std::size_t>(grid.n_steps), 0.0),
      outflow_(static_cast<std::size_t>(grid.n_steps), 0.0) {}

std::span<const double> DensityField::row(int step) const {
  return {values_.data() + static_cast<std::size_t>(step) * domain_.n_cells,
          static_cast<std::size_t>(domain_.n_cells)};
}

std::span<double> DensityField::row(int step) {
  return {values_.data() + static_cast<std::size_t>(step) * domain_.n_cells,
          static_cast<std::size_t>(domain_.n_cells)};
}

double DensityField::mass(int step) const {
  const auto r = row(step);
  return std::accumulate(r.begin(), r.end(), 0.0) * dx();
}

int DensityField::row_below(double t) const {
  if (!(t >= 0.0 && t <= domain_.t_max * (1.0 + 1e-12))) {
    throw DomainError("time " + std::to_string(t) + " outside [0, T]");
  }
  // The 1e-9 offset absorbs round-off for queries placed exactly on a stored time.
  const int k = static_cast<int>(std::floor(t / grid_.dt + 1e-9));
  return std::clamp(k, 0, grid_.n_steps);
}

int DensityField::cell_of(double x) const {
  const double span = domain_.length() * 1e-12;
  if (!(x >= domain_.x_min - span && x <= domain_.x_max + span)) {
    throw DomainError("position " + std::to_string(x) + " outside [x_min, x_max]");
  }
  const int i = static_cast<int>(std::floor((x - domain_.x_min) / dx() + 1e-9));
  return std::clamp(i, 0, domain_.n_cells - 1);
}

double godunov_numerical_flux(const FluxLaw& law, double rho_left, double rho_right) {
  const double l = checked_density(rho_left);
  const double r = checked_density(rho_right);
  const double crit = law.critical_density();
  const double peak = law.raw_flux(crit);
  const double demand = l <= crit ? law.raw_flux(l) : peak;
  const double supply = r <= crit ? peak : law.raw_flux(r);
  return std::min(demand, supply);
}

StepResult godunov_step(const FluxLaw& law, std::span<const double> row, double dt, double dx,
                        double boundary_in, double boundary_out) {
  const double max_speed = std::max(std::abs(law.raw_characteristic_speed(0.0)),
                                    std::abs(law.raw_characteristic_speed(1.0)));
  if (!(dt > 0.0) || dt > kCflFactor * dx / max_speed * (1.0 + 1e-12)) {
    throw ConfigError("time step violates the CFL bound");
  }
  const std::size_t n = row.size();
  std::vector<double> interface_flux(n + 1);
  interface_flux[0] = godunov_numerical_flux(law, boundary_in, row[0]);
  for (std::size_t i = 1; i < n; ++i) {
    interface_flux[i] = godunov_numerical_flux(law, row[i - 1], row[i]);
  }
  interface_flux[n] = godunov_numerical_flux(law, row[n - 1], boundary_out);

  StepResult out;
  out.row.resize(n);
  const double ratio = dt / dx;
  for (std::size_t i = 0; i < n; ++i) {
    out.row[i] = row[i] - ratio * (interface_flux[i + 1] - interface_flux[i]);
  }
  out.inflow = interface_flux[0];
  out.outflow = interface_flux[n];
  return out;
}

DensityField simulate(const ScenarioSpec& spec, const Domain& domain) {
  const ScenarioSpec s = spec.resolved();
  const Greenshields law(s.v_f);
  const TimeGrid grid = make_time_grid(domain, law);
  DensityField field(domain, grid, s.v_f);

  auto first = field.row(0);
  for (int i = 0; i < domain.n_cells; ++i) {
    const double frac = (i + 0.5) / domain.n_cells;
    first[static_cast<std::size_t>(i)] = piece_value(s.ic_levels, frac);
  }
  for (int n = 0; n < grid.n_steps; ++n) {
    const double frac = field.time(n) / domain.t_max;
    StepResult next = godunov_step(law, field.row(n), grid.dt, domain.dx(),
                                   piece_value(s.inflow_levels, frac),
                                   piece_value(s.outflow_levels, frac));
    std::copy(next.row.begin(), next.row.end(), field.row(n + 1).begin());
    field.inflow()[static_cast<std::size_t>(n)] = next.inflow;
    field.outflow()[static_cast<std::size_t>(n)] = next.outflow;
  }
  return field;
}

double sample_density(const DensityField& field, double t, double x) {
  return field.at(field.row_below(t), field.cell_of(x));
}

}  // namespace tsr
