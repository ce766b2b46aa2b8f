#include "tsr/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tsr/errors.hpp"
#include "tsr/io.hpp"

namespace tsr {

namespace {

struct GridPoints {
  Eigen::ArrayXd t;
  Eigen::ArrayXd x;
  Eigen::ArrayXd truth;
  std::vector<int> step;
  std::vector<bool> inside;
};

GridPoints collect_grid(const DensityField& field, const AgentTrajectories& traj) {
  const int rows = field.n_steps() + 1;
  const int cells = field.n_cells();
  GridPoints g;
  const auto n = static_cast<Eigen::Index>(rows) * cells;
  g.t.resize(n);
  g.x.resize(n);
  g.truth.resize(n);
  g.step.resize(static_cast<std::size_t>(n));
  g.inside.resize(static_cast<std::size_t>(n));
  for (int s = 0; s < rows; ++s) {
    const double t = field.time(s);
    const double lo = traj.position_at(0, t);
    const double hi = traj.position_at(traj.n_agents - 1, t);
    for (int i = 0; i < cells; ++i) {
      const Eigen::Index j = static_cast<Eigen::Index>(s) * cells + i;
      g.t(j) = t;
      g.x(j) = field.cell_center(i);
      g.truth(j) = field.at(s, i);
      g.step[static_cast<std::size_t>(j)] = s;
      g.inside[static_cast<std::size_t>(j)] = g.x(j) >= lo && g.x(j) <= hi;
    }
  }
  return g;
}

template <typename Pred>
double relative_l2(const GridPoints& g, const Eigen::ArrayXd& estimate, Pred keep) {
  double num = 0.0, den = 0.0;
  bool any = false;
  for (Eigen::Index j = 0; j < g.t.size(); ++j) {
    if (!keep(j)) continue;
    any = true;
    const double e = estimate(j) - g.truth(j);
    num += e * e;
    den += g.truth(j) * g.truth(j);
  }
  if (!any) throw DomainError("no grid points in the evaluation region");
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace

double generalization_error(const DensityEvaluator& density, const DensityField& field,
                            const AgentTrajectories& traj, double t_from) {
  const GridPoints g = collect_grid(field, traj);
  const ThetaBatch est = density.evaluate(g.t, g.x, false, nullptr);
  return relative_l2(g, est.value, [&](Eigen::Index j) {
    return g.inside[static_cast<std::size_t>(j)] && g.t(j) >= t_from;
  });
}

double generalization_error(const PinnModel& model, const DensityField& field,
                            const AgentTrajectories& traj, double t_from) {
  return generalization_error(NetworkDensity(model.theta, model.standardizer()), field, traj,
                              t_from);
}

EvaluationReport evaluate(const PinnModel& model, const DensityField& field,
                          const AgentTrajectories& traj, double t_from_fraction) {
  const auto start = std::chrono::steady_clock::now();
  const GridPoints g = collect_grid(field, traj);
  const ThetaBatch est = model.theta.evaluate(model.standardizer(), g.t, g.x, false);
  const double t_max = field.domain().t_max;
  const double t_from = t_from_fraction * t_max;
  const double t_early = t_max / 5.0;
  auto inside = [&](Eigen::Index j) { return g.inside[static_cast<std::size_t>(j)]; };

  EvaluationReport r;
  r.error = relative_l2(g, est.value, [&](Eigen::Index j) { return inside(j) && g.t(j) >= t_from; });
  r.error_inside = relative_l2(g, est.value, inside);
  bool any_outside = std::any_of(g.inside.begin(), g.inside.end(), [](bool b) { return !b; });
  r.error_outside =
      any_outside ? relative_l2(g, est.value, [&](Eigen::Index j) { return !inside(j); }) : 0.0;
  r.error_early = relative_l2(g, est.value, [&](Eigen::Index j) { return inside(j) && g.t(j) < t_early; });
  r.error_late = relative_l2(g, est.value, [&](Eigen::Index j) { return inside(j) && g.t(j) >= t_early; });

  std::vector<double> times(traj.times);
  const PhiBatch phi = model.phi.evaluate(model.standardizer(), times);
  double sq = 0.0;
  for (int s = 0; s < traj.n_times(); ++s) {
    for (int i = 0; i < traj.n_agents; ++i) {
      const double e = phi.position(i, s) - traj.position(s, i);
      sq += e * e;
    }
  }
  r.trajectory_rmse = std::sqrt(sq / (static_cast<double>(traj.n_times()) * traj.n_agents));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<std::filesystem::path> export_error_heatmap(const PinnModel& model,
                                                         const DensityField& field,
                                                         const AgentTrajectories& traj,
                                                         const std::filesystem::path& prefix) {
  const GridPoints g = collect_grid(field, traj);
  const ThetaBatch est = model.theta.evaluate(model.standardizer(), g.t, g.x, false);
  DensityField err(field.domain(), TimeGrid{field.n_steps(), field.dt()}, field.v_f());
  for (int s = 0; s <= field.n_steps(); ++s) {
    auto row = err.row(s);
    for (int i = 0; i < field.n_cells(); ++i) {
      const Eigen::Index j = static_cast<Eigen::Index>(s) * field.n_cells() + i;
      row[static_cast<std::size_t>(i)] = std::abs(est.value(j) - g.truth(j));
    }
  }
  const auto base = prefix.string();
  const std::filesystem::path err_path = base + "_error.csv";
  const std::filesystem::path true_path = base + "_true_traj.csv";
  const std::filesystem::path rec_path = base + "_reconstructed_traj.csv";
  write_field_csv(err, err_path);
  write_trajectories_csv(traj, true_path);

  AgentTrajectories rec;
  rec.n_agents = traj.n_agents;
  rec.times = traj.times;
  const PhiBatch phi = model.phi.evaluate(model.standardizer(), rec.times);
  for (int s = 0; s < traj.n_times(); ++s) {
    for (int i = 0; i < traj.n_agents; ++i) rec.positions.push_back(phi.position(i, s));
  }
  write_trajectories_csv(rec, rec_path);
  return {err_path, true_path, rec_path};
}

GridCsv read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  GridCsv g;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header) {
      for (std::size_t c = 1; c < cells.size(); ++c) g.times.push_back(std::stod(cells[c]));
      header = false;
      continue;
    }
    g.x.push_back(std::stod(cells.at(0)));
    std::vector<double> r;
    for (std::size_t c = 1; c < cells.size(); ++c) r.push_back(std::stod(cells[c]));
    if (r.size() != g.times.size()) throw std::runtime_error("ragged grid CSV " + path.string());
    rows.push_back(std::move(r));
  }
  g.values.resize(g.times.size() * g.x.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t s = 0; s < g.times.size(); ++s) g.values[s * g.x.size() + i] = rows[i][s];
  }
  return g;
}

SampleStats summarize(std::vector<double> values) {
  SampleStats s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

}  // namespace tsr
