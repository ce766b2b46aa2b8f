#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsr/evaluation.hpp"
#include "tsr/io.hpp"

namespace tsr {

/// Everything needed to go from a scenario to an evaluated reconstruction.
struct ExperimentConfig {
  Domain domain;
  ScenarioSpec scenario;
  std::vector<double> agent_starts;
  NoiseConfig noise;
  int n_data = 100;
  int n_f = 2000;
  int n_g = 200;
  /// Seed of the collocation draw; the noise seed when unset.
  std::optional<std::uint64_t> collocation_seed;
  double collocation_margin = 0.0;
  TrainConfig train;
  double eval_t_from_fraction = 0.2;

  void validate() const;
  /// Small road with five probes used by the tests and the default CLI run.
  static ExperimentConfig fixture();
};

Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const Json& j);

struct GroundTruth {
  DensityField field;
  AgentTrajectories trajectories;
};

GroundTruth simulate_truth(const ExperimentConfig& cfg);
/// Noisy samples plus collocation sets. Throws ConfigError when an agent leaves the road.
MeasurementSet make_measurements(const ExperimentConfig& cfg, const GroundTruth& truth);

struct ExperimentResult {
  TrainResult training;
  EvaluationReport evaluation;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const GroundTruth& truth,
                                const MeasurementSet& ms);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

enum class BenchmarkMode { kStaged, kNaive };

struct BenchmarkOptions {
  int n_runs = 5;
  BenchmarkMode mode = BenchmarkMode::kStaged;
  int jobs = 1;
  std::uint64_t base_seed = 1;
  /// Draw fresh measurement noise per run as well as a fresh initialization.
  bool vary_noise = true;
};

struct BenchmarkRun {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double error = 0.0;
  double seconds = 0.0;
  double final_loss = 0.0;
  std::string failure;
};

struct BenchmarkReport {
  BenchmarkMode mode = BenchmarkMode::kStaged;
  std::vector<BenchmarkRun> runs;
  SampleStats error;
  SampleStats seconds;
  int failures = 0;
};

/// Independent runs with seeds base_seed + i, fanned out over `jobs`
/// threads. Results are ordered by run index; failed runs are recorded and
/// left out of the statistics.
BenchmarkReport benchmark(const ExperimentConfig& cfg, const BenchmarkOptions& opts);

std::string to_string(BenchmarkMode mode);
BenchmarkMode benchmark_mode_from_string(const std::string& s);
Json to_json(const BenchmarkReport& r);

}  // namespace tsr
