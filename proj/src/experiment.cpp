#include "tsr/experiment.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "tsr/errors.hpp"

namespace tsr {

void ExperimentConfig::validate() const {
  domain.validate();
  scenario.validate();
  noise.validate();
  if (agent_starts.empty()) throw ConfigError("at least one agent start is required");
  for (std::size_t i = 0; i < agent_starts.size(); ++i) {
    if (agent_starts[i] < domain.x_min || agent_starts[i] > domain.x_max) {
      throw ConfigError("agent start outside the road");
    }
    if (i > 0 && agent_starts[i] <= agent_starts[i - 1]) {
      throw ConfigError("agent starts must be strictly increasing");
    }
  }
  if (n_data < 2) throw ConfigError("n_data must be at least 2");
  if (n_f < 1 || n_g < 1) throw ConfigError("collocation counts must be positive");
  if (collocation_margin < 0.0) throw ConfigError("collocation margin must be non-negative");
  if (eval_t_from_fraction < 0.0 || eval_t_from_fraction >= 1.0) {
    throw ConfigError("eval_t_from_fraction must lie in [0, 1)");
  }
  train.schedule.validate();
}

ExperimentConfig ExperimentConfig::fixture() {
  ExperimentConfig c;
  c.domain = {.t_max = 2.5, .x_min = 0.0, .x_max = 200.0, .n_cells = 100};
  c.scenario.seed = 42;
  c.scenario.v_f = 40.0;
  c.agent_starts = {10.0, 30.0, 50.0, 70.0, 90.0};
  c.n_data = 100;
  c.n_f = 2000;
  c.n_g = 200;
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j = {{"domain", to_json(c.domain)},
            {"scenario", to_json(c.scenario)},
            {"agent_starts", c.agent_starts},
            {"noise", to_json(c.noise)},
            {"n_data", c.n_data},
            {"n_f", c.n_f},
            {"n_g", c.n_g},
            {"collocation_margin", c.collocation_margin},
            {"train", to_json(c.train)},
            {"eval_t_from_fraction", c.eval_t_from_fraction}};
  if (c.collocation_seed) j["collocation_seed"] = *c.collocation_seed;
  return j;
}

ExperimentConfig experiment_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c = ExperimentConfig::fixture();
  try {
    if (j.contains("domain")) c.domain = domain_from_json(j.at("domain"));
    if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
    c.agent_starts = j.value("agent_starts", c.agent_starts);
    if (j.contains("noise")) c.noise = noise_from_json(j.at("noise"));
    c.n_data = j.value("n_data", c.n_data);
    c.n_f = j.value("n_f", c.n_f);
    c.n_g = j.value("n_g", c.n_g);
    if (j.contains("collocation_seed")) {
      c.collocation_seed = j.at("collocation_seed").get<std::uint64_t>();
    }
    c.collocation_margin = j.value("collocation_margin", c.collocation_margin);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    c.eval_t_from_fraction = j.value("eval_t_from_fraction", c.eval_t_from_fraction);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

GroundTruth simulate_truth(const ExperimentConfig& cfg) {
  GroundTruth g;
  g.field = simulate(cfg.scenario, cfg.domain);
  g.trajectories = integrate_trajectories(g.field, cfg.agent_starts);
  return g;
}

MeasurementSet make_measurements(const ExperimentConfig& cfg, const GroundTruth& truth) {
  MeasurementSet ms = measure(truth.field, truth.trajectories, cfg.n_data, cfg.noise);
  sample_collocation(ms, cfg.n_f, cfg.n_g, cfg.collocation_seed.value_or(cfg.noise.seed),
                     cfg.collocation_margin);
  return ms;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const GroundTruth& truth,
                                const MeasurementSet& ms) {
  ExperimentResult r{train(ms, cfg.train), {}};
  r.evaluation = evaluate(r.training.model, truth.field, truth.trajectories,
                          cfg.eval_t_from_fraction);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const GroundTruth truth = simulate_truth(cfg);
  return run_experiment(cfg, truth, make_measurements(cfg, truth));
}

std::string to_string(BenchmarkMode mode) {
  return mode == BenchmarkMode::kStaged ? "staged" : "naive";
}

BenchmarkMode benchmark_mode_from_string(const std::string& s) {
  if (s == "staged") return BenchmarkMode::kStaged;
  if (s == "naive") return BenchmarkMode::kNaive;
  throw ConfigError("benchmark mode must be 'staged' or 'naive'");
}

BenchmarkReport benchmark(const ExperimentConfig& cfg, const BenchmarkOptions& opts) {
  if (opts.n_runs < 1) throw ConfigError("n_runs must be at least 1");
  if (opts.jobs < 1) throw ConfigError("jobs must be at least 1");
  cfg.validate();

  const GroundTruth truth = simulate_truth(cfg);
  BenchmarkReport report;
  report.mode = opts.mode;
  report.runs.resize(static_cast<std::size_t>(opts.n_runs));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < opts.n_runs; i = next++) {
      BenchmarkRun& run = report.runs[static_cast<std::size_t>(i)];
      run.index = i;
      run.seed = opts.base_seed + static_cast<std::uint64_t>(i);
      ExperimentConfig c = cfg;
      c.train.seed = run.seed;
      c.train.schedule =
          opts.mode == BenchmarkMode::kStaged ? StageSchedule::staged() : StageSchedule::naive();
      if (opts.vary_noise) c.noise.seed = run.seed;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const MeasurementSet ms = make_measurements(c, truth);
        const ExperimentResult r = run_experiment(c, truth, ms);
        run.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.error = r.evaluation.error;
        run.final_loss = r.training.report.final_loss;
        run.ok = true;
      } catch (const std::exception& e) {
        run.failure = e.what();
      }
    }
  };

  const int n_threads = std::min(opts.jobs, opts.n_runs);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<double> errors;
  std::vector<double> times;
  for (const auto& run : report.runs) {
    if (run.ok) {
      errors.push_back(run.error);
      times.push_back(run.seconds);
    } else {
      ++report.failures;
    }
  }
  if (!errors.empty()) {
    report.error = summarize(errors);
    report.seconds = summarize(times);
  }
  return report;
}

Json to_json(const BenchmarkReport& r) {
  Json runs = Json::array();
  for (const auto& run : r.runs) {
    Json jr = {{"index", run.index}, {"seed", run.seed}, {"ok", run.ok}};
    if (run.ok) {
      jr["normalized_error"] = run.error;
      jr["seconds"] = run.seconds;
      jr["final_loss"] = run.final_loss;
    } else {
      jr["failure"] = run.failure;
    }
    runs.push_back(jr);
  }
  auto stats = [](const SampleStats& s) {
    return Json{{"mean", s.mean}, {"median", s.median}, {"std", s.stddev}};
  };
  return {{"mode", to_string(r.mode)},
          {"runs", runs},
          {"failures", r.failures},
          {"normalized_error", stats(r.error)},
          {"seconds", stats(r.seconds)}};
}

}  // namespace tsr
