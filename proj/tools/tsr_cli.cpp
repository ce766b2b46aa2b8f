#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "tsr/errors.hpp"
#include "tsr/experiment.hpp"
#include "tsr/runtime.hpp"

namespace fs = std::filesystem;
using namespace tsr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config, "experiment configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "seed overriding the configuration");
  cmd->add_option("--out", args.out, "output directory");
}

ExperimentConfig load_config(const CommonArgs& args) {
  return experiment_from_json(read_json_file(args.config));
}

void write_truth(const GroundTruth& truth, const fs::path& dir) {
  write_field_binary(truth.field, dir / "field.bin");
  write_field_csv(truth.field, dir / "field.csv");
  write_trajectories_csv(truth.trajectories, dir / "trajectories.csv");
}

GroundTruth read_truth(const fs::path& dir) {
  GroundTruth truth;
  truth.field = read_field_binary(dir / "field.bin");
  truth.trajectories = read_trajectories_csv(dir / "trajectories.csv");
  return truth;
}

void write_training(const TrainResult& r, const fs::path& dir) {
  write_checkpoint(r.model, r.report.seed, dir / "model.ckpt");
  write_json_file(to_json(r.report), dir / "train_report.json");
  write_loss_traces_csv(r.report, dir / "loss_traces.csv");
}

EvaluationReport write_evaluation(const ExperimentConfig& cfg, const PinnModel& model,
                                  const GroundTruth& truth, const fs::path& dir) {
  const EvaluationReport report =
      evaluate(model, truth.field, truth.trajectories, cfg.eval_t_from_fraction);
  write_json_file(to_json(report), dir / "evaluation.json");
  export_error_heatmap(model, truth.field, truth.trajectories, dir / "heatmap");
  return report;
}

void print_evaluation(const EvaluationReport& r) {
  std::printf("normalized error %.6g (inside %.6g, outside %.6g, trajectory rmse %.6g)\n", r.error,
              r.error_inside, r.error_outside, r.trajectory_rmse);
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap_memory();
  CLI::App app{"Traffic state reconstruction from probe vehicles"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "simulate the density field and probe trajectories");
  add_common(sim, sim_args);

  CommonArgs meas_args;
  std::string meas_truth;
  auto* meas = app.add_subcommand("measure", "draw noisy probe measurements");
  add_common(meas, meas_args);
  meas->add_option("--truth", meas_truth, "directory written by 'simulate'")->required();

  CommonArgs train_args;
  std::string train_data;
  auto* trn = app.add_subcommand("train", "train the reconstruction networks");
  add_common(trn, train_args);
  trn->add_option("--measurements", train_data, "file written by 'measure'")
      ->required()
      ->check(CLI::ExistingFile);

  CommonArgs eval_args;
  std::string eval_truth;
  std::string eval_model;
  auto* evl = app.add_subcommand("evaluate", "score a trained model against the true field");
  add_common(evl, eval_args);
  evl->add_option("--truth", eval_truth, "directory written by 'simulate'")->required();
  evl->add_option("--model", eval_model, "checkpoint written by 'train'")
      ->required()
      ->check(CLI::ExistingFile);

  CommonArgs bench_args;
  int bench_runs = 5;
  std::string bench_mode = "staged";
  int bench_jobs = 1;
  bool bench_fixed_noise = false;
  auto* bench = app.add_subcommand("benchmark", "repeat training over distinct seeds");
  add_common(bench, bench_args);
  bench->add_option("--runs", bench_runs, "number of runs")->check(CLI::PositiveNumber);
  bench->add_option("--mode", bench_mode, "staged or naive")
      ->check(CLI::IsMember({"staged", "naive"}));
  bench->add_option("--jobs", bench_jobs, "worker threads")->check(CLI::PositiveNumber);
  bench->add_flag("--fixed-noise", bench_fixed_noise, "reuse the configured measurement noise");

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "simulate, measure, train and evaluate in one go");
  add_common(run, run_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) {
      ExperimentConfig cfg = load_config(sim_args);
      if (sim_args.seed) cfg.scenario.seed = *sim_args.seed;
      const GroundTruth truth = simulate_truth(cfg);
      write_truth(truth, sim_args.out);
      std::printf("%d steps x %d cells, %d agents%s\n", truth.field.n_steps(),
                  truth.field.n_cells(), truth.trajectories.n_agents,
                  truth.trajectories.truncated ? " (truncated)" : "");
    } else if (meas->parsed()) {
      ExperimentConfig cfg = load_config(meas_args);
      if (meas_args.seed) cfg.noise.seed = *meas_args.seed;
      const MeasurementSet ms = make_measurements(cfg, read_truth(meas_truth));
      write_json_file(to_json(ms), fs::path(meas_args.out) / "measurements.json");
      std::printf("%d instants, %d collocation points, %d ode instants\n", ms.n_data(),
                  ms.n_colloc(), ms.n_ode());
    } else if (trn->parsed()) {
      ExperimentConfig cfg = load_config(train_args);
      if (train_args.seed) cfg.train.seed = *train_args.seed;
      MeasurementSet ms;
      try {
        ms = measurement_set_from_json(read_json_file(train_data));
      } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed measurement set: ") + e.what());
      }
      const TrainResult r = train(ms, cfg.train);
      write_training(r, train_args.out);
      std::printf("final loss %.6g, gamma^2 %.6g, %.2f s\n", r.report.final_loss,
                  r.report.gamma_squared, r.report.seconds);
    } else if (evl->parsed()) {
      const ExperimentConfig cfg = load_config(eval_args);
      print_evaluation(
          write_evaluation(cfg, read_checkpoint(eval_model), read_truth(eval_truth), eval_args.out));
    } else if (bench->parsed()) {
      const ExperimentConfig cfg = load_config(bench_args);
      BenchmarkOptions opts;
      opts.n_runs = bench_runs;
      opts.mode = benchmark_mode_from_string(bench_mode);
      opts.jobs = bench_jobs;
      opts.vary_noise = !bench_fixed_noise;
      if (bench_args.seed) opts.base_seed = *bench_args.seed;
      const BenchmarkReport report = benchmark(cfg, opts);
      write_json_file(to_json(report), fs::path(bench_args.out) / "benchmark.json");
      std::printf("%s: median error %.6g, median time %.2f s, %d failed\n",
                  to_string(report.mode).c_str(), report.error.median, report.seconds.median,
                  report.failures);
    } else if (run->parsed()) {
      ExperimentConfig cfg = load_config(run_args);
      if (run_args.seed) {
        cfg.scenario.seed = *run_args.seed;
        cfg.noise.seed = *run_args.seed;
        cfg.train.seed = *run_args.seed;
      }
      const fs::path out = run_args.out;
      const GroundTruth truth = simulate_truth(cfg);
      write_truth(truth, out);
      const MeasurementSet ms = make_measurements(cfg, truth);
      write_json_file(to_json(ms), out / "measurements.json");
      const TrainResult r = train(ms, cfg.train);
      write_training(r, out);
      print_evaluation(write_evaluation(cfg, r.model, truth, out));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error in " << e.term() << ": " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const GeometryError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}
