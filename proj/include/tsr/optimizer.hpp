#pragma once

#include <Eigen/Dense>
#include <deque>
#include <string>
#include <vector>

#include "tsr/pinn.hpp"

namespace tsr {

enum class Termination { kGradTol, kRelTol, kMaxIter, kLineSearch, kNonFinite };

const char* to_string(Termination t);

struct OptimResult {
  Eigen::VectorXd params;
  /// Loss at the start and after every iteration.
  std::vector<double> trace;
  Termination reason = Termination::kMaxIter;
  int iterations = 0;
  int evaluations = 0;
  /// Diagnostic for kNonFinite / kLineSearch.
  std::string message;

  double final_loss() const { return trace.empty() ? 0.0 : trace.back(); }
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

/// Full-batch Adam with bias correction. `state` carries hyperparameters and
/// moments; empty moments are zero-initialized. Stops early with kNonFinite if
/// the objective throws NumericError or returns a non-finite value.
OptimResult adam_minimize(const Objective& f, Eigen::VectorXd params, int iters,
                          AdamState& state);
OptimResult adam_minimize(const Objective& f, Eigen::VectorXd params, int iters);

struct LbfgsState {
  int history = 50;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_evals = 30;
  double grad_tol = 1e-5;
  double rel_tol = 1e-12;
  int max_iters = 500;

  struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;  ///< 1 / (s.y)
  };
  std::deque<Pair> pairs;
};

/// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.
OptimResult lbfgs_minimize(const Objective& f, Eigen::VectorXd params, LbfgsState& state);

}  // namespace tsr
