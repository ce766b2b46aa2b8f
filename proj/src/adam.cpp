#include "tsr/optimizer.hpp"

#include <cmath>

#include "tsr/errors.hpp"

namespace tsr {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kGradTol: return "grad-tol";
    case Termination::kRelTol: return "rel-tol";
    case Termination::kMaxIter: return "max-iter";
    case Termination::kLineSearch: return "line-search";
    case Termination::kNonFinite: return "non-finite";
  }
  return "unknown";
}

OptimResult adam_minimize(const Objective& f, Eigen::VectorXd params, int iters,
                          AdamState& state) {
  if (iters < 1) throw ConfigError("adam needs at least one iteration");
  const Eigen::Index n = params.size();
  if (state.m.size() != n) state.m = Eigen::VectorXd::Zero(n);
  if (state.v.size() != n) state.v = Eigen::VectorXd::Zero(n);

  OptimResult out;
  Eigen::VectorXd grad(n);
  for (int it = 0; it < iters; ++it) {
    double loss = 0.0;
    try {
      loss = f(params, grad);
      ++out.evaluations;
    } catch (const NumericError& e) {
      out.reason = Termination::kNonFinite;
      out.message = e.what();
      break;
    }
    if (!std::isfinite(loss) || !grad.allFinite()) {
      out.reason = Termination::kNonFinite;
      out.message = "non-finite loss or gradient";
      break;
    }
    out.trace.push_back(loss);
    ++state.step;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.array() -= state.lr * (state.m.array() / c1) /
                      ((state.v.array() / c2).sqrt() + state.eps);
    out.iterations = it + 1;
  }
  out.params = std::move(params);
  return out;
}

OptimResult adam_minimize(const Objective& f, Eigen::VectorXd params, int iters) {
  AdamState state;
  return adam_minimize(f, std::move(params), iters, state);
}

}  // namespace tsr
