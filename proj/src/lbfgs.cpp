#include <algorithm>
#include <cmath>
#include <limits>

#include "tsr/errors.hpp"
#include "tsr/optimizer.hpp"

namespace tsr {

namespace {

struct Probe {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  ///< directional derivative g(x + alpha d) . d
  Eigen::VectorXd x;
  Eigen::VectorXd g;
  bool finite = false;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const Eigen::VectorXd& x0, double f0, double slope0,
             const Eigen::VectorXd& dir, const LbfgsState& opt)
      : f_(f), x0_(x0), f0_(f0), slope0_(slope0), dir_(dir), opt_(opt) {}

  /// Returns true and fills `accepted` when a strong-Wolfe point was found.
  bool run(double alpha0, Probe& accepted) {
    Probe prev;
    prev.alpha = 0.0;
    prev.f = f0_;
    prev.slope = slope0_;
    prev.finite = true;
    double alpha = alpha0;
    for (int i = 0; evals_ < opt_.max_line_evals; ++i) {
      Probe cur = probe(alpha);
      if (!cur.finite || cur.f > f0_ + opt_.c1 * alpha * slope0_ || (i > 0 && cur.f >= prev.f)) {
        return zoom(prev, cur, accepted);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        accepted = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, accepted);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return false;
  }

  int evaluations() const { return evals_; }
  /// Lowest finite point seen that satisfies sufficient decrease, if any.
  const Probe* best() const { return best_.finite ? &best_ : nullptr; }

 private:
  Probe probe(double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x = x0_ + alpha * dir_;
    p.g.resize(x0_.size());
    ++evals_;
    try {
      p.f = f_(p.x, p.g);
      p.finite = std::isfinite(p.f) && p.g.allFinite();
    } catch (const NumericError&) {
      p.finite = false;
    }
    if (!p.finite) {
      p.f = std::numeric_limits<double>::infinity();
      return p;
    }
    p.slope = p.g.dot(dir_);
    if (p.f <= f0_ + opt_.c1 * alpha * slope0_ && (!best_.finite || p.f < best_.f)) best_ = p;
    return p;
  }

  // Minimizer of the cubic through (a, fa, da) and (b, fb, db), or NaN.
  static double cubic_min(const Probe& a, const Probe& b) {
    const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    return b.alpha -
           (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  }

  bool zoom(Probe lo, Probe hi, Probe& accepted) {
    while (evals_ < opt_.max_line_evals) {
      const double width = hi.alpha - lo.alpha;
      if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) return false;
      double alpha = hi.finite ? cubic_min(lo, hi) : std::numeric_limits<double>::quiet_NaN();
      const double a_min = std::min(lo.alpha, hi.alpha) + 0.1 * std::abs(width);
      const double a_max = std::max(lo.alpha, hi.alpha) - 0.1 * std::abs(width);
      if (!std::isfinite(alpha) || alpha < a_min || alpha > a_max) {
        alpha = 0.5 * (lo.alpha + hi.alpha);
      }
      Probe cur = probe(alpha);
      if (!cur.finite || cur.f > f0_ + opt_.c1 * alpha * slope0_ || cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        accepted = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return false;
  }

  const Objective& f_;
  const Eigen::VectorXd& x0_;
  double f0_;
  double slope0_;
  const Eigen::VectorXd& dir_;
  const LbfgsState& opt_;
  int evals_ = 0;
  Probe best_;
};

Eigen::VectorXd two_loop(const LbfgsState& state, const Eigen::VectorXd& g) {
  Eigen::VectorXd q = -g;
  std::vector<double> alpha(state.pairs.size());
  for (std::size_t i = state.pairs.size(); i-- > 0;) {
    const auto& p = state.pairs[i];
    alpha[i] = p.rho * p.s.dot(q);
    q -= alpha[i] * p.y;
  }
  if (!state.pairs.empty()) {
    const auto& last = state.pairs.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < state.pairs.size(); ++i) {
    const auto& p = state.pairs[i];
    const double beta = p.rho * p.y.dot(q);
    q += (alpha[i] - beta) * p.s;
  }
  return q;
}

}  // namespace

OptimResult lbfgs_minimize(const Objective& f, Eigen::VectorXd params, LbfgsState& state) {
  if (state.history < 1) throw ConfigError("L-BFGS history must be positive");
  OptimResult out;
  Eigen::VectorXd grad(params.size());
  double loss = 0.0;
  try {
    loss = f(params, grad);
  } catch (const NumericError& e) {
    out.reason = Termination::kNonFinite;
    out.message = e.what();
    out.params = std::move(params);
    return out;
  }
  ++out.evaluations;
  if (!std::isfinite(loss) || !grad.allFinite()) {
    out.reason = Termination::kNonFinite;
    out.message = "non-finite loss at the starting point";
    out.params = std::move(params);
    return out;
  }
  out.trace.push_back(loss);

  while (true) {
    if (grad.norm() < state.grad_tol) {
      out.reason = Termination::kGradTol;
      break;
    }
    if (out.iterations >= state.max_iters) {
      out.reason = Termination::kMaxIter;
      break;
    }
    Eigen::VectorXd dir = two_loop(state, grad);
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      state.pairs.clear();
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    const double alpha0 = state.pairs.empty() ? std::min(1.0, 1.0 / grad.lpNorm<Eigen::Infinity>())
                                              : 1.0;
    LineSearch search(f, params, loss, slope, dir, state);
    Probe next;
    bool ok = search.run(alpha0, next);
    out.evaluations += search.evaluations();
    if (!ok) {
      if (const Probe* b = search.best(); b && b->f < loss) {
        next = *b;
        state.pairs.clear();
      } else if (!state.pairs.empty()) {
        state.pairs.clear();
        continue;
      } else {
        out.reason = Termination::kLineSearch;
        out.message = "strong-Wolfe line search failed";
        break;
      }
    }

    Eigen::VectorXd s = next.x - params;
    Eigen::VectorXd y = next.g - grad;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm() && sy > 0.0) {
      state.pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(state.pairs.size()) > state.history) state.pairs.pop_front();
    }
    const double prev = loss;
    params = std::move(next.x);
    grad = std::move(next.g);
    loss = next.f;
    out.trace.push_back(loss);
    ++out.iterations;

    const double scale = std::max({std::abs(prev), std::abs(loss), 1e-300});
    if (prev - loss <= state.rel_tol * scale) {
      out.reason = Termination::kRelTol;
      break;
    }
  }
  out.params = std::move(params);
  return out;
}

}  // namespace tsr
