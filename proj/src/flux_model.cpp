#include "tsr/flux_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsr/errors.hpp"

namespace tsr {

double checked_density(double rho) {
  if (!(rho >= -kDensitySlack && rho <= 1.0 + kDensitySlack)) {
    throw DomainError("density " + std::to_string(rho) + " outside [0,1]");
  }
  return std::clamp(rho, 0.0, 1.0);
}

Greenshields::Greenshields(double v_f) : v_f_(v_f) {
  if (!(v_f > 0.0) || !std::isfinite(v_f)) {
    throw ConfigError("free-flow speed must be positive and finite");
  }
}

}  // namespace tsr
