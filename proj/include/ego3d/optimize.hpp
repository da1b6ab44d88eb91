#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>

#include "ego3d/errors.hpp"

namespace ego3d {

struct OptimizeConfig {
  int max_iterations = 500;
  double tolerance = 1e-10;  // relative objective decrease per iteration
  double initial_step = 0.1;
  int max_backtracks = 50;
  double epsilon = 1e-9;  // norm smoothing sqrt(|v|^2 + eps^2)
  double armijo = 1e-4;
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

/// f(x, grad_out) returns the objective and fills the gradient when grad_out
/// is non-null. Non-finite trial values are treated as rejected steps.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// Gradient descent with backtracking (Armijo) line search. The accepted
/// objective sequence is non-increasing. Throws NonFiniteLoss when the
/// objective is not finite at x0.
inline OptimizeResult minimize_gradient_descent(const Eigen::VectorXd& x0,
                                                const ObjectiveFn& f,
                                                const OptimizeConfig& cfg) {
  OptimizeResult res;
  res.x = x0;
  Eigen::VectorXd grad(x0.size());
  res.value = f(res.x, &grad);
  if (!std::isfinite(res.value))
    throw Error(ErrorCode::NonFiniteLoss, "objective not finite at initialization");

  double step = cfg.initial_step;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const double g2 = grad.squaredNorm();
    if (g2 == 0.0) break;

    double alpha = step;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_value = 0.0;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
      trial = res.x - alpha * grad;
      trial_value = f(trial, nullptr);
      if (std::isfinite(trial_value) &&
          trial_value <= res.value - cfg.armijo * alpha * g2) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const double decrease = res.value - trial_value;
    res.x = std::move(trial);
    res.value = f(res.x, &grad);
    res.iterations = it + 1;
    step = 2.0 * alpha;  // try a longer step next time
    if (decrease <= cfg.tolerance * std::max(1.0, std::abs(res.value))) break;
  }
  return res;
}

}  // namespace ego3d
