#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace dtslpm {

/// Returns f(x) and writes its gradient into the second argument.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsConfig {
  int memory = 10;
  double gradient_tolerance = 1e-6;
  int max_iterations = 5000;
  /// Strong Wolfe constants: sufficient decrease and curvature.
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 60;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  std::string message;
};

/// Limited-memory BFGS minimizer: two-loop recursion for the search direction and a
/// bracketing/zoom line search enforcing the strong Wolfe conditions.
///
/// Stops when ||grad||_2 <= gradient_tolerance or after max_iterations. A line search that
/// cannot make progress (even after discarding the curvature memory) returns the best point
/// seen with converged = false. Throws NumericalError if f(x0) is not finite.
LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsConfig& config = {});

}  // namespace dtslpm
