#pragma once

#include <vector>

#include <Eigen/Core>

#include "dtslpm/types.hpp"

namespace dtslpm {

/// Sufficient stationarity check for the log-linear count process with interaction matrix Gamma:
///
///   -1 < min_i(g_ii - r_i) < |eig_max(Gamma)| < max_i(g_ii + r_i) < 1
///
/// where r_i is the absolute off-diagonal row sum. `satisfied` is this strict chain;
/// `spectral_radius_below_one` is the relaxed criterion |eig_max| < 1.
struct StabilityReport {
  double max_abs_eigenvalue = 0.0;
  double row_lower = 0.0;
  double row_upper = 0.0;
  Eigen::VectorXd r;
  bool satisfied = false;
  bool spectral_radius_below_one = false;
};

/// Per-slice reports for a time-varying Gamma_t; the aggregate holds only if every slice does.
struct TrajectoryStability {
  std::vector<StabilityReport> slices;
  bool satisfied = true;
  bool spectral_radius_below_one = true;
  double worst_max_abs_eigenvalue = 0.0;
};

Eigen::VectorXd row_sums_off_diagonal(const Eigen::MatrixXd& gamma);

/// Throws NumericalError if the eigen-solver fails; `slice` is only used in that message.
StabilityReport check_stability(const Eigen::MatrixXd& gamma, Index slice = 0);

TrajectoryStability check_stability(const ModelParams& params, const LatentTrajectories& latents);

}  // namespace dtslpm
