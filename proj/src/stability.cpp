#include "dtslpm/stability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "dtslpm/model.hpp"

namespace dtslpm {
namespace {

// Strict inequality that treats rounding-level ties (e.g. |eig| equal to a row bound) as equal.
bool strictly_less(double a, double b) {
  return a < b - 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

Eigen::VectorXd row_sums_off_diagonal(const Eigen::MatrixXd& gamma) {
  if (gamma.rows() != gamma.cols()) throw ShapeError("interaction matrix must be square");
  Eigen::VectorXd r(gamma.rows());
  for (Index i = 0; i < r.size(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < gamma.cols(); ++j)
      if (j != i) s += std::abs(gamma(i, j));
    r(i) = s;
  }
  return r;
}

StabilityReport check_stability(const Eigen::MatrixXd& gamma, Index slice) {
  if (gamma.rows() != gamma.cols()) throw ShapeError("interaction matrix must be square");
  if (!gamma.allFinite()) throw DomainError("interaction matrix must be finite");

  StabilityReport rep;
  rep.r = row_sums_off_diagonal(gamma);

  Eigen::EigenSolver<Eigen::MatrixXd> solver(gamma, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigenvalue solver did not converge for time slice " +
                         std::to_string(slice));
  rep.max_abs_eigenvalue = solver.eigenvalues().cwiseAbs().maxCoeff();

  const Eigen::VectorXd diag = gamma.diagonal();
  rep.row_lower = (diag - rep.r).minCoeff();
  rep.row_upper = (diag + rep.r).maxCoeff();
  rep.satisfied = strictly_less(-1.0, rep.row_lower) &&
                  strictly_less(rep.row_lower, rep.max_abs_eigenvalue) &&
                  strictly_less(rep.max_abs_eigenvalue, rep.row_upper) &&
                  strictly_less(rep.row_upper, 1.0);
  rep.spectral_radius_below_one = strictly_less(rep.max_abs_eigenvalue, 1.0);
  return rep;
}

TrajectoryStability check_stability(const ModelParams& params, const LatentTrajectories& latents) {
  TrajectoryStability out;
  out.slices.reserve(static_cast<std::size_t>(latents.times()));
  for (Index t = 0; t < latents.times(); ++t) {
    StabilityReport rep = check_stability(interaction_matrix_at(params, latents.slice(t)), t);
    out.satisfied = out.satisfied && rep.satisfied;
    out.spectral_radius_below_one = out.spectral_radius_below_one && rep.spectral_radius_below_one;
    out.worst_max_abs_eigenvalue = std::max(out.worst_max_abs_eigenvalue, rep.max_abs_eigenvalue);
    out.slices.push_back(std::move(rep));
  }
  return out;
}

}  // namespace dtslpm
