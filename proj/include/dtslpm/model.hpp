#pragma once

#include <span>

#include <Eigen/Core>

#include "dtslpm/types.hpp"

namespace dtslpm {

/// Connection weight 2 / (1 + exp(d)) for a latent distance d >= 0, evaluated as 2 * sigmoid(-d).
double interaction_weight(double d);

/// Derivative of interaction_weight with respect to d.
double interaction_weight_slope(double d);

/// Euclidean distance between two latent positions of equal length.
double pairwise_distance(std::span<const double> a, std::span<const double> b);

/// N x N matrix Gamma_t: beta on the diagonal, distance weights off it.
Eigen::MatrixXd interaction_matrix_at(const ModelParams& params, ConstSliceMap latents_t);

/// log(lambda_it) for t = 2..T; column c holds time index c + 1 (0-based).
struct IntensitySurface {
  Eigen::MatrixXd log_lambda;

  Eigen::MatrixXd lambda() const { return log_lambda.array().exp().matrix(); }
};

/// Throws ShapeError unless params, latents and panel agree on N (and T for dynamic latents).
void check_consistent(const ModelParams& params, const LatentTrajectories& latents,
                      const CountPanel& panel);

/// Index of the latent slice used as regressor weights when predicting time t (t >= 1).
inline Index regressor_slice(const LatentTrajectories& latents, Index t) {
  return latents.is_static() ? 0 : t - 1;
}

IntensitySurface log_intensity(const ModelParams& params, const LatentTrajectories& latents,
                               const CountPanel& panel);

/// Poisson log-likelihood of y_t given y_{t-1}, summed over t = 2..T (the first column is
/// conditioned on).
double log_likelihood(const ModelParams& params, const LatentTrajectories& latents,
                      const CountPanel& panel);

/// Contribution of the single time index t (0-based, 1 <= t < T) to log_likelihood.
double log_likelihood_step(const ModelParams& params, const LatentTrajectories& latents,
                           const CountPanel& panel, Index t);

/// Normal(0, 10^2) on alpha and beta, Gaussian random walk on the trajectories, and the
/// Gamma hyperpriors on rho and sigma when params.scale_prior is gamma.
///
/// Static trajectories (one slice) have no transition terms, so sigma does not appear.
double log_prior(const ModelParams& params, const LatentTrajectories& latents);

double log_posterior(const ModelParams& params, const LatentTrajectories& latents,
                     const CountPanel& panel);

/// log_posterior plus the log-scale Jacobian (log rho, and log sigma for dynamic latents)
/// when the scales carry Gamma priors. This is the density the samplers and optimizer see.
double log_target(const ModelParams& params, const LatentTrajectories& latents,
                  const CountPanel& panel);

struct PosteriorGradient {
  double alpha = 0.0;
  Eigen::VectorXd beta;
  LatentTrajectories latents;
  double log_rho = 0.0;    // zero unless rho is sampled
  double log_sigma = 0.0;  // zero unless sigma is sampled
};

/// Analytic gradient of log_target.
PosteriorGradient grad_log_posterior(const ModelParams& params, const LatentTrajectories& latents,
                                     const CountPanel& panel);

enum class LatentMode { static_positions, dynamic };

/// Model configuration shared by every fitting routine.
struct ModelSpec {
  LatentMode mode = LatentMode::dynamic;
  Index latent_dim = 2;
  ScalePrior scale_prior = ScalePrior::fixed;
  double rho = 10.0;
  double sigma = 0.05;
  GammaHyper rho_prior{2.0, 2.0};
  GammaHyper sigma_prior{5.0, 10.0};

  ModelParams params_template(Index nodes) const;
  Index latent_times(Index panel_times) const {
    return mode == LatentMode::static_positions ? 1 : panel_times;
  }
  bool samples_rho() const { return scale_prior == ScalePrior::gamma; }
  bool samples_sigma() const {
    return scale_prior == ScalePrior::gamma && mode == LatentMode::dynamic;
  }
};

/// log_target and its gradient over a flat unconstrained vector
/// [alpha, beta_1..N, z (time-major), log rho?, log sigma?].
class PosteriorTarget {
 public:
  PosteriorTarget(CountPanel panel, ModelSpec spec);

  Index dimension() const { return dimension_; }
  const ModelSpec& spec() const { return spec_; }
  const CountPanel& panel() const { return panel_; }

  Eigen::VectorXd pack(const ModelState& state) const;
  ModelState unpack(const Eigen::VectorXd& x) const;

  double log_density(const Eigen::VectorXd& x) const;
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd& gradient) const;

 private:
  CountPanel panel_;
  ModelSpec spec_;
  Eigen::MatrixXd log1p_;
  double log_factorial_sum_ = 0.0;
  Index latent_size_ = 0;
  Index dimension_ = 0;
};

}  // namespace dtslpm
