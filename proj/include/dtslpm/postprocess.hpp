#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dtslpm/inference.hpp"
#include "dtslpm/types.hpp"

namespace dtslpm {

struct ProcrustesFit {
  LatentTrajectories aligned;
  Eigen::MatrixXd rotation;          // K x K orthogonal; reflections allowed
  Eigen::RowVectorXd draw_center;    // centroid of the stacked draw
  Eigen::RowVectorXd reference_center;
  bool degenerate = false;           // reference points all coincide; draw returned unchanged
};

/// Rigid (no scaling) alignment of all T*N stacked points of `draw` onto `reference`, by
/// centering and an SVD of the cross-covariance.
ProcrustesFit procrustes_align(const LatentTrajectories& draw, const LatentTrajectories& reference);

struct AlignedDraws {
  PosteriorDraws draws;  // latents replaced by their aligned images
  ModelState reference;
  int degenerate = 0;
};

AlignedDraws align_all(const PosteriorDraws& draws, const MapEstimate& map);

/// S_t = (1 / 2N) * sum_i |z_it - zbar_t|^2 for one slice.
double empirical_variance(ConstSliceMap latents_t);

/// S_t for every slice of a trajectory set.
Eigen::VectorXd empirical_variance(const LatentTrajectories& latents);

/// Split-chain potential scale reduction factor. Chains must share a length >= 4; empty when the
/// pooled within-chain variance is zero.
std::optional<double> rhat(const std::vector<std::vector<double>>& chains);

/// n / (1 + 2 sum_k rho_k), truncated at the first negative sum of adjacent autocorrelation
/// pairs. Needs at least 10 values; empty for a constant chain.
std::optional<double> ess(std::span<const double> chain);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct Interval {
  double mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
};

Interval summarize_values(std::span<const double> values);

struct PairSeries {
  Index i = 0;
  Index j = 0;
  std::vector<Interval> values;  // one per latent slice
};

struct RiskSeries {
  Eigen::MatrixXd draws;  // M x T_latent, S_t per draw
  std::vector<Interval> summary;
};

struct PosteriorSummary {
  Interval alpha;
  std::vector<Interval> beta;
  std::optional<Interval> rho;
  std::optional<Interval> sigma;
  LatentTrajectories latent_mean;
  LatentTrajectories latent_lower;
  LatentTrajectories latent_upper;
  /// Per slice: posterior mean beta on the diagonal, posterior mean of the weights off it.
  std::vector<Eigen::MatrixXd> mean_interaction;
  std::vector<PairSeries> pairwise;  // i < j
  RiskSeries risk;
};

/// Interaction summaries average the per-draw weights, never the weight of averaged positions.
PosteriorSummary summarize(const AlignedDraws& aligned);

struct RatioDiagnostic {
  std::vector<double> within;
  std::vector<double> between;
  int excluded = 0;  // pairs with zero true distance
};

/// Estimated / true pairwise distance per pair and slice, split by cluster membership.
RatioDiagnostic distance_ratio_diagnostic(const LatentTrajectories& truth,
                                          const LatentTrajectories& estimate,
                                          std::span<const Index> assignment);

}  // namespace dtslpm
