#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dtslpm/types.hpp"

namespace dtslpm {

using Rng = std::mt19937_64;

/// Independent, reproducible generator for (seed, stream); streams index chains or replicates.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

struct StaticParams {
  double alpha = 0.0;
  Eigen::VectorXd beta;
};

/// alpha ~ U(-3, 3), beta_i ~ U(-1, 1).
StaticParams sample_static_params(Index nodes, Rng& rng);

struct ClusterConfig {
  std::vector<Eigen::VectorXd> centers;
  double covariance_diag = 0.1;
  std::vector<Index> assignment;
  double expansion_factor = 1.05;
  int max_expansions = 500;

  void validate() const;
  Index nodes() const { return static_cast<Index>(assignment.size()); }

  /// Two clusters at (0,0), (3,3) up to ten nodes; three at (0,0), (-1.8,3), (-3,-3) beyond.
  /// Nodes are assigned to clusters in contiguous blocks of near-equal size.
  static ClusterConfig standard(Index nodes);
};

/// z_i ~ Normal(center[assignment_i], covariance_diag * I); rows are nodes.
RowMatrix sample_clustered_latents(const ClusterConfig& cfg, Rng& rng);

struct ExpansionResult {
  RowMatrix positions;
  int expansions = 0;
};

/// Multiplies every position by cfg.expansion_factor until the strict stability chain holds
/// for Gamma built from (beta, positions). Throws NumericalError after cfg.max_expansions.
ExpansionResult expand_until_stable(const RowMatrix& positions, const Eigen::VectorXd& beta,
                                    const ClusterConfig& cfg);

enum class ExperimentId { pairs_within_clusters, single_node_migration, node_swap };

std::string_view to_string(ExperimentId id);
ExperimentId experiment_from_string(std::string_view name);

struct Waypoint {
  double fraction;  // position in [0, 1] along the series
  Eigen::Vector2d position;
};

/// Reconstructed dynamic designs: four nodes in two clusters anchored at (0,0) and (3,3).
struct ExperimentDesign {
  ExperimentId id = ExperimentId::pairs_within_clusters;
  Index nodes = 4;
  Index times = 200;
  double max_step = 0.15;
  double jitter = 0.04;
  std::vector<std::vector<Waypoint>> schedule;
  std::vector<bool> jittered;

  static ExperimentDesign standard(ExperimentId id, Index times = 200);
};

/// Cosine-eased interpolation through each node's waypoints, plus slow deterministic
/// jitter on nodes flagged in `jittered`. Throws DomainError if a step exceeds max_step.
LatentTrajectories make_experiment_trajectories(const ExperimentDesign& design);

/// Draw from the random-walk prior: z_i1 ~ N(0, rho^2 I), z_it ~ N(z_i,t-1, sigma^2 I).
LatentTrajectories sample_prior_trajectories(Index nodes, Index times, Index dim, double rho,
                                             double sigma, Rng& rng);

struct SimulationOptions {
  bool require_stability = false;
  double max_intensity = 1e15;
  /// When set, log-intensities are clamped here instead of raising on overflow.
  std::optional<double> log_intensity_cap;
};

/// Iterates the Poisson log-linear recursion forward from y_init (the regressor for the first
/// observation). Latents must have one slice (static) or `times` slices.
CountPanel simulate_counts(const ModelParams& params, const LatentTrajectories& latents,
                           const Eigen::VectorXd& y_init, Index times, Rng& rng,
                           const SimulationOptions& opts = {});

struct StaticDataset {
  ModelParams params;
  LatentTrajectories latents;  // a single slice
  ClusterConfig clusters;
  CountPanel panel;
  int attempts = 0;
  int expansions = 0;
};

/// Full static design: parameter draw, clustered positions, expansion until stable (redrawing
/// everything when expansion fails or the counts overflow), and count simulation.
StaticDataset simulate_static_dataset(Index nodes, Index times, Rng& rng, int max_attempts = 200);

struct DynamicDataset {
  ModelParams params;
  LatentTrajectories latents;
  CountPanel panel;
  int attempts = 0;
};

/// Draws (alpha, beta) for fixed trajectories until every Gamma_t passes the strict stability
/// chain and the simulated counts stay below max_intensity.
DynamicDataset simulate_dynamic_dataset(const LatentTrajectories& latents, Rng& rng,
                                        int max_attempts = 100000);

}  // namespace dtslpm
