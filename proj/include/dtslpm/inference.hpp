#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtslpm/hmc.hpp"
#include "dtslpm/lbfgs.hpp"
#include "dtslpm/model.hpp"
#include "dtslpm/simulator.hpp"
#include "dtslpm/types.hpp"

namespace dtslpm {

/// Starting point when none is supplied: alpha, beta ~ N(0, 0.1^2); z_i1 ~ N(0, I), later
/// slices copied forward with N(0, sigma^2) jitter. rho and sigma take the spec's fixed values,
/// or the Gamma prior means when they carry hyperpriors.
ModelState default_initialization(const CountPanel& panel, const ModelSpec& spec, Rng& rng);

struct OptimizerConfig {
  LbfgsConfig lbfgs;
  /// Additional runs from fresh default initializations; the best optimum is kept.
  int restarts = 0;
  std::uint64_t seed = 1;
};

struct MapEstimate {
  ModelState state;
  double log_posterior = 0.0;  // log_target at the optimum
  double gradient_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

/// Maximizes log_target with L-BFGS (rho, sigma on the log scale when sampled).
MapEstimate map_estimate(const CountPanel& panel, const ModelSpec& spec,
                         const std::optional<ModelState>& init = std::nullopt,
                         const OptimizerConfig& config = {});

struct PosteriorDraw {
  int chain = 0;
  int iteration = 0;
  double log_posterior = 0.0;  // without the log-scale Jacobian
  ModelState state;
};

struct PosteriorDraws {
  ModelSpec spec;
  std::vector<PosteriorDraw> draws;
  std::vector<ChainStats> chains;
  std::vector<std::string> warnings;

  std::size_t size() const { return draws.size(); }
};

/// Receives each draw as it is produced; see DrawSink for threading.
using PosteriorSink = std::function<void(const PosteriorDraw&)>;

/// HMC over (alpha, beta, Z[, log rho, log sigma]). With `init` every chain starts from it;
/// otherwise chain c starts from default_initialization with stream c of cfg.seed.
PosteriorDraws hmc_sample(const CountPanel& panel, const ModelSpec& spec, const HmcConfig& cfg,
                          const std::optional<ModelState>& init = std::nullopt,
                          const PosteriorSink& sink = {});

}  // namespace dtslpm
