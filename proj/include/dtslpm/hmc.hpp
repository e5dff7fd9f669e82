#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dtslpm {

/// Returns log pi(x) and writes its gradient into the second argument.
using LogDensityFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct PhasePoint {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  Eigen::VectorXd gradient;  // of log pi at position
  double log_density = 0.0;
  bool divergent = false;  // non-finite density or gradient was met
};

/// Evaluates log pi and its gradient at `position` to seed a phase point.
PhasePoint make_phase_point(Eigen::VectorXd position, Eigen::VectorXd momentum,
                            const LogDensityFn& log_density);

/// Half-kick / drift / half-kick integration of H(q, p) = -log pi(q) + |p|^2 / (2 mass).
/// Stops early and flags divergence on a non-finite density or gradient.
PhasePoint leapfrog(PhasePoint start, double step_size, int n_steps,
                    const LogDensityFn& log_density, double mass = 1.0);

struct HmcConfig {
  int n_iterations = 2000;
  int burn_in = 1000;
  int thin = 1;
  int n_chains = 4;
  int leapfrog_steps = 20;
  /// Fixed step size; when empty the step is tuned by dual averaging during burn-in.
  std::optional<double> step_size;
  double target_accept = 0.8;
  std::uint64_t seed = 1;
  double mass = 1.0;
  double divergence_threshold = 1000.0;
  double max_divergence_rate = 0.2;
  int workers = 1;

  void validate() const;
  int draws_per_chain() const { return (n_iterations - burn_in) / thin; }
};

struct RawDraw {
  int chain = 0;
  int iteration = 0;
  double log_density = 0.0;
  Eigen::VectorXd position;
};

struct ChainStats {
  int chain = 0;
  double acceptance_rate = 0.0;  // mean Metropolis acceptance probability after burn-in
  int divergences = 0;           // after burn-in
  int burn_in_divergences = 0;
  double step_size = 0.0;
  int draws = 0;
};

/// Receives each kept draw as soon as it is produced. Chains may run on separate threads;
/// calls for one chain arrive in iteration order.
using DrawSink = std::function<void(const RawDraw&)>;

struct HmcRun {
  std::vector<RawDraw> draws;  // chain-major, iteration order within a chain
  std::vector<ChainStats> chains;
  std::vector<std::string> warnings;
};

/// Plain (fixed trajectory length) HMC with identity mass matrix over `inits.size()` chains.
/// Chain c draws from its own stream make_rng(cfg.seed, c).
HmcRun hmc_run(const LogDensityFn& log_density, const std::vector<Eigen::VectorXd>& inits,
               const HmcConfig& cfg, const DrawSink& sink = {});

}  // namespace dtslpm
