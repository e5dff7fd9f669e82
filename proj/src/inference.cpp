#include "dtslpm/inference.hpp"

#include <cmath>
#include <limits>

namespace dtslpm {
namespace {

// Sum of the log-scale coordinates, i.e. the Jacobian folded into log_target.
double log_scale_jacobian(const PosteriorTarget& target, const Eigen::VectorXd& x) {
  const Index extra = (target.spec().samples_rho() ? 1 : 0) + (target.spec().samples_sigma() ? 1 : 0);
  return extra > 0 ? x.tail(extra).sum() : 0.0;
}

}  // namespace

ModelState default_initialization(const CountPanel& panel, const ModelSpec& spec, Rng& rng) {
  const Index n = panel.nodes();
  ModelState s;
  s.params = spec.params_template(n);
  if (spec.scale_prior == ScalePrior::gamma) {
    s.params.rho = spec.rho_prior.shape / spec.rho_prior.rate;
    s.params.sigma = spec.sigma_prior.shape / spec.sigma_prior.rate;
  }
  std::normal_distribution<double> coef(0.0, 0.1);
  std::normal_distribution<double> unit(0.0, 1.0);
  s.params.alpha = coef(rng);
  for (Index i = 0; i < n; ++i) s.params.beta(i) = coef(rng);
  s.latents = LatentTrajectories(n, spec.latent_times(panel.times()), spec.latent_dim);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < spec.latent_dim; ++k) s.latents(i, 0, k) = unit(rng);
  for (Index t = 1; t < s.latents.times(); ++t)
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < spec.latent_dim; ++k)
        s.latents(i, t, k) = s.latents(i, t - 1, k) + s.params.sigma * unit(rng);
  return s;
}

MapEstimate map_estimate(const CountPanel& panel, const ModelSpec& spec,
                         const std::optional<ModelState>& init, const OptimizerConfig& config) {
  const PosteriorTarget target(panel, spec);
  const Objective negative = [&target](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double v = target.log_density(x, g);
    g = -g;
    return -v;
  };

  Rng rng = make_rng(config.seed, 0);
  MapEstimate best;
  best.log_posterior = -std::numeric_limits<double>::infinity();
  bool have = false;
  for (int run = 0; run <= config.restarts; ++run) {
    const ModelState start =
        (run == 0 && init) ? *init : default_initialization(panel, spec, rng);
    const Eigen::VectorXd x0 = target.pack(start);
    Eigen::VectorXd g0;
    if (!std::isfinite(target.log_density(x0, g0)))
      throw NumericalError("log posterior is not finite at the initial point");
    const LbfgsResult r = lbfgs_minimize(negative, x0, config.lbfgs);
    const double lp = -r.value;
    // Prefer converged optima; among equals keep the higher posterior.
    const bool better = !have || (r.converged && !best.converged) ||
                        (r.converged == best.converged && lp > best.log_posterior);
    if (better) {
      best.state = target.unpack(r.x);
      best.log_posterior = lp;
      best.gradient_norm = r.gradient_norm;
      best.converged = r.converged;
      best.iterations = r.iterations;
      best.message = r.message;
      have = true;
    }
  }
  return best;
}

PosteriorDraws hmc_sample(const CountPanel& panel, const ModelSpec& spec, const HmcConfig& cfg,
                          const std::optional<ModelState>& init, const PosteriorSink& sink) {
  cfg.validate();
  const PosteriorTarget target(panel, spec);
  const LogDensityFn density = [&target](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return target.log_density(x, g);
  };

  std::vector<Eigen::VectorXd> inits;
  for (int c = 0; c < cfg.n_chains; ++c) {
    if (init) {
      inits.push_back(target.pack(*init));
    } else {
      Rng rng = make_rng(cfg.seed ^ 0x5eedULL, static_cast<std::uint64_t>(c));
      inits.push_back(target.pack(default_initialization(panel, spec, rng)));
    }
  }

  auto convert = [&target](const RawDraw& d) {
    PosteriorDraw out;
    out.chain = d.chain;
    out.iteration = d.iteration;
    out.log_posterior = d.log_density - log_scale_jacobian(target, d.position);
    out.state = target.unpack(d.position);
    return out;
  };
  DrawSink raw_sink;
  if (sink) raw_sink = [&](const RawDraw& d) { sink(convert(d)); };

  HmcRun run = hmc_run(density, inits, cfg, raw_sink);
  PosteriorDraws out;
  out.spec = spec;
  out.chains = std::move(run.chains);
  out.warnings = std::move(run.warnings);
  out.draws.reserve(run.draws.size());
  for (const RawDraw& d : run.draws) out.draws.push_back(convert(d));
  return out;
}

}  // namespace dtslpm
