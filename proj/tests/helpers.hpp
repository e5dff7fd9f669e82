#pragma once

#include <cmath>
#include <random>

#include "dtslpm/model.hpp"
#include "dtslpm/simulator.hpp"

namespace testing {

using namespace dtslpm;

inline CountPanel random_panel(Index n, Index t, Rng& rng, int max_count = 6) {
  std::uniform_int_distribution<int> u(0, max_count);
  CountMatrix y(n, t);
  for (Index c = 0; c < t; ++c)
    for (Index r = 0; r < n; ++r) y(r, c) = u(rng);
  return CountPanel(y);
}

/// Arbitrary point of the parameter space (not a posterior draw).
inline ModelState random_state(const ModelSpec& spec, Index n, Index panel_times, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  ModelState s;
  s.params = spec.params_template(n);
  s.params.alpha = u(rng);
  for (Index i = 0; i < n; ++i) s.params.beta(i) = u(rng);
  if (spec.samples_rho()) s.params.rho = std::exp(0.5 * z(rng));
  if (spec.samples_sigma()) s.params.sigma = 0.2 * std::exp(0.3 * z(rng));
  s.latents = LatentTrajectories(n, spec.latent_times(panel_times), spec.latent_dim);
  for (Index t = 0; t < s.latents.times(); ++t)
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < spec.latent_dim; ++k)
        s.latents(i, t, k) = (t == 0 ? 1.5 * z(rng) : s.latents(i, t - 1, k) + 0.2 * z(rng));
  return s;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace testing
