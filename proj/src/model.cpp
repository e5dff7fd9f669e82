#include "dtslpm/model.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace dtslpm {
namespace {

constexpr double kCoefficientVariance = 100.0;  // Normal(0, 10^2) on alpha and beta
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
}

double gamma_log_density(double x, GammaHyper h) {
  return h.shape * std::log(h.rate) - std::lgamma(h.shape) + (h.shape - 1.0) * std::log(x) -
         h.rate * x;
}

double log_factorial_sum(const CountMatrix& y) {
  double total = 0.0;
  for (Index t = 1; t < y.cols(); ++t)
    for (Index i = 0; i < y.rows(); ++i) total += std::lgamma(static_cast<double>(y(i, t)) + 1.0);
  return total;
}

// Pairwise distances and weights for one slice, stored densely (N x N, symmetric).
struct SliceWeights {
  Eigen::MatrixXd distance;
  Eigen::MatrixXd weight;

  void compute(ConstSliceMap z) {
    const Index n = z.rows();
    distance.setZero(n, n);
    weight.setZero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double d = (z.row(i) - z.row(j)).norm();
        const double w = interaction_weight(d);
        distance(i, j) = distance(j, i) = d;
        weight(i, j) = weight(j, i) = w;
      }
    }
  }
};

// Log-likelihood, optionally accumulating its gradient into grad (which must be zeroed).
double likelihood_pass(const ModelParams& p, const LatentTrajectories& z, const CountMatrix& y,
                       const Eigen::MatrixXd& log1p, double log_fact, PosteriorGradient* grad) {
  const Index n = y.rows();
  const Index times = y.cols();
  double ll = -log_fact;
  SliceWeights sw;
  Index cached_slice = -1;
  Eigen::VectorXd resid(n);

  for (Index t = 1; t < times; ++t) {
    const Index s = regressor_slice(z, t);
    if (s != cached_slice) {
      sw.compute(z.slice(s));
      cached_slice = s;
    }
    const auto prev = log1p.col(t - 1);
    for (Index i = 0; i < n; ++i) {
      double eta = p.alpha + p.beta(i) * prev(i);
      for (Index j = 0; j < n; ++j)
        if (j != i) eta += sw.weight(i, j) * prev(j);
      const double lambda = std::exp(eta);
      const double yi = static_cast<double>(y(i, t));
      ll += yi * eta - lambda;
      resid(i) = yi - lambda;
    }
    if (grad == nullptr) continue;

    grad->alpha += resid.sum();
    grad->beta.array() += resid.array() * prev.array();
    auto gz = grad->latents.slice(s);
    const auto zs = z.slice(s);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double d = sw.distance(i, j);
        if (d <= 0.0) continue;  // non-differentiable cusp; take the zero subgradient
        const double coef =
            interaction_weight_slope(d) * (resid(i) * prev(j) + resid(j) * prev(i)) / d;
        for (Index k = 0; k < z.dim(); ++k) {
          const double step = coef * (zs(i, k) - zs(j, k));
          gz(i, k) += step;
          gz(j, k) -= step;
        }
      }
    }
  }
  return ll;
}

double prior_pass(const ModelParams& p, const LatentTrajectories& z, PosteriorGradient* grad) {
  const double coef_sd = std::sqrt(kCoefficientVariance);
  double lp = normal_log_density(p.alpha, 0.0, coef_sd);
  for (Index i = 0; i < p.beta.size(); ++i) lp += normal_log_density(p.beta(i), 0.0, coef_sd);

  const auto first = z.slice(0);
  const double rho2 = p.rho * p.rho;
  const double first_sq = first.squaredNorm();
  lp += -0.5 * first_sq / rho2 -
        static_cast<double>(first.size()) * (std::log(p.rho) + kHalfLog2Pi);

  const double sigma2 = p.sigma * p.sigma;
  double step_sq = 0.0;
  Index n_steps = 0;
  for (Index t = 1; t < z.times(); ++t) {
    step_sq += (z.slice(t) - z.slice(t - 1)).squaredNorm();
    n_steps += z.nodes() * z.dim();
  }
  lp += -0.5 * step_sq / sigma2 - static_cast<double>(n_steps) * (std::log(p.sigma) + kHalfLog2Pi);

  const bool gamma = p.scale_prior == ScalePrior::gamma;
  if (gamma) {
    lp += gamma_log_density(p.rho, p.rho_prior);
    if (!z.is_static()) lp += gamma_log_density(p.sigma, p.sigma_prior);
  }

  if (grad != nullptr) {
    grad->alpha -= p.alpha / kCoefficientVariance;
    grad->beta -= p.beta / kCoefficientVariance;
    grad->latents.slice(0) -= first / rho2;
    for (Index t = 1; t < z.times(); ++t) {
      const RowMatrix delta = (z.slice(t) - z.slice(t - 1)) / sigma2;
      grad->latents.slice(t) -= delta;
      grad->latents.slice(t - 1) += delta;
    }
    if (gamma) {
      // d/d(log rho) of the log-scale density, Jacobian (+1) included.
      grad->log_rho = first_sq / rho2 - static_cast<double>(first.size()) +
                      (p.rho_prior.shape - 1.0) - p.rho_prior.rate * p.rho + 1.0;
      if (!z.is_static())
        grad->log_sigma = step_sq / sigma2 - static_cast<double>(n_steps) +
                          (p.sigma_prior.shape - 1.0) - p.sigma_prior.rate * p.sigma + 1.0;
    }
  }
  return lp;
}

double log_jacobian(const ModelParams& p, const LatentTrajectories& z) {
  if (p.scale_prior != ScalePrior::gamma) return 0.0;
  return std::log(p.rho) + (z.is_static() ? 0.0 : std::log(p.sigma));
}

PosteriorGradient zero_gradient(const ModelParams& p, const LatentTrajectories& z) {
  PosteriorGradient g;
  g.beta = Eigen::VectorXd::Zero(p.beta.size());
  g.latents = LatentTrajectories(z.nodes(), z.times(), z.dim());
  return g;
}

}  // namespace

double interaction_weight(double d) {
  if (!(d >= 0.0) || !std::isfinite(d))
    throw DomainError("interaction weight needs a finite nonnegative distance");
  const double e = std::exp(-d);
  return 2.0 * e / (1.0 + e);
}

double interaction_weight_slope(double d) {
  const double w = interaction_weight(d);
  return -w * (1.0 - 0.5 * w);
}

double pairwise_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("positions have different dimensions");
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

Eigen::MatrixXd interaction_matrix_at(const ModelParams& params, ConstSliceMap latents_t) {
  const Index n = latents_t.rows();
  if (params.beta.size() != n) throw ShapeError("beta length does not match the latent slice");
  if (!latents_t.allFinite()) throw DomainError("latent positions must be finite");
  Eigen::MatrixXd gamma(n, n);
  for (Index i = 0; i < n; ++i) {
    gamma(i, i) = params.beta(i);
    for (Index j = i + 1; j < n; ++j) {
      const double w = interaction_weight((latents_t.row(i) - latents_t.row(j)).norm());
      gamma(i, j) = gamma(j, i) = w;
    }
  }
  return gamma;
}

void check_consistent(const ModelParams& params, const LatentTrajectories& latents,
                      const CountPanel& panel) {
  if (params.beta.size() != panel.nodes())
    throw ShapeError("beta has length " + std::to_string(params.beta.size()) +
                     " but the panel has " + std::to_string(panel.nodes()) + " series");
  if (latents.nodes() != panel.nodes())
    throw ShapeError("latent trajectories have " + std::to_string(latents.nodes()) +
                     " nodes but the panel has " + std::to_string(panel.nodes()) + " series");
  if (!latents.is_static() && latents.times() != panel.times())
    throw ShapeError("latent trajectories have " + std::to_string(latents.times()) +
                     " time slices but the panel has " + std::to_string(panel.times()));
}

IntensitySurface log_intensity(const ModelParams& params, const LatentTrajectories& latents,
                               const CountPanel& panel) {
  check_consistent(params, latents, panel);
  const Eigen::MatrixXd log1p = panel.log1p_counts();
  IntensitySurface out;
  out.log_lambda.resize(panel.nodes(), panel.times() - 1);
  for (Index t = 1; t < panel.times(); ++t) {
    const Eigen::MatrixXd gamma = interaction_matrix_at(params, latents.slice(regressor_slice(latents, t)));
    out.log_lambda.col(t - 1) = (gamma * log1p.col(t - 1)).array() + params.alpha;
  }
  return out;
}

double log_likelihood(const ModelParams& params, const LatentTrajectories& latents,
                      const CountPanel& panel) {
  const IntensitySurface surface = log_intensity(params, latents, panel);
  const Eigen::ArrayXXd y = panel.counts().rightCols(panel.times() - 1).cast<double>().array();
  const Eigen::ArrayXXd log_fact = (y + 1.0).unaryExpr([](double v) { return std::lgamma(v); });
  return (y * surface.log_lambda.array() - surface.log_lambda.array().exp() - log_fact).sum();
}

double log_likelihood_step(const ModelParams& params, const LatentTrajectories& latents,
                           const CountPanel& panel, Index t) {
  check_consistent(params, latents, panel);
  if (t < 1 || t >= panel.times()) throw ShapeError("time index outside 1..T-1");
  const Eigen::MatrixXd gamma = interaction_matrix_at(params, latents.slice(regressor_slice(latents, t)));
  double ll = 0.0;
  for (Index i = 0; i < panel.nodes(); ++i) {
    double eta = params.alpha;
    for (Index j = 0; j < panel.nodes(); ++j)
      eta += gamma(i, j) * std::log1p(static_cast<double>(panel(j, t - 1)));
    const double y = static_cast<double>(panel(i, t));
    ll += y * eta - std::exp(eta) - std::lgamma(y + 1.0);
  }
  return ll;
}

double log_prior(const ModelParams& params, const LatentTrajectories& latents) {
  params.validate(params.beta.size());
  return prior_pass(params, latents, nullptr);
}

double log_posterior(const ModelParams& params, const LatentTrajectories& latents,
                     const CountPanel& panel) {
  return log_likelihood(params, latents, panel) + log_prior(params, latents);
}

double log_target(const ModelParams& params, const LatentTrajectories& latents,
                  const CountPanel& panel) {
  return log_posterior(params, latents, panel) + log_jacobian(params, latents);
}

PosteriorGradient grad_log_posterior(const ModelParams& params, const LatentTrajectories& latents,
                                     const CountPanel& panel) {
  check_consistent(params, latents, panel);
  params.validate(panel.nodes());
  PosteriorGradient g = zero_gradient(params, latents);
  likelihood_pass(params, latents, panel.counts(), panel.log1p_counts(), 0.0, &g);
  prior_pass(params, latents, &g);
  return g;
}

ModelParams ModelSpec::params_template(Index nodes) const {
  ModelParams p;
  p.beta = Eigen::VectorXd::Zero(nodes);
  p.rho = rho;
  p.sigma = sigma;
  p.scale_prior = scale_prior;
  p.rho_prior = rho_prior;
  p.sigma_prior = sigma_prior;
  return p;
}

PosteriorTarget::PosteriorTarget(CountPanel panel, ModelSpec spec)
    : panel_(std::move(panel)), spec_(spec) {
  if (spec_.latent_dim < 1) throw DomainError("latent dimension must be at least 1");
  log1p_ = panel_.log1p_counts();
  log_factorial_sum_ = log_factorial_sum(panel_.counts());
  latent_size_ = panel_.nodes() * spec_.latent_times(panel_.times()) * spec_.latent_dim;
  dimension_ = 1 + panel_.nodes() + latent_size_ + (spec_.samples_rho() ? 1 : 0) +
               (spec_.samples_sigma() ? 1 : 0);
}

Eigen::VectorXd PosteriorTarget::pack(const ModelState& state) const {
  const Index n = panel_.nodes();
  if (state.latents.size() != latent_size_ || state.params.beta.size() != n)
    throw ShapeError("model state does not match the target layout");
  Eigen::VectorXd x(dimension_);
  x(0) = state.params.alpha;
  x.segment(1, n) = state.params.beta;
  const auto values = state.latents.values();
  x.segment(1 + n, latent_size_) = Eigen::Map<const Eigen::VectorXd>(values.data(), latent_size_);
  Index pos = 1 + n + latent_size_;
  if (spec_.samples_rho()) x(pos++) = std::log(state.params.rho);
  if (spec_.samples_sigma()) x(pos++) = std::log(state.params.sigma);
  return x;
}

ModelState PosteriorTarget::unpack(const Eigen::VectorXd& x) const {
  if (x.size() != dimension_) throw ShapeError("parameter vector has the wrong length");
  const Index n = panel_.nodes();
  ModelState s;
  s.params = spec_.params_template(n);
  s.params.alpha = x(0);
  s.params.beta = x.segment(1, n);
  s.latents = LatentTrajectories(n, spec_.latent_times(panel_.times()), spec_.latent_dim);
  auto values = s.latents.values();
  Eigen::Map<Eigen::VectorXd>(values.data(), latent_size_) = x.segment(1 + n, latent_size_);
  Index pos = 1 + n + latent_size_;
  if (spec_.samples_rho()) s.params.rho = std::exp(x(pos++));
  if (spec_.samples_sigma()) s.params.sigma = std::exp(x(pos++));
  return s;
}

namespace {

bool usable_scales(const ModelParams& p) {
  return p.rho > 0.0 && p.sigma > 0.0 && std::isfinite(p.rho) && std::isfinite(p.sigma);
}

}  // namespace

double PosteriorTarget::log_density(const Eigen::VectorXd& x) const {
  if (!x.allFinite()) return -HUGE_VAL;
  const ModelState s = unpack(x);
  if (!usable_scales(s.params)) return -HUGE_VAL;
  return likelihood_pass(s.params, s.latents, panel_.counts(), log1p_, log_factorial_sum_, nullptr) +
         prior_pass(s.params, s.latents, nullptr) + log_jacobian(s.params, s.latents);
}

double PosteriorTarget::log_density(const Eigen::VectorXd& x, Eigen::VectorXd& gradient) const {
  gradient.setZero(dimension_);
  if (!x.allFinite()) return -HUGE_VAL;
  const ModelState s = unpack(x);
  if (!usable_scales(s.params)) return -HUGE_VAL;
  PosteriorGradient g = zero_gradient(s.params, s.latents);
  const double value =
      likelihood_pass(s.params, s.latents, panel_.counts(), log1p_, log_factorial_sum_, &g) +
      prior_pass(s.params, s.latents, &g) + log_jacobian(s.params, s.latents);
  const Index n = panel_.nodes();
  gradient(0) = g.alpha;
  gradient.segment(1, n) = g.beta;
  const auto gv = g.latents.values();
  gradient.segment(1 + n, latent_size_) = Eigen::Map<const Eigen::VectorXd>(gv.data(), latent_size_);
  Index pos = 1 + n + latent_size_;
  if (spec_.samples_rho()) gradient(pos++) = g.log_rho;
  if (spec_.samples_sigma()) gradient(pos++) = g.log_sigma;
  return value;
}

}  // namespace dtslpm
