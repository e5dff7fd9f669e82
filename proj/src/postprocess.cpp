#include "dtslpm/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "dtslpm/model.hpp"

namespace dtslpm {

ProcrustesFit procrustes_align(const LatentTrajectories& draw, const LatentTrajectories& reference) {
  if (draw.nodes() != reference.nodes() || draw.times() != reference.times() ||
      draw.dim() != reference.dim())
    throw ShapeError("draw and reference latents differ in shape");

  const Eigen::MatrixXd x = draw.stacked();
  const Eigen::MatrixXd y = reference.stacked();
  ProcrustesFit fit;
  fit.draw_center = x.colwise().mean();
  fit.reference_center = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - fit.draw_center;
  const Eigen::MatrixXd yc = y.rowwise() - fit.reference_center;

  fit.aligned = draw;
  const auto dv = draw.values();
  const auto rv = reference.values();
  if (std::equal(dv.begin(), dv.end(), rv.begin())) {
    fit.rotation = Eigen::MatrixXd::Identity(draw.dim(), draw.dim());
    return fit;
  }
  if (yc.squaredNorm() == 0.0) {
    fit.degenerate = true;
    fit.rotation = Eigen::MatrixXd::Identity(draw.dim(), draw.dim());
    fit.draw_center.setZero();
    fit.reference_center.setZero();
    return fit;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(xc.transpose() * yc,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
  fit.rotation = svd.matrixU() * svd.matrixV().transpose();
  fit.aligned.stacked() = (xc * fit.rotation).rowwise() + fit.reference_center;
  return fit;
}

AlignedDraws align_all(const PosteriorDraws& draws, const MapEstimate& map) {
  AlignedDraws out;
  out.draws = draws;
  out.reference = map.state;
  for (auto& d : out.draws.draws) {
    ProcrustesFit fit = procrustes_align(d.state.latents, map.state.latents);
    if (fit.degenerate) ++out.degenerate;
    d.state.latents = std::move(fit.aligned);
  }
  return out;
}

double empirical_variance(ConstSliceMap latents_t) {
  const Index n = latents_t.rows();
  if (n < 1) throw ShapeError("empirical variance needs at least one node");
  const Eigen::RowVectorXd centroid = latents_t.colwise().mean();
  return (latents_t.rowwise() - centroid).squaredNorm() / (2.0 * static_cast<double>(n));
}

Eigen::VectorXd empirical_variance(const LatentTrajectories& latents) {
  Eigen::VectorXd s(latents.times());
  for (Index t = 0; t < latents.times(); ++t) s(t) = empirical_variance(latents.slice(t));
  return s;
}

std::optional<double> rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw DomainError("R-hat needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw DomainError("R-hat needs chains of length at least 4");
  for (const auto& c : chains)
    if (c.size() != n) throw ShapeError("R-hat chains must have equal length");

  const std::size_t half = n / 2;
  std::vector<std::span<const double>> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.data(), half);
    parts.emplace_back(c.data() + (n - half), half);
  }
  const double m = static_cast<double>(parts.size());
  const double len = static_cast<double>(half);

  std::vector<double> means, vars;
  for (auto p : parts) {
    const double mu = std::accumulate(p.begin(), p.end(), 0.0) / len;
    double ss = 0.0;
    for (double v : p) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(ss / (len - 1.0));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= len / (m - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (!(w > 0.0)) return std::nullopt;
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

std::optional<double> ess(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw DomainError("ESS needs at least 10 values");
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (chain[t] - mean) * (chain[t + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return std::nullopt;

  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = (autocov(lag) + autocov(lag + 1)) / c0;
    if (pair < 0.0) break;
    tau += 2.0 * pair;
  }
  return static_cast<double>(n) / tau;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Interval summarize_values(std::span<const double> values) {
  if (values.empty()) throw DomainError("cannot summarize an empty sample");
  std::vector<double> v(values.begin(), values.end());
  Interval out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  out.lower = quantile(v, 0.025);
  out.upper = quantile(std::move(v), 0.975);
  return out;
}

PosteriorSummary summarize(const AlignedDraws& aligned) {
  const auto& draws = aligned.draws.draws;
  if (draws.size() < 2) throw DomainError("summaries need at least two draws");
  const std::size_t m = draws.size();
  const auto& first = draws.front().state;
  const Index n = first.latents.nodes();
  const Index times = first.latents.times();
  const Index dim = first.latents.dim();

  auto collect = [&](auto&& get) {
    std::vector<double> v(m);
    for (std::size_t d = 0; d < m; ++d) v[d] = get(draws[d].state);
    return v;
  };

  PosteriorSummary s;
  s.alpha = summarize_values(collect([](const ModelState& st) { return st.params.alpha; }));
  for (Index i = 0; i < n; ++i)
    s.beta.push_back(summarize_values(collect([i](const ModelState& st) { return st.params.beta(i); })));
  if (aligned.draws.spec.samples_rho())
    s.rho = summarize_values(collect([](const ModelState& st) { return st.params.rho; }));
  if (aligned.draws.spec.samples_sigma())
    s.sigma = summarize_values(collect([](const ModelState& st) { return st.params.sigma; }));

  s.latent_mean = LatentTrajectories(n, times, dim);
  s.latent_lower = LatentTrajectories(n, times, dim);
  s.latent_upper = LatentTrajectories(n, times, dim);
  for (Index t = 0; t < times; ++t)
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < dim; ++k) {
        const Interval iv = summarize_values(
            collect([&](const ModelState& st) { return st.latents(i, t, k); }));
        s.latent_mean(i, t, k) = iv.mean;
        s.latent_lower(i, t, k) = iv.lower;
        s.latent_upper(i, t, k) = iv.upper;
      }

  Eigen::VectorXd beta_mean(n);
  for (Index i = 0; i < n; ++i) beta_mean(i) = s.beta[static_cast<std::size_t>(i)].mean;
  s.mean_interaction.assign(static_cast<std::size_t>(times), Eigen::MatrixXd::Zero(n, n));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      PairSeries series{i, j, {}};
      for (Index t = 0; t < times; ++t) {
        const Interval iv = summarize_values(collect([&](const ModelState& st) {
          return interaction_weight(pairwise_distance(st.latents.position(i, t), st.latents.position(j, t)));
        }));
        series.values.push_back(iv);
        auto& g = s.mean_interaction[static_cast<std::size_t>(t)];
        g(i, j) = g(j, i) = iv.mean;
      }
      s.pairwise.push_back(std::move(series));
    }
  for (auto& g : s.mean_interaction) g.diagonal() = beta_mean;

  s.risk.draws.resize(static_cast<Index>(m), times);
  for (std::size_t d = 0; d < m; ++d)
    s.risk.draws.row(static_cast<Index>(d)) = empirical_variance(draws[d].state.latents).transpose();
  for (Index t = 0; t < times; ++t) {
    const Eigen::VectorXd col = s.risk.draws.col(t);
    s.risk.summary.push_back(summarize_values(std::span<const double>(col.data(), m)));
  }
  return s;
}

RatioDiagnostic distance_ratio_diagnostic(const LatentTrajectories& truth,
                                          const LatentTrajectories& estimate,
                                          std::span<const Index> assignment) {
  if (truth.nodes() != estimate.nodes() || truth.times() != estimate.times() ||
      truth.dim() != estimate.dim())
    throw ShapeError("true and estimated latents differ in shape");
  if (static_cast<Index>(assignment.size()) != truth.nodes())
    throw ShapeError("cluster assignment must cover every node");
  RatioDiagnostic out;
  for (Index t = 0; t < truth.times(); ++t)
    for (Index i = 0; i < truth.nodes(); ++i)
      for (Index j = i + 1; j < truth.nodes(); ++j) {
        const double d_true = pairwise_distance(truth.position(i, t), truth.position(j, t));
        if (d_true == 0.0) {
          ++out.excluded;
          continue;
        }
        const double ratio =
            pairwise_distance(estimate.position(i, t), estimate.position(j, t)) / d_true;
        const bool same = assignment[static_cast<std::size_t>(i)] == assignment[static_cast<std::size_t>(j)];
        (same ? out.within : out.between).push_back(ratio);
      }
  return out;
}

}  // namespace dtslpm
