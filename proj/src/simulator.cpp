#include "dtslpm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dtslpm/model.hpp"
#include "dtslpm/stability.hpp"

namespace dtslpm {
namespace {

ModelParams params_with(double alpha, const Eigen::VectorXd& beta) {
  ModelParams p;
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

bool chain_holds(const Eigen::VectorXd& beta, const RowMatrix& positions) {
  const ModelParams p = params_with(0.0, beta);
  const ConstSliceMap view(positions.data(), positions.rows(), positions.cols());
  return check_stability(interaction_matrix_at(p, view)).satisfied;
}

double eased(double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * u)); }

Eigen::Vector2d interpolate(const std::vector<Waypoint>& path, double f) {
  if (f <= path.front().fraction) return path.front().position;
  for (std::size_t w = 1; w < path.size(); ++w) {
    const Waypoint& a = path[w - 1];
    const Waypoint& b = path[w];
    if (f <= b.fraction) {
      const double span = b.fraction - a.fraction;
      const double u = span > 0.0 ? (f - a.fraction) / span : 1.0;
      return a.position + eased(u) * (b.position - a.position);
    }
  }
  return path.back().position;
}

std::vector<Waypoint> hold(const Eigen::Vector2d& p) { return {{0.0, p}, {1.0, p}}; }

// Two pairs rotating about their anchors while their separation oscillates in antiphase.
ExperimentDesign pairs_design(ExperimentDesign d) {
  const Eigen::Vector2d anchor_a(0.0, 0.0), anchor_b(3.0, 3.0);
  constexpr int kKnots = 17;
  d.schedule.assign(4, {});
  for (int s = 0; s < kKnots; ++s) {
    const double f = static_cast<double>(s) / (kKnots - 1);
    const double swing = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * f));
    const double sep_a = 0.7 + 0.9 * swing;
    const double sep_b = 1.6 - 0.9 * swing;
    const double th_a = std::numbers::pi * f;
    const double th_b = std::numbers::pi / 4.0 - std::numbers::pi * f;
    const Eigen::Vector2d ua(std::cos(th_a), std::sin(th_a));
    const Eigen::Vector2d ub(std::cos(th_b), std::sin(th_b));
    d.schedule[0].push_back({f, anchor_a + 0.5 * sep_a * ua});
    d.schedule[1].push_back({f, anchor_a - 0.5 * sep_a * ua});
    d.schedule[2].push_back({f, anchor_b + 0.5 * sep_b * ub});
    d.schedule[3].push_back({f, anchor_b - 0.5 * sep_b * ub});
  }
  d.jittered.assign(4, false);
  return d;
}

// Node 1 leaves the cluster at (0,0) for the one at (3,3) over the middle third, arriving
// from the side so its path never crowds the resident pair.
ExperimentDesign migration_design(ExperimentDesign d) {
  const Eigen::Vector2d a(0.0, 0.0), b(3.0, 3.0);
  d.schedule = {
      {{0.0, a + Eigen::Vector2d(-0.5, 0.0)},
       {1.0 / 3.0, a + Eigen::Vector2d(-0.5, 0.0)},
       {2.0 / 3.0, b + Eigen::Vector2d(-1.3, 0.0)},
       {1.0, b + Eigen::Vector2d(-1.3, 0.0)}},
      hold(a + Eigen::Vector2d(0.5, 0.0)),
      hold(b + Eigen::Vector2d(0.0, -0.8)),
      hold(b + Eigen::Vector2d(0.0, 0.8)),
  };
  d.jittered = {false, true, true, true};
  return d;
}

// Nodes 1 and 4 exchange places along bowed paths so they never collide. Each cluster's pair
// sits across the diagonal joining the clusters, which keeps the travellers clear of it.
ExperimentDesign swap_design(ExperimentDesign d) {
  const Eigen::Vector2d p1(-0.3, 0.3), p2(0.3, -0.3), p3(3.3, 2.7), p4(2.7, 3.3);
  const Eigen::Vector2d mid = 0.5 * (p1 + p4);
  const Eigen::Vector2d bend(-0.6, 0.6);
  d.schedule = {
      {{0.0, p1}, {1.0 / 3.0, p1}, {0.5, mid + bend}, {2.0 / 3.0, p4}, {1.0, p4}},
      hold(p2),
      hold(p3),
      {{0.0, p4}, {1.0 / 3.0, p4}, {0.5, mid - bend}, {2.0 / 3.0, p1}, {1.0, p1}},
  };
  d.jittered = {false, true, true, false};
  return d;
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

StaticParams sample_static_params(Index nodes, Rng& rng) {
  std::uniform_real_distribution<double> alpha_dist(-3.0, 3.0);
  std::uniform_real_distribution<double> beta_dist(-1.0, 1.0);
  StaticParams out;
  out.alpha = alpha_dist(rng);
  out.beta.resize(nodes);
  for (Index i = 0; i < nodes; ++i) out.beta(i) = beta_dist(rng);
  return out;
}

void ClusterConfig::validate() const {
  if (centers.empty()) throw DomainError("cluster config needs at least one center");
  const Index dim = centers.front().size();
  for (const auto& c : centers)
    if (c.size() != dim) throw ShapeError("cluster centers have different dimensions");
  for (Index a : assignment)
    if (a < 0 || a >= static_cast<Index>(centers.size()))
      throw DomainError("cluster assignment " + std::to_string(a) + " has no center");
  if (covariance_diag < 0.0) throw DomainError("cluster variance must be nonnegative");
  if (!(expansion_factor > 1.0)) throw DomainError("expansion factor must exceed 1");
}

ClusterConfig ClusterConfig::standard(Index nodes) {
  ClusterConfig cfg;
  if (nodes <= 10) {
    cfg.centers = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(3.0, 3.0)};
  } else {
    cfg.centers = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-1.8, 3.0),
                   Eigen::Vector2d(-3.0, -3.0)};
  }
  const Index k = static_cast<Index>(cfg.centers.size());
  for (Index i = 0; i < nodes; ++i) cfg.assignment.push_back(std::min(k - 1, i * k / nodes));
  return cfg;
}

RowMatrix sample_clustered_latents(const ClusterConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index dim = cfg.centers.front().size();
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sd = std::sqrt(cfg.covariance_diag);
  RowMatrix z(cfg.nodes(), dim);
  for (Index i = 0; i < cfg.nodes(); ++i) {
    const auto& c = cfg.centers[static_cast<std::size_t>(cfg.assignment[static_cast<std::size_t>(i)])];
    for (Index k = 0; k < dim; ++k) z(i, k) = c(k) + sd * noise(rng);
  }
  return z;
}

ExpansionResult expand_until_stable(const RowMatrix& positions, const Eigen::VectorXd& beta,
                                    const ClusterConfig& cfg) {
  if (beta.size() != positions.rows()) throw ShapeError("beta length does not match positions");
  ExpansionResult out{positions, 0};
  while (!chain_holds(beta, out.positions)) {
    if (out.expansions >= cfg.max_expansions)
      throw NumericalError("positions still unstable after " + std::to_string(cfg.max_expansions) +
                           " expansions; use a larger expansion factor or a different beta");
    out.positions *= cfg.expansion_factor;
    ++out.expansions;
  }
  return out;
}

std::string_view to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::pairs_within_clusters: return "pairs-within-clusters";
    case ExperimentId::single_node_migration: return "single-node-migration";
    case ExperimentId::node_swap: return "node-swap";
  }
  return "unknown";
}

ExperimentId experiment_from_string(std::string_view name) {
  for (auto id : {ExperimentId::pairs_within_clusters, ExperimentId::single_node_migration,
                  ExperimentId::node_swap})
    if (to_string(id) == name) return id;
  throw DomainError("unknown experiment design '" + std::string(name) + "'");
}

ExperimentDesign ExperimentDesign::standard(ExperimentId id, Index times) {
  ExperimentDesign d;
  d.id = id;
  d.times = times;
  switch (id) {
    case ExperimentId::pairs_within_clusters: return pairs_design(d);
    case ExperimentId::single_node_migration: return migration_design(d);
    case ExperimentId::node_swap: return swap_design(d);
  }
  return d;
}

LatentTrajectories make_experiment_trajectories(const ExperimentDesign& design) {
  if (static_cast<Index>(design.schedule.size()) != design.nodes)
    throw ShapeError("design schedule must list waypoints for every node");
  if (design.times < 2) throw DomainError("design needs at least two time points");
  LatentTrajectories z(design.nodes, design.times, 2);
  for (Index i = 0; i < design.nodes; ++i) {
    const auto& path = design.schedule[static_cast<std::size_t>(i)];
    if (path.empty()) throw DomainError("node " + std::to_string(i) + " has no waypoints");
    const bool jitter = !design.jittered.empty() && design.jittered[static_cast<std::size_t>(i)];
    const double phase = 1.7 * static_cast<double>(i);
    for (Index t = 0; t < design.times; ++t) {
      const double f = static_cast<double>(t) / static_cast<double>(design.times - 1);
      Eigen::Vector2d p = interpolate(path, f);
      if (jitter) {
        p(0) += design.jitter * std::sin(2.0 * std::numbers::pi * 3.0 * f + phase);
        p(1) += design.jitter * std::cos(2.0 * std::numbers::pi * 2.0 * f + phase);
      }
      z(i, t, 0) = p(0);
      z(i, t, 1) = p(1);
    }
  }
  for (Index t = 1; t < design.times; ++t)
    for (Index i = 0; i < design.nodes; ++i) {
      const double step = pairwise_distance(z.position(i, t), z.position(i, t - 1));
      if (step > design.max_step)
        throw DomainError("design step " + std::to_string(step) + " for node " +
                          std::to_string(i) + " at time " + std::to_string(t) +
                          " exceeds the configured maximum");
    }
  return z;
}

LatentTrajectories sample_prior_trajectories(Index nodes, Index times, Index dim, double rho,
                                             double sigma, Rng& rng) {
  if (rho < 0.0 || sigma < 0.0) throw DomainError("prior scales must be nonnegative");
  LatentTrajectories z(nodes, times, dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index i = 0; i < nodes; ++i)
    for (Index k = 0; k < dim; ++k) z(i, 0, k) = rho * noise(rng);
  for (Index t = 1; t < times; ++t)
    for (Index i = 0; i < nodes; ++i)
      for (Index k = 0; k < dim; ++k) z(i, t, k) = z(i, t - 1, k) + sigma * noise(rng);
  return z;
}

CountPanel simulate_counts(const ModelParams& params, const LatentTrajectories& latents,
                           const Eigen::VectorXd& y_init, Index times, Rng& rng,
                           const SimulationOptions& opts) {
  const Index n = latents.nodes();
  if (params.beta.size() != n) throw ShapeError("beta length does not match the latent nodes");
  if (y_init.size() != n) throw ShapeError("initial counts do not match the latent nodes");
  if (!latents.is_static() && latents.times() != times)
    throw ShapeError("latent trajectories must have one slice or one per time point");
  if (times < 2) throw DomainError("simulation needs at least two time points");
  if (opts.log_intensity_cap && std::exp(*opts.log_intensity_cap) > opts.max_intensity)
    throw DomainError("log-intensity cap exceeds the maximum intensity");

  std::vector<Eigen::MatrixXd> gammas;
  for (Index s = 0; s < latents.times(); ++s) {
    gammas.push_back(interaction_matrix_at(params, latents.slice(s)));
    if (opts.require_stability && !check_stability(gammas.back(), s).satisfied)
      throw DomainError("interaction matrix violates the stability condition at time slice " +
                        std::to_string(s));
  }

  CountMatrix y(n, times);
  Eigen::VectorXd prev = y_init.array().log1p().matrix();
  for (Index t = 0; t < times; ++t) {
    const Eigen::MatrixXd& gamma = gammas[static_cast<std::size_t>(latents.is_static() ? 0 : std::max<Index>(t - 1, 0))];
    const Eigen::VectorXd eta = (gamma * prev).array() + params.alpha;
    for (Index i = 0; i < n; ++i) {
      double e = eta(i);
      if (opts.log_intensity_cap) e = std::min(e, *opts.log_intensity_cap);
      const double lambda = std::exp(e);
      if (!std::isfinite(lambda) || lambda > opts.max_intensity)
        throw NumericalError("intensity overflow at time index " + std::to_string(t) +
                             " (series " + std::to_string(i) + ")");
      y(i, t) = std::poisson_distribution<std::int64_t>(lambda)(rng);
    }
    prev = y.col(t).cast<double>().array().log1p().matrix();
  }
  return CountPanel(std::move(y));
}

StaticDataset simulate_static_dataset(Index nodes, Index times, Rng& rng, int max_attempts) {
  StaticDataset out;
  out.clusters = ClusterConfig::standard(nodes);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const StaticParams drawn = sample_static_params(nodes, rng);
    const RowMatrix initial = sample_clustered_latents(out.clusters, rng);
    ExpansionResult expanded;
    try {
      expanded = expand_until_stable(initial, drawn.beta, out.clusters);
    } catch (const NumericalError&) {
      continue;
    }
    out.params = params_with(drawn.alpha, drawn.beta);
    out.latents = LatentTrajectories(nodes, 1, initial.cols());
    out.latents.slice(0) = expanded.positions;
    out.attempts = attempt;
    out.expansions = expanded.expansions;
    try {
      out.panel = simulate_counts(out.params, out.latents, Eigen::VectorXd::Zero(nodes), times, rng);
    } catch (const NumericalError&) {
      continue;  // stable but with a stationary level beyond max_intensity
    }
    return out;
  }
  throw NumericalError("no stable static configuration after " + std::to_string(max_attempts) +
                       " attempts");
}

DynamicDataset simulate_dynamic_dataset(const LatentTrajectories& latents, Rng& rng,
                                        int max_attempts) {
  const Index n = latents.nodes();
  // Row bounds of the chain, -1 < beta_i - r_it and beta_i + r_it < 1, confine each beta_i to
  // an interval; rejecting a uniform draw coordinate-wise is a uniform draw on that interval.
  Eigen::VectorXd max_r = Eigen::VectorXd::Zero(n);
  const ModelParams zero = params_with(0.0, Eigen::VectorXd::Zero(n));
  for (Index s = 0; s < latents.times(); ++s)
    max_r = max_r.cwiseMax(row_sums_off_diagonal(interaction_matrix_at(zero, latents.slice(s))));
  if ((max_r.array() >= 1.0).any())
    throw DomainError("trajectories put an off-diagonal row sum at or above 1; no beta can satisfy "
                      "the stability chain");

  std::uniform_real_distribution<double> alpha_dist(-3.0, 3.0);
  std::uniform_real_distribution<double> beta_dist(-1.0, 1.0);
  DynamicDataset out;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    ModelParams p = params_with(alpha_dist(rng), Eigen::VectorXd(n));
    for (Index i = 0; i < n; ++i) {
      double b = beta_dist(rng);
      while (!(b > max_r(i) - 1.0 && b < 1.0 - max_r(i))) b = beta_dist(rng);
      p.beta(i) = b;
    }
    if (!check_stability(p, latents).satisfied) continue;
    out.params = p;
    out.latents = latents;
    out.attempts = attempt;
    try {
      out.panel = simulate_counts(p, latents, Eigen::VectorXd::Zero(n), latents.times(), rng);
    } catch (const NumericalError&) {
      continue;
    }
    return out;
  }
  throw NumericalError("no stable (alpha, beta) draw after " + std::to_string(max_attempts) +
                       " attempts");
}

}  // namespace dtslpm
