#include <doctest.h>

#include <cmath>
#include <set>

#include "dtslpm/model.hpp"
#include "dtslpm/simulator.hpp"
#include "dtslpm/stability.hpp"

using namespace dtslpm;

TEST_CASE("streams are reproducible and distinct") {
  Rng a = make_rng(5, 0), b = make_rng(5, 0), c = make_rng(5, 1), d = make_rng(6, 0);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

TEST_CASE("static parameter draws stay in their ranges") {
  Rng rng = make_rng(1);
  double lo = 0, hi = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    const StaticParams p = sample_static_params(5, rng);
    CHECK(std::abs(p.alpha) <= 3.0);
    CHECK(p.beta.cwiseAbs().maxCoeff() <= 1.0);
    lo = std::min(lo, p.alpha);
    hi = std::max(hi, p.alpha);
  }
  CHECK(lo < -2.9);
  CHECK(hi > 2.9);
}

TEST_CASE("standard cluster layouts") {
  const ClusterConfig five = ClusterConfig::standard(5);
  CHECK(five.centers.size() == 2);
  CHECK(five.assignment == std::vector<Index>{0, 0, 0, 1, 1});
  const ClusterConfig twelve = ClusterConfig::standard(12);
  CHECK(twelve.centers.size() == 3);
  CHECK(std::count(twelve.assignment.begin(), twelve.assignment.end(), 2) == 4);
}

TEST_CASE("clustered positions scatter around their centers") {
  ClusterConfig cfg = ClusterConfig::standard(2);
  cfg.assignment.assign(4000, 1);
  Rng rng = make_rng(2);
  const RowMatrix z = sample_clustered_latents(cfg, rng);
  const Eigen::RowVectorXd mean = z.colwise().mean();
  CHECK(mean(0) == doctest::Approx(3.0).epsilon(0.01));
  CHECK(mean(1) == doctest::Approx(3.0).epsilon(0.01));
  const double var = (z.rowwise() - mean).array().square().colwise().sum()(0) / 3999.0;
  CHECK(var == doctest::Approx(0.1).epsilon(0.1));

  cfg.covariance_diag = 0.0;
  const RowMatrix exact = sample_clustered_latents(cfg, rng);
  CHECK(exact(17, 0) == 3.0);
  cfg.assignment[0] = 5;
  CHECK_THROWS_AS(sample_clustered_latents(cfg, rng), DomainError);
}

TEST_CASE("expansion multiplies positions until the chain holds") {
  RowMatrix z(3, 2);
  z << 0, 0, 0.1, 0, 3, 3;
  const Eigen::VectorXd beta = Eigen::Vector3d(0.2, -0.1, 0.3);
  const ClusterConfig cfg = ClusterConfig::standard(3);
  const ExpansionResult r = expand_until_stable(z, beta, cfg);
  CHECK(r.expansions > 0);
  CHECK(r.positions.isApprox(z * std::pow(1.05, r.expansions)));
  ModelParams p;
  p.beta = beta;
  CHECK(check_stability(interaction_matrix_at(p, ConstSliceMap(r.positions.data(), 3, 2))).satisfied);
  const RowMatrix one_less = z * std::pow(1.05, r.expansions - 1);
  CHECK_FALSE(check_stability(interaction_matrix_at(p, ConstSliceMap(one_less.data(), 3, 2))).satisfied);
}

TEST_CASE("coincident nodes cannot be separated by expansion") {
  RowMatrix z(2, 2);
  z << 1, 1, 1, 1;
  ClusterConfig cfg = ClusterConfig::standard(2);
  cfg.max_expansions = 50;
  CHECK_THROWS_AS(expand_until_stable(z, Eigen::Vector2d(0.1, 0.2), cfg), NumericalError);
}

TEST_CASE("Poisson means of an independent series") {
  ModelParams p;
  p.alpha = std::log(4.0);
  p.beta = Eigen::VectorXd::Zero(1);
  Rng rng = make_rng(3);
  const CountPanel y = simulate_counts(p, LatentTrajectories(1, 1, 2), Eigen::VectorXd::Zero(1), 20000, rng);
  const double mean = y.counts().cast<double>().mean();
  CHECK(std::abs(mean - 4.0) < 4.0 * std::sqrt(4.0 / 20000.0));
}

TEST_CASE("conditional mean follows the log-linear recursion") {
  // Two (nearly) coincident nodes with beta = 0: log lambda_1t = alpha + w log(y_2,t-1 + 1).
  ModelParams p;
  p.alpha = -0.5;
  p.beta = Eigen::Vector2d(0.0, 0.0);
  Rng rng = make_rng(4);
  const SimulationOptions opts{false, 1e15, std::nullopt};
  double sum_ratio = 0.0;
  int count = 0;
  LatentTrajectories z(2, 1, 2);
  z(1, 0, 0) = 1e-9;
  // Repeated one-step draws from a fixed start: y_11 ~ Pois(e^-0.5 * 4^w), w = weight at ~0.
  const double lambda = std::exp(-0.5 + interaction_weight(1e-9) * std::log(4.0));
  for (int rep = 0; rep < 20000; ++rep) {
    const CountPanel y = simulate_counts(p, z, Eigen::Vector2d(3.0, 3.0), 2, rng, opts);
    sum_ratio += static_cast<double>(y(0, 0));
    ++count;
  }
  CHECK(std::abs(sum_ratio / count - lambda) < 4.0 * std::sqrt(lambda / count));
}

TEST_CASE("simulation checks shapes and overflow") {
  ModelParams p;
  p.alpha = 1.0;
  p.beta = Eigen::VectorXd::Constant(1, 1.5);
  Rng rng = make_rng(5);
  const LatentTrajectories z(1, 1, 2);
  CHECK_THROWS_AS(simulate_counts(p, z, Eigen::VectorXd::Zero(2), 10, rng), ShapeError);
  CHECK_THROWS_AS(simulate_counts(p, LatentTrajectories(1, 7, 2), Eigen::VectorXd::Zero(1), 10, rng),
                  ShapeError);
  CHECK_THROWS_WITH_AS(simulate_counts(p, z, Eigen::VectorXd::Zero(1), 5000, rng),
                       doctest::Contains("intensity overflow at time index"), NumericalError);
  SimulationOptions capped;
  capped.log_intensity_cap = 20.0;
  CHECK_NOTHROW(simulate_counts(p, z, Eigen::VectorXd::Zero(1), 5000, rng, capped));
  SimulationOptions strict;
  strict.require_stability = true;
  CHECK_THROWS_AS(simulate_counts(p, z, Eigen::VectorXd::Zero(1), 10, rng, strict), DomainError);
}

TEST_CASE("static datasets satisfy the stability chain") {
  Rng rng = make_rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const StaticDataset d = simulate_static_dataset(5, 50, rng);
    CHECK(d.latents.is_static());
    CHECK(d.panel.nodes() == 5);
    CHECK(d.panel.times() == 50);
    CHECK(check_stability(d.params, d.latents).satisfied);
    CHECK(d.attempts >= 1);
  }
}

TEST_CASE("prior trajectories have the requested scales") {
  Rng rng = make_rng(7);
  const LatentTrajectories z = sample_prior_trajectories(200, 50, 2, 2.0, 0.1, rng);
  double first = 0.0, steps = 0.0;
  for (Index i = 0; i < 200; ++i)
    for (Index k = 0; k < 2; ++k) {
      first += z(i, 0, k) * z(i, 0, k);
      for (Index t = 1; t < 50; ++t) steps += std::pow(z(i, t, k) - z(i, t - 1, k), 2);
    }
  CHECK(std::sqrt(first / 400.0) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::sqrt(steps / (400.0 * 49.0)) == doctest::Approx(0.1).epsilon(0.03));
  const LatentTrajectories frozen = sample_prior_trajectories(3, 4, 2, 1.0, 0.0, rng);
  CHECK(frozen(2, 3, 1) == frozen(2, 0, 1));
  CHECK_THROWS_AS(sample_prior_trajectories(3, 4, 2, -1.0, 0.1, rng), DomainError);
}

TEST_CASE("experiment designs") {
  for (auto id : {ExperimentId::pairs_within_clusters, ExperimentId::single_node_migration,
                  ExperimentId::node_swap}) {
    CHECK(experiment_from_string(to_string(id)) == id);
    const ExperimentDesign design = ExperimentDesign::standard(id);
    const LatentTrajectories z = make_experiment_trajectories(design);
    CHECK(z.nodes() == 4);
    CHECK(z.times() == 200);
    for (Index t = 0; t < 200; ++t)
      for (Index i = 0; i < 4; ++i)
        for (Index j = i + 1; j < 4; ++j) CHECK(pairwise_distance(z.position(i, t), z.position(j, t)) > 0.3);

    Rng rng = make_rng(8);
    const DynamicDataset d = simulate_dynamic_dataset(z, rng);
    CHECK(check_stability(d.params, d.latents).satisfied);
    CHECK(d.panel.times() == 200);
  }
  CHECK_THROWS_AS(experiment_from_string("orbit"), DomainError);

  ExperimentDesign tight = ExperimentDesign::standard(ExperimentId::single_node_migration, 200);
  tight.max_step = 0.01;
  CHECK_THROWS_AS(make_experiment_trajectories(tight), DomainError);
}

TEST_CASE("migration design moves node 1 between clusters") {
  const LatentTrajectories z =
      make_experiment_trajectories(ExperimentDesign::standard(ExperimentId::single_node_migration));
  CHECK(pairwise_distance(z.position(0, 0), z.position(1, 0)) < 1.5);
  CHECK(pairwise_distance(z.position(0, 0), z.position(2, 0)) > 3.0);
  CHECK(pairwise_distance(z.position(0, 199), z.position(1, 199)) > 3.0);
  CHECK(pairwise_distance(z.position(0, 199), z.position(2, 199)) < 1.6);
}

TEST_CASE("swap design exchanges nodes 1 and 4") {
  const LatentTrajectories z =
      make_experiment_trajectories(ExperimentDesign::standard(ExperimentId::node_swap));
  CHECK(pairwise_distance(z.position(0, 0), z.position(3, 199)) < 1e-12);
  CHECK(pairwise_distance(z.position(3, 0), z.position(0, 199)) < 1e-12);
}

TEST_CASE("infeasible trajectories are reported") {
  LatentTrajectories z(3, 2, 2);  // all nodes coincide: row sums of 2
  Rng rng = make_rng(9);
  CHECK_THROWS_AS(simulate_dynamic_dataset(z, rng), DomainError);
}
