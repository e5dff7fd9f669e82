#include "dtslpm/hmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "dtslpm/simulator.hpp"
#include "dtslpm/types.hpp"

namespace dtslpm {
namespace {

double kinetic(const Eigen::VectorXd& p, double mass) { return 0.5 * p.squaredNorm() / mass; }

double hamiltonian(const PhasePoint& z, double mass) {
  return -z.log_density + kinetic(z.momentum, mass);
}

bool finite_point(const PhasePoint& z) {
  return std::isfinite(z.log_density) && z.gradient.allFinite();
}

// Step-size adaptation toward a target acceptance probability (Hoffman & Gelman, 2014).
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target)
      : mu_(std::log(10.0 * initial_step)), target_(target), log_step_(std::log(initial_step)) {}

  double update(double accept_prob) {
    ++count_;
    const double m = static_cast<double>(count_);
    h_bar_ = (1.0 - 1.0 / (m + kT0)) * h_bar_ + (target_ - accept_prob) / (m + kT0);
    log_step_ = mu_ - std::sqrt(m) / kGamma * h_bar_;
    const double weight = std::pow(m, -kKappa);
    log_step_bar_ = weight * log_step_ + (1.0 - weight) * log_step_bar_;
    return std::exp(log_step_);
  }

  double final_step() const { return std::exp(count_ > 0 ? log_step_bar_ : log_step_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double mu_;
  double target_;
  double log_step_;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  int count_ = 0;
};

Eigen::VectorXd draw_momentum(Index dim, double mass, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(mass));
  Eigen::VectorXd p(dim);
  for (Index k = 0; k < dim; ++k) p(k) = normal(rng);
  return p;
}

// Doubles or halves a trial step until a single leapfrog step crosses acceptance 1/2.
double initial_step_size(const PhasePoint& start, const LogDensityFn& f, double mass, Rng& rng) {
  double step = 0.1;
  PhasePoint z = start;
  z.momentum = draw_momentum(start.position.size(), mass, rng);
  const double h0 = hamiltonian(z, mass);
  auto log_ratio = [&](double eps) {
    PhasePoint next = leapfrog(z, eps, 1, f, mass);
    if (next.divergent) return -HUGE_VAL;
    const double d = h0 - hamiltonian(next, mass);
    return std::isfinite(d) ? d : -HUGE_VAL;
  };
  const double dir = log_ratio(step) > std::log(0.5) ? 1.0 : -1.0;
  for (int i = 0; i < 60; ++i) {
    const double r = log_ratio(step);
    if (dir * r <= dir * std::log(0.5)) break;
    step *= std::pow(2.0, dir);
  }
  return std::clamp(step, 1e-8, 10.0);
}

struct ChainResult {
  std::vector<RawDraw> draws;
  ChainStats stats;
};

ChainResult run_chain(int chain, const LogDensityFn& f, const Eigen::VectorXd& init,
                      const HmcConfig& cfg, const DrawSink& sink) {
  Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(chain));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  PhasePoint current = make_phase_point(init, Eigen::VectorXd::Zero(init.size()), f);
  if (!finite_point(current))
    throw NumericalError("log density is not finite at the initial point of chain " +
                         std::to_string(chain));

  double step = cfg.step_size ? *cfg.step_size : initial_step_size(current, f, cfg.mass, rng);
  std::optional<DualAveraging> adapt;
  if (!cfg.step_size) adapt.emplace(step, cfg.target_accept);

  ChainResult out;
  out.stats.chain = chain;
  double accept_sum = 0.0;
  int sampled = 0;

  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    const bool warmup = iter < cfg.burn_in;
    if (!warmup && iter == cfg.burn_in && adapt) step = adapt->final_step();

    current.momentum = draw_momentum(init.size(), cfg.mass, rng);
    const double h0 = hamiltonian(current, cfg.mass);
    PhasePoint proposal = leapfrog(current, step, cfg.leapfrog_steps, f, cfg.mass);
    const double delta = proposal.divergent ? HUGE_VAL : hamiltonian(proposal, cfg.mass) - h0;
    const bool divergent = proposal.divergent || !std::isfinite(delta) ||
                           delta > cfg.divergence_threshold;
    const double accept_prob = divergent ? 0.0 : std::min(1.0, std::exp(-delta));
    if (!divergent && uniform(rng) < accept_prob) current = std::move(proposal);

    if (warmup) {
      if (divergent) ++out.stats.burn_in_divergences;
      if (adapt) step = adapt->update(accept_prob);
      continue;
    }
    if (divergent) ++out.stats.divergences;
    accept_sum += accept_prob;
    ++sampled;
    if ((iter - cfg.burn_in + 1) % cfg.thin != 0) continue;
    RawDraw d{chain, iter, current.log_density, current.position};
    if (sink) sink(d);
    out.draws.push_back(std::move(d));
  }
  out.stats.acceptance_rate = sampled > 0 ? accept_sum / sampled : 0.0;
  out.stats.step_size = step;
  out.stats.draws = static_cast<int>(out.draws.size());
  return out;
}

}  // namespace

PhasePoint make_phase_point(Eigen::VectorXd position, Eigen::VectorXd momentum,
                            const LogDensityFn& log_density) {
  PhasePoint z;
  z.position = std::move(position);
  z.momentum = std::move(momentum);
  z.gradient.resize(z.position.size());
  z.log_density = log_density(z.position, z.gradient);
  z.divergent = !finite_point(z);
  return z;
}

PhasePoint leapfrog(PhasePoint z, double step_size, int n_steps, const LogDensityFn& log_density,
                    double mass) {
  if (z.divergent || !finite_point(z)) {
    z.divergent = true;
    return z;
  }
  for (int s = 0; s < n_steps; ++s) {
    z.momentum += 0.5 * step_size * z.gradient;
    z.position += (step_size / mass) * z.momentum;
    z.log_density = log_density(z.position, z.gradient);
    if (!finite_point(z)) {
      z.divergent = true;
      return z;
    }
    z.momentum += 0.5 * step_size * z.gradient;
  }
  return z;
}

void HmcConfig::validate() const {
  if (n_iterations <= 0 || burn_in < 0 || thin < 1 || n_chains < 1 || leapfrog_steps < 1)
    throw DomainError("HMC iteration counts must be positive");
  if (burn_in >= n_iterations) throw DomainError("burn-in must be shorter than the run");
  if (step_size && !(*step_size > 0.0)) throw DomainError("step size must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw DomainError("target acceptance must lie in (0, 1)");
  if (!(mass > 0.0)) throw DomainError("mass must be positive");
}

HmcRun hmc_run(const LogDensityFn& log_density, const std::vector<Eigen::VectorXd>& inits,
               const HmcConfig& cfg, const DrawSink& sink) {
  cfg.validate();
  const int chains = static_cast<int>(inits.size());
  if (chains < 1) throw DomainError("at least one chain initialization is required");

  std::vector<ChainResult> results(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < chains; c = next++) {
      try {
        results[static_cast<std::size_t>(c)] =
            run_chain(c, log_density, inits[static_cast<std::size_t>(c)], cfg, sink);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(cfg.workers, 1, chains);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  HmcRun run;
  for (auto& r : results) {
    const double rate = cfg.n_iterations > cfg.burn_in
                            ? static_cast<double>(r.stats.divergences) /
                                  static_cast<double>(cfg.n_iterations - cfg.burn_in)
                            : 0.0;
    if (rate > cfg.max_divergence_rate)
      run.warnings.push_back("chain " + std::to_string(r.stats.chain) + ": " +
                             std::to_string(r.stats.divergences) +
                             " divergent transitions after burn-in");
    run.chains.push_back(r.stats);
    std::move(r.draws.begin(), r.draws.end(), std::back_inserter(run.draws));
  }
  return run;
}

}  // namespace dtslpm
