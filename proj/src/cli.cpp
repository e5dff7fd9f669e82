#include "dtslpm/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <utility>

#include <CLI11.hpp>

#include "dtslpm/io.hpp"
#include "dtslpm/postprocess.hpp"
#include "dtslpm/simulator.hpp"
#include "dtslpm/stability.hpp"

namespace dtslpm {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kMapFile = "map.json";
constexpr const char* kHmcManifest = "hmc_manifest.json";

bool is_design(const std::string& d) {
  return d == "static" || d == "prior" || d == "pairs-within-clusters" ||
         d == "single-node-migration" || d == "node-swap";
}

json hmc_json(const HmcConfig& c) {
  json j = to_json(c);
  j.erase("seed");
  return j;
}

HmcConfig hmc_from_json(const json& j, HmcConfig c) {
  c.n_iterations = j.value("n_iterations", c.n_iterations);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.n_chains = j.value("n_chains", c.n_chains);
  c.leapfrog_steps = j.value("leapfrog_steps", c.leapfrog_steps);
  c.target_accept = j.value("target_accept", c.target_accept);
  c.mass = j.value("mass", c.mass);
  c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
  if (j.contains("step_size")) {
    if (j["step_size"].is_number())
      c.step_size = j["step_size"].get<double>();
    else
      c.step_size.reset();
  }
  return c;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write");
  out.precision(12);
  return out;
}

json provenance(const RunConfig& cfg) {
  return {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}};
}

CountPanel load_panel(const RunConfig& cfg) {
  const fs::path path = cfg.counts_path();
  if (!fs::exists(path))
    throw InputError(path.string() +
                     " not found: run `simulate` first or pass --counts with a count CSV");
  return load_counts(path);
}

MapEstimate load_map(const RunConfig& cfg) {
  const fs::path path = cfg.output_dir / kMapFile;
  if (!fs::exists(path))
    throw InputError(path.string() + " not found: run `fit-map` first");
  return map_from_json(read_json(path).at("estimate"));
}

void check_spec(const ModelSpec& expected, const json& recorded, const std::string& artifact) {
  const ModelSpec got = spec_from_json(recorded);
  if (got.mode != expected.mode || got.latent_dim != expected.latent_dim ||
      got.scale_prior != expected.scale_prior)
    throw InputError(artifact + " was produced with a different model (mode, latent dimension or "
                                "prior); rerun the upstream step with this configuration");
}

PosteriorDraws load_draws(const RunConfig& cfg) {
  const fs::path manifest_path = cfg.output_dir / kHmcManifest;
  if (!fs::exists(manifest_path))
    throw InputError(manifest_path.string() + " not found: run `fit-hmc` first");
  const json manifest = read_json(manifest_path);
  check_spec(cfg.model, manifest.at("model"), manifest_path.string());
  PosteriorDraws out;
  out.spec = spec_from_json(manifest.at("model"));
  for (const auto& c : manifest.at("chains")) out.chains.push_back(chain_stats_from_json(c));
  for (const auto& w : manifest.value("warnings", json::array())) out.warnings.push_back(w);
  for (const auto& file : manifest.at("draw_files")) {
    const fs::path path = cfg.output_dir / file.get<std::string>();
    std::ifstream in(path);
    if (!in) throw InputError(path.string() + " not found: run `fit-hmc` again");
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.empty()) continue;
      try {
        out.draws.push_back(draw_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw InputError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  if (out.draws.empty()) throw InputError("no posterior draws found: run `fit-hmc` first");
  return out;
}

void write_interval_row(std::ostream& out, const Interval& v) {
  out << v.mean << ',' << v.lower << ',' << v.upper << '\n';
}

void run_simulate(const RunConfig& cfg, std::ostream& log) {
  Rng rng = make_rng(cfg.seed);
  ModelState truth;
  CountPanel panel;
  json extra = json::object();
  if (cfg.design == "static") {
    StaticDataset data = simulate_static_dataset(cfg.nodes, cfg.times, rng);
    truth = {data.params, data.latents};
    panel = data.panel;
    extra["assignment"] = data.clusters.assignment;
    extra["expansions"] = data.expansions;
    extra["attempts"] = data.attempts;
  } else {
    LatentTrajectories latents;
    if (cfg.design == "prior") {
      latents = sample_prior_trajectories(cfg.nodes, cfg.times, cfg.model.latent_dim, cfg.model.rho,
                                          cfg.model.sigma, rng);
    } else {
      ExperimentDesign design = ExperimentDesign::standard(experiment_from_string(cfg.design), cfg.times);
      latents = make_experiment_trajectories(design);
    }
    DynamicDataset data = simulate_dynamic_dataset(latents, rng);
    truth = {data.params, data.latents};
    panel = data.panel;
    extra["attempts"] = data.attempts;
  }
  truth.params.rho = cfg.model.rho;
  truth.params.sigma = cfg.model.sigma;

  fs::create_directories(cfg.output_dir);
  write_counts(panel, cfg.output_dir / "counts.csv");
  {
    auto out = open_out(cfg.output_dir / "latents_true.csv");
    write_latents_long(truth.latents, out);
  }
  json t = provenance(cfg);
  t["design"] = cfg.design;
  t["state"] = to_json(truth);
  t["stability"] = to_json(check_stability(truth.params, truth.latents));
  t.update(extra);
  write_json(t, cfg.output_dir / "truth.json");

  json manifest = provenance(cfg);
  manifest["command"] = "simulate";
  manifest["config"] = to_json(cfg);
  manifest["nodes"] = panel.nodes();
  manifest["times"] = panel.times();
  manifest["artifacts"] = {"counts.csv", "truth.json", "latents_true.csv"};
  write_json(manifest, cfg.output_dir / "manifest.json");
  log << "simulated " << panel.nodes() << " x " << panel.times() << " counts (" << cfg.design
      << ") into " << cfg.output_dir.string() << '\n';
}

void run_fit_map(const RunConfig& cfg, std::ostream& log) {
  const CountPanel panel = load_panel(cfg);
  OptimizerConfig opt = cfg.optimizer;
  opt.seed = cfg.seed;
  const MapEstimate map = map_estimate(panel, cfg.model, std::nullopt, opt);

  fs::create_directories(cfg.output_dir);
  json j = provenance(cfg);
  j["command"] = "fit-map";
  j["config"] = to_json(cfg);
  j["model"] = to_json(cfg.model);
  j["estimate"] = to_json(map);
  write_json(j, cfg.output_dir / kMapFile);
  auto out = open_out(cfg.output_dir / "map_latents.csv");
  write_latents_long(map.state.latents, out);
  log << "MAP log posterior " << map.log_posterior << " after " << map.iterations
      << " iterations (" << (map.converged ? "converged" : "not converged: " + map.message)
      << ")\n";
}

void run_fit_hmc(const RunConfig& cfg, std::ostream& log) {
  const CountPanel panel = load_panel(cfg);
  HmcConfig hmc = cfg.hmc;
  hmc.seed = cfg.seed;
  if (const char* env = std::getenv("DTSLPM_WORKERS")) {
    const int w = std::atoi(env);
    if (w < 1) throw InputError("DTSLPM_WORKERS must be a positive integer");
    hmc.workers = w;
  }

  std::optional<ModelState> init;
  const fs::path map_path = cfg.output_dir / kMapFile;
  if (cfg.init_from_map && fs::exists(map_path)) {
    const json j = read_json(map_path);
    check_spec(cfg.model, j.at("model"), map_path.string());
    init = map_from_json(j.at("estimate")).state;
    if (cfg.model.samples_sigma())
      log << "note: the joint mode under Gamma hyperpriors pushes sigma toward 0; "
             "--no-map-init usually samples better\n";
  }

  fs::create_directories(cfg.output_dir);
  std::vector<std::ofstream> files;
  json names = json::array();
  for (int c = 0; c < hmc.n_chains; ++c) {
    const std::string name = "draws_chain" + std::to_string(c) + ".jsonl";
    files.push_back(open_out(cfg.output_dir / name));
    names.push_back(name);
  }
  // Each chain writes only its own file, so concurrent chains never share a stream.
  const PosteriorSink sink = [&files](const PosteriorDraw& d) {
    files[static_cast<std::size_t>(d.chain)] << to_json(d).dump() << '\n';
  };
  const PosteriorDraws draws = hmc_sample(panel, cfg.model, hmc, init, sink);
  for (auto& f : files) f.close();

  json manifest = provenance(cfg);
  manifest["command"] = "fit-hmc";
  manifest["config"] = to_json(cfg);
  manifest["model"] = to_json(cfg.model);
  manifest["hmc"] = hmc_json(hmc);
  manifest["initialized_from_map"] = init.has_value();
  json chains = json::array();
  for (const auto& c : draws.chains) chains.push_back(to_json(c));
  manifest["chains"] = chains;
  manifest["warnings"] = draws.warnings;
  manifest["draw_files"] = names;
  write_json(manifest, cfg.output_dir / kHmcManifest);
  for (const auto& w : draws.warnings) log << "warning: " << w << '\n';
  log << "wrote " << draws.size() << " draws from " << draws.chains.size() << " chains\n";
}

void run_summarize(const RunConfig& cfg, std::ostream& log) {
  const CountPanel panel = load_panel(cfg);
  const MapEstimate map = load_map(cfg);
  const PosteriorDraws draws = load_draws(cfg);
  const AlignedDraws aligned = align_all(draws, map);
  const PosteriorSummary s = summarize(aligned);
  const Index n = panel.nodes();
  const Index slices = s.latent_mean.times();
  auto time_label = [&](Index t) {
    return slices == 1 ? std::string("all") : panel.time_labels()[static_cast<std::size_t>(t)];
  };

  {
    auto out = open_out(cfg.output_dir / "parameters.csv");
    out << "parameter,mean,lower,upper\n";
    out << "alpha,";
    write_interval_row(out, s.alpha);
    for (Index i = 0; i < n; ++i) {
      out << "beta[" << panel.series_labels()[static_cast<std::size_t>(i)] << "],";
      write_interval_row(out, s.beta[static_cast<std::size_t>(i)]);
    }
    if (s.rho) {
      out << "rho,";
      write_interval_row(out, *s.rho);
    }
    if (s.sigma) {
      out << "sigma,";
      write_interval_row(out, *s.sigma);
    }
  }
  {
    auto out = open_out(cfg.output_dir / "latent_summary.csv");
    out << "t,i,k,mean,lower,upper\n";
    for (Index t = 0; t < slices; ++t)
      for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < s.latent_mean.dim(); ++k)
          out << t + 1 << ',' << i + 1 << ',' << k + 1 << ',' << s.latent_mean(i, t, k) << ','
              << s.latent_lower(i, t, k) << ',' << s.latent_upper(i, t, k) << '\n';
  }
  {
    auto out = open_out(cfg.output_dir / "interactions.csv");
    out << "t,time,i,j,series_i,series_j,mean,lower,upper\n";
    for (const auto& p : s.pairwise)
      for (Index t = 0; t < slices; ++t) {
        out << t + 1 << ',' << time_label(t) << ',' << p.i + 1 << ',' << p.j + 1 << ','
            << panel.series_labels()[static_cast<std::size_t>(p.i)] << ','
            << panel.series_labels()[static_cast<std::size_t>(p.j)] << ',';
        write_interval_row(out, p.values[static_cast<std::size_t>(t)]);
      }
  }
  {
    auto out = open_out(cfg.output_dir / "interaction_matrices.csv");
    out << "t,time,i,j,value\n";
    for (Index t = 0; t < slices; ++t)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          out << t + 1 << ',' << time_label(t) << ',' << i + 1 << ',' << j + 1 << ','
              << s.mean_interaction[static_cast<std::size_t>(t)](i, j) << '\n';
  }
  {
    auto out = open_out(cfg.output_dir / "risk_series.csv");
    out << "t,time,mean,lower,upper\n";
    for (Index t = 0; t < slices; ++t) {
      out << t + 1 << ',' << time_label(t) << ',';
      write_interval_row(out, s.risk.summary[static_cast<std::size_t>(t)]);
    }
  }

  json artifacts = {"parameters.csv", "latent_summary.csv", "interactions.csv",
                    "interaction_matrices.csv", "risk_series.csv"};
  if (cfg.export_draws) {
    auto lat = open_out(cfg.output_dir / "aligned_latents.csv");
    auto inter = open_out(cfg.output_dir / "interaction_draws.csv");
    auto risk = open_out(cfg.output_dir / "risk_draws.csv");
    lat << "draw,chain,iteration,t,i,k,value\n";
    inter << "draw,chain,iteration,t,i,j,value\n";
    risk << "draw,chain,iteration,t,value\n";
    for (std::size_t m = 0; m < aligned.draws.draws.size(); ++m) {
      const PosteriorDraw& d = aligned.draws.draws[m];
      const std::string prefix = std::to_string(m + 1) + ',' + std::to_string(d.chain) + ',' +
                                 std::to_string(d.iteration) + ',';
      for (Index t = 0; t < slices; ++t) {
        for (Index i = 0; i < n; ++i)
          for (Index k = 0; k < d.state.latents.dim(); ++k)
            lat << prefix << t + 1 << ',' << i + 1 << ',' << k + 1 << ','
                << d.state.latents(i, t, k) << '\n';
        const Eigen::MatrixXd g = interaction_matrix_at(d.state.params, d.state.latents.slice(t));
        for (Index i = 0; i < n; ++i)
          for (Index j = i + 1; j < n; ++j)
            inter << prefix << t + 1 << ',' << i + 1 << ',' << j + 1 << ',' << g(i, j) << '\n';
        risk << prefix << t + 1 << ',' << s.risk.draws(static_cast<Index>(m), t) << '\n';
      }
    }
    artifacts.push_back("aligned_latents.csv");
    artifacts.push_back("interaction_draws.csv");
    artifacts.push_back("risk_draws.csv");
  }

  json manifest = provenance(cfg);
  manifest["command"] = "summarize";
  manifest["config"] = to_json(cfg);
  manifest["draws"] = draws.size();
  manifest["degenerate_alignments"] = aligned.degenerate;
  manifest["artifacts"] = artifacts;
  write_json(manifest, cfg.output_dir / "summary_manifest.json");
  log << "summarized " << draws.size() << " aligned draws\n";
}

void run_diagnose(const RunConfig& cfg, std::ostream& log) {
  const MapEstimate map = load_map(cfg);
  const TrajectoryStability stab = check_stability(map.state.params, map.state.latents);
  json j = provenance(cfg);
  j["command"] = "diagnose";
  j["source"] = "MAP estimate";
  j["stability"] = to_json(stab);
  write_json(j, cfg.output_dir / "stability.json");
  log << "MAP stability chain " << (stab.satisfied ? "holds" : "fails") << " (max |eigenvalue| "
      << stab.worst_max_abs_eigenvalue << ")\n";

  if (!fs::exists(cfg.output_dir / kHmcManifest)) {
    log << "no posterior draws; skipping convergence diagnostics\n";
    return;
  }
  const PosteriorDraws draws = load_draws(cfg);
  const std::size_t n_chains = draws.chains.size();
  std::vector<std::pair<std::string, std::function<double(const PosteriorDraw&)>>> scalars;
  scalars.emplace_back("alpha", [](const PosteriorDraw& d) { return d.state.params.alpha; });
  for (Index i = 0; i < map.state.params.beta.size(); ++i)
    scalars.emplace_back("beta[" + std::to_string(i + 1) + "]",
                         [i](const PosteriorDraw& d) { return d.state.params.beta(i); });
  if (cfg.model.samples_rho())
    scalars.emplace_back("rho", [](const PosteriorDraw& d) { return d.state.params.rho; });
  if (cfg.model.samples_sigma())
    scalars.emplace_back("sigma", [](const PosteriorDraw& d) { return d.state.params.sigma; });
  scalars.emplace_back("log_posterior", [](const PosteriorDraw& d) { return d.log_posterior; });

  auto out = open_out(cfg.output_dir / "convergence.csv");
  out << "parameter,rhat,ess\n";
  for (const auto& [name, get] : scalars) {
    std::vector<std::vector<double>> chains(n_chains);
    for (const auto& d : draws.draws) chains[static_cast<std::size_t>(d.chain)].push_back(get(d));
    out << name << ',';
    const auto r = rhat(chains);
    if (r) out << *r;
    else out << "NA";
    out << ',';
    double total = 0.0;
    bool any = false;
    for (const auto& c : chains)
      if (const auto e = ess(c)) {
        total += *e;
        any = true;
      }
    if (any) out << total;
    else out << "NA";
    out << '\n';
  }
  log << "wrote convergence diagnostics for " << scalars.size() << " quantities\n";
}

}  // namespace

void RunConfig::validate() const {
  if (command != "simulate" && command != "fit-map" && command != "fit-hmc" &&
      command != "summarize" && command != "diagnose")
    throw InputError("unknown subcommand '" + command + "'");
  if (!is_design(design)) throw InputError("unknown design '" + design + "'");
  if (model.latent_dim < 1) throw InputError("latent dimension must be at least 1");
  if (command == "simulate") {
    if (nodes < 2) throw InputError("simulation needs at least two nodes");
    if (times < 2) throw InputError("simulation needs at least two time points");
  }
  try {
    hmc.validate();
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

fs::path RunConfig::counts_path() const {
  return counts.empty() ? output_dir / "counts.csv" : fs::path(counts);
}

json to_json(const RunConfig& cfg) {
  return {{"model", to_json(cfg.model)},
          {"seed", cfg.seed},
          {"hmc", hmc_json(cfg.hmc)},
          {"optimizer",
           {{"max_iterations", cfg.optimizer.lbfgs.max_iterations},
            {"gradient_tolerance", cfg.optimizer.lbfgs.gradient_tolerance},
            {"memory", cfg.optimizer.lbfgs.memory},
            {"restarts", cfg.optimizer.restarts}}},
          {"design", cfg.design},
          {"nodes", cfg.nodes},
          {"times", cfg.times},
          {"counts", cfg.counts},
          {"init_from_map", cfg.init_from_map},
          {"export_draws", cfg.export_draws}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("model")) cfg.model = spec_from_json(j["model"]);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("hmc")) cfg.hmc = hmc_from_json(j["hmc"], cfg.hmc);
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    cfg.optimizer.lbfgs.max_iterations = o.value("max_iterations", cfg.optimizer.lbfgs.max_iterations);
    cfg.optimizer.lbfgs.gradient_tolerance =
        o.value("gradient_tolerance", cfg.optimizer.lbfgs.gradient_tolerance);
    cfg.optimizer.lbfgs.memory = o.value("memory", cfg.optimizer.lbfgs.memory);
    cfg.optimizer.restarts = o.value("restarts", cfg.optimizer.restarts);
  }
  cfg.design = j.value("design", cfg.design);
  cfg.nodes = j.value("nodes", cfg.nodes);
  cfg.times = j.value("times", cfg.times);
  cfg.counts = j.value("counts", cfg.counts);
  cfg.init_from_map = j.value("init_from_map", cfg.init_from_map);
  cfg.export_draws = j.value("export_draws", cfg.export_draws);
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  return cfg;
}

std::string config_hash(const RunConfig& cfg) { return config_hash(to_json(cfg)); }

void run_subcommand(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.command == "simulate") run_simulate(cfg, log);
  else if (cfg.command == "fit-map") run_fit_map(cfg, log);
  else if (cfg.command == "fit-hmc") run_fit_hmc(cfg, log);
  else if (cfg.command == "summarize") run_summarize(cfg, log);
  else run_diagnose(cfg, log);
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Latent position Poisson autoregression for panels of count series"};
  app.require_subcommand(1);

  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains, iterations, burn_in, thin, leapfrog, latent_dim;
  std::optional<std::string> mode, prior, output_dir, counts, design;
  std::optional<Index> nodes, times;
  bool export_draws = false, no_map_init = false;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "simulate a count panel and its true latent trajectories"},
      {"fit-map", "maximum a posteriori estimate by L-BFGS"},
      {"fit-hmc", "posterior draws by Hamiltonian Monte Carlo"},
      {"summarize", "align draws and write parameter, interaction and risk summaries"},
      {"diagnose", "stability of the MAP and convergence of the draws"},
  };
  for (const auto& [name, about] : commands) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--chains", chains, "number of HMC chains");
    sub->add_option("--iterations", iterations, "HMC iterations per chain, burn-in included");
    sub->add_option("--burn-in", burn_in, "HMC burn-in iterations");
    sub->add_option("--thin", thin, "keep every n-th post burn-in draw");
    sub->add_option("--leapfrog-steps", leapfrog, "leapfrog steps per HMC iteration");
    sub->add_option("--mode", mode, "latent positions")->check(CLI::IsMember({"static", "dynamic"}));
    sub->add_option("--prior", prior, "rho/sigma prior")->check(CLI::IsMember({"fixed", "gamma"}));
    sub->add_option("--latent-dim", latent_dim, "latent space dimension");
    sub->add_option("--output-dir", output_dir, "artifact directory");
    sub->add_option("--counts", counts, "count CSV (default <output-dir>/counts.csv)");
    sub->add_option("--design", design, "simulation design")
        ->check(CLI::IsMember({"static", "prior", "pairs-within-clusters", "single-node-migration",
                               "node-swap"}));
    sub->add_option("--nodes", nodes, "number of simulated series");
    sub->add_option("--times", times, "number of simulated time points");
    sub->add_flag("--export-draws", export_draws, "also export per-draw CSVs from summarize");
    sub->add_flag("--no-map-init", no_map_init, "start HMC chains from random initializations");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = config_file.empty() ? RunConfig{} : run_config_from_json(read_json(config_file));
    cfg.command = app.get_subcommands().front()->get_name();
    if (seed) cfg.seed = *seed;
    if (chains) cfg.hmc.n_chains = *chains;
    if (iterations) cfg.hmc.n_iterations = *iterations;
    if (burn_in) cfg.hmc.burn_in = *burn_in;
    if (thin) cfg.hmc.thin = *thin;
    if (leapfrog) cfg.hmc.leapfrog_steps = *leapfrog;
    if (mode) cfg.model.mode = *mode == "static" ? LatentMode::static_positions : LatentMode::dynamic;
    if (prior) cfg.model.scale_prior = *prior == "gamma" ? ScalePrior::gamma : ScalePrior::fixed;
    if (latent_dim) cfg.model.latent_dim = *latent_dim;
    if (output_dir) cfg.output_dir = *output_dir;
    if (counts) cfg.counts = *counts;
    if (design) cfg.design = *design;
    if (nodes) cfg.nodes = *nodes;
    if (times) cfg.times = *times;
    if (export_draws) cfg.export_draws = true;
    if (no_map_init) cfg.init_from_map = false;
    run_subcommand(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dtslpm
