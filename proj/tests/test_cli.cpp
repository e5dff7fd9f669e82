#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dtslpm/cli.hpp"
#include "dtslpm/io.hpp"

using namespace dtslpm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.output_dir = dir;
  cfg.seed = 5;
  cfg.times = 60;
  cfg.hmc.n_iterations = 40;
  cfg.hmc.burn_in = 20;
  cfg.hmc.n_chains = 2;
  cfg.hmc.leapfrog_steps = 5;
  cfg.optimizer.lbfgs.max_iterations = 200;
  return cfg;
}

void run(RunConfig cfg, const std::string& command) {
  cfg.command = command;
  std::ostringstream log;
  run_subcommand(cfg, log);
}

std::string error_of(RunConfig cfg, const std::string& command) {
  try {
    run(cfg, command);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config JSON round trip and hash") {
  RunConfig cfg;
  cfg.model.mode = LatentMode::static_positions;
  cfg.model.scale_prior = ScalePrior::gamma;
  cfg.hmc.n_chains = 3;
  cfg.hmc.step_size = 0.01;
  cfg.optimizer.restarts = 2;
  cfg.design = "node-swap";
  cfg.export_draws = true;
  const RunConfig back = run_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.hmc.step_size.value() == 0.01);

  RunConfig moved = cfg;
  moved.output_dir = "/elsewhere";
  CHECK(config_hash(moved) == config_hash(cfg));
  moved.seed = 99;
  CHECK(config_hash(moved) != config_hash(cfg));

  const RunConfig defaults = run_config_from_json(nlohmann::json::object());
  CHECK(defaults.hmc.n_iterations == 2000);
  CHECK(defaults.model.mode == LatentMode::dynamic);
}

TEST_CASE("invalid configurations are rejected") {
  RunConfig cfg;
  cfg.command = "fit";
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.command = "simulate";
  cfg.design = "spiral";
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.design = "static";
  cfg.hmc.burn_in = 5000;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("missing upstream artifacts name the step to run") {
  TempDir dir("dtslpm_cli_missing");
  const RunConfig cfg = small_config(dir.path);
  CHECK(error_of(cfg, "fit-map").find("run `simulate` first") != std::string::npos);
  run(cfg, "simulate");
  CHECK(error_of(cfg, "summarize").find("run `fit-map` first") != std::string::npos);
  CHECK(error_of(cfg, "diagnose").find("run `fit-map` first") != std::string::npos);
  run(cfg, "fit-map");
  CHECK(error_of(cfg, "summarize").find("run `fit-hmc` first") != std::string::npos);

  RunConfig static_cfg = cfg;
  static_cfg.model.mode = LatentMode::static_positions;
  CHECK(error_of(static_cfg, "fit-hmc").find("different model") != std::string::npos);
}

TEST_CASE("dynamic pipeline writes every artifact") {
  TempDir dir("dtslpm_cli_pipeline");
  RunConfig cfg = small_config(dir.path);
  cfg.export_draws = true;
  for (const char* step : {"simulate", "fit-map", "fit-hmc", "summarize", "diagnose"}) run(cfg, step);
  for (const char* f : {"counts.csv", "truth.json", "latents_true.csv", "manifest.json", "map.json",
                        "map_latents.csv", "draws_chain0.jsonl", "draws_chain1.jsonl",
                        "hmc_manifest.json", "parameters.csv", "latent_summary.csv",
                        "interactions.csv", "interaction_matrices.csv", "risk_series.csv",
                        "aligned_latents.csv", "interaction_draws.csv", "risk_draws.csv",
                        "summary_manifest.json", "stability.json", "convergence.csv"})
    CHECK_MESSAGE(fs::exists(dir.path / f), f);

  const std::string hash = config_hash(cfg);
  for (const char* f : {"manifest.json", "map.json", "hmc_manifest.json", "summary_manifest.json",
                        "stability.json", "truth.json"}) {
    const auto j = read_json(dir.path / f);
    CHECK(j.at("config_hash") == hash);
    CHECK(j.at("seed") == 5);
  }
  const std::string risk = slurp(dir.path / "risk_series.csv");
  CHECK(std::count(risk.begin(), risk.end(), '\n') == 61);
  const std::string inter = slurp(dir.path / "interactions.csv");
  CHECK(std::count(inter.begin(), inter.end(), '\n') == 1 + 6 * 60);
  const std::string params = slurp(dir.path / "parameters.csv");
  CHECK(params.find("beta[s4]") != std::string::npos);
  CHECK(slurp(dir.path / "convergence.csv").find("log_posterior,") != std::string::npos);
}

TEST_CASE("reruns reproduce manifests byte for byte") {
  TempDir a("dtslpm_cli_rerun_a"), b("dtslpm_cli_rerun_b");
  for (const fs::path& p : {a.path, b.path}) {
    RunConfig cfg = small_config(p);
    cfg.model.mode = LatentMode::static_positions;
    cfg.design = "static";
    cfg.hmc.workers = p == a.path ? 1 : 2;
    for (const char* step : {"simulate", "fit-map", "fit-hmc", "summarize"}) run(cfg, step);
  }
  for (const char* f : {"manifest.json", "counts.csv", "map.json", "hmc_manifest.json",
                        "draws_chain0.jsonl", "draws_chain1.jsonl", "summary_manifest.json",
                        "parameters.csv", "risk_series.csv"})
    CHECK_MESSAGE(slurp(a.path / f) == slurp(b.path / f), f);
}

TEST_CASE("command line entry point") {
  TempDir dir("dtslpm_cli_main");
  const std::string out = dir.path.string();
  auto call = [](std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& s : args) argv.push_back(s.data());
    return cli_main(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(call({"dtslpm", "simulate", "--design", "static", "--nodes", "3", "--times", "40",
              "--seed", "4", "--output-dir", out}) == 0);
  CHECK(fs::exists(dir.path / "counts.csv"));
  CHECK(load_counts(dir.path / "counts.csv").nodes() == 3);
  CHECK(call({"dtslpm", "fit-map", "--mode", "static", "--output-dir", out}) == 0);
  CHECK(call({"dtslpm", "fit-hmc", "--mode", "static", "--chains", "2", "--iterations", "30",
              "--burn-in", "10", "--thin", "2", "--output-dir", out}) == 0);
  const auto manifest = read_json(dir.path / "hmc_manifest.json");
  CHECK(manifest.at("chains").size() == 2);
  CHECK(manifest.at("chains")[0].at("draws") == 10);
  CHECK(manifest.at("initialized_from_map") == true);

  CHECK(call({"dtslpm", "summarize", "--output-dir", out}) != 0);  // dynamic mode vs static draws
  CHECK(call({"dtslpm", "summarize", "--mode", "static", "--output-dir", out}) == 0);
  CHECK(call({"dtslpm", "frobnicate"}) != 0);
  CHECK(call({"dtslpm", "fit-map", "--mode", "sideways"}) != 0);

  nlohmann::json cfg = to_json(RunConfig{});
  cfg["model"]["mode"] = "static";
  cfg["hmc"]["n_chains"] = 1;
  cfg["hmc"]["n_iterations"] = 20;
  cfg["hmc"]["burn_in"] = 10;
  write_json(cfg, dir.path / "run.json");
  CHECK(call({"dtslpm", "fit-hmc", "--config", (dir.path / "run.json").string(), "--output-dir",
              out}) == 0);
  CHECK(read_json(dir.path / "hmc_manifest.json").at("chains").size() == 1);
}
