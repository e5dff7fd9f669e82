#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "dtslpm/hmc.hpp"
#include "dtslpm/inference.hpp"
#include "dtslpm/model.hpp"

namespace dtslpm {

/// Everything a subcommand needs. Serialized as one JSON document; output_dir is excluded from
/// the hash so that identical runs in different directories share it.
struct RunConfig {
  std::string command;
  ModelSpec model;
  std::uint64_t seed = 1;
  HmcConfig hmc;
  OptimizerConfig optimizer;
  /// simulate: static | prior | pairs-within-clusters | single-node-migration | node-swap
  std::string design = "pairs-within-clusters";
  Index nodes = 4;
  Index times = 200;
  std::string counts;  // empty: <output_dir>/counts.csv
  std::filesystem::path output_dir = ".";
  bool init_from_map = true;
  bool export_draws = false;

  void validate() const;
  std::filesystem::path counts_path() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
std::string config_hash(const RunConfig& cfg);

/// Runs one subcommand and writes its artifacts under cfg.output_dir. Progress goes to `log`.
void run_subcommand(const RunConfig& cfg, std::ostream& log);

/// Entry point of the command-line tool; returns the process exit status.
int cli_main(int argc, char** argv);

}  // namespace dtslpm
