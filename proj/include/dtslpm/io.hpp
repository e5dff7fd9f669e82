#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "dtslpm/hmc.hpp"
#include "dtslpm/inference.hpp"
#include "dtslpm/postprocess.hpp"
#include "dtslpm/stability.hpp"
#include "dtslpm/types.hpp"

namespace dtslpm {

/// Malformed input file; the message names the file and, where relevant, the row and column.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a count CSV: a header row of series labels, then one row per time point. The first
/// column holds time labels when its header cell is empty or one of time/t/date/period/quarter.
/// Rows and columns in error messages are 1-based and count the header as row 1.
CountPanel load_counts(const std::filesystem::path& path);
CountPanel parse_counts(std::istream& in, const std::string& source);

void write_counts(const CountPanel& panel, std::ostream& out);
void write_counts(const CountPanel& panel, const std::filesystem::path& path);

/// Long format: t,i,k,value with 1-based t and i.
void write_latents_long(const LatentTrajectories& latents, std::ostream& out);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

nlohmann::json to_json(const LatentTrajectories& latents);
LatentTrajectories latents_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelState& state);
ModelState state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MapEstimate& map);
MapEstimate map_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PosteriorDraw& draw);
PosteriorDraw draw_from_json(const nlohmann::json& j);

nlohmann::json to_json(const HmcConfig& cfg);
nlohmann::json to_json(const ChainStats& stats);
ChainStats chain_stats_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StabilityReport& report);
nlohmann::json to_json(const TrajectoryStability& report);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace dtslpm
