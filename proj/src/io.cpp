#include "dtslpm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace dtslpm {
namespace {

using nlohmann::json;

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool is_time_header(std::string cell) {
  std::transform(cell.begin(), cell.end(), cell.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return cell.empty() || cell == "time" || cell == "t" || cell == "date" || cell == "period" ||
         cell == "quarter";
}

std::string where(const std::string& source, std::size_t row, std::size_t col) {
  return source + ": row " + std::to_string(row) + ", column " + std::to_string(col);
}

}  // namespace

CountPanel parse_counts(std::istream& in, const std::string& source) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw InputError(source + ": file is empty");

  const std::vector<std::string> header = split_row(lines.front());
  const bool time_column = is_time_header(header.front());
  const std::size_t offset = time_column ? 1 : 0;
  if (header.size() < offset + 2)
    throw InputError(source + ": need at least two series columns in the header");

  const std::size_t n = header.size() - offset;
  const std::size_t times = lines.size() - 1;
  if (times < 2)
    throw InputError(source + ": need at least two time points, found " + std::to_string(times));

  CountMatrix counts(static_cast<Index>(n), static_cast<Index>(times));
  std::vector<std::string> time_labels;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::vector<std::string> cells = split_row(lines[r]);
    if (cells.size() != header.size())
      throw InputError(source + ": row " + std::to_string(r + 1) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    if (time_column) time_labels.push_back(cells.front());
    for (std::size_t c = offset; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      std::int64_t value = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
        throw InputError(where(source, r + 1, c + 1) + ": '" + cell + "' is not an integer count");
      if (value < 0)
        throw InputError(where(source, r + 1, c + 1) + ": negative count " + cell);
      counts(static_cast<Index>(c - offset), static_cast<Index>(r - 1)) = value;
    }
  }
  std::vector<std::string> labels(header.begin() + static_cast<std::ptrdiff_t>(offset), header.end());
  return CountPanel(std::move(counts), std::move(labels), std::move(time_labels));
}

CountPanel load_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open count file");
  return parse_counts(in, path.string());
}

void write_counts(const CountPanel& panel, std::ostream& out) {
  if (panel.has_time_labels()) out << "time,";
  for (std::size_t i = 0; i < panel.series_labels().size(); ++i)
    out << (i ? "," : "") << panel.series_labels()[i];
  out << '\n';
  for (Index t = 0; t < panel.times(); ++t) {
    if (panel.has_time_labels()) out << panel.time_labels()[static_cast<std::size_t>(t)] << ',';
    for (Index i = 0; i < panel.nodes(); ++i) out << (i ? "," : "") << panel(i, t);
    out << '\n';
  }
}

void write_counts(const CountPanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write count file");
  write_counts(panel, out);
}

void write_latents_long(const LatentTrajectories& latents, std::ostream& out) {
  out << "t,i,k,value\n";
  out.precision(17);
  for (Index t = 0; t < latents.times(); ++t)
    for (Index i = 0; i < latents.nodes(); ++i)
      for (Index k = 0; k < latents.dim(); ++k)
        out << t + 1 << ',' << i + 1 << ',' << k + 1 << ',' << latents(i, t, k) << '\n';
}

std::string config_hash(const json& config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const LatentTrajectories& z) {
  const auto v = z.values();
  return {{"nodes", z.nodes()}, {"times", z.times()}, {"dim", z.dim()},
          {"values", std::vector<double>(v.begin(), v.end())}};
}

LatentTrajectories latents_from_json(const json& j) {
  LatentTrajectories z(j.at("nodes").get<Index>(), j.at("times").get<Index>(), j.at("dim").get<Index>());
  const auto values = j.at("values").get<std::vector<double>>();
  if (static_cast<Index>(values.size()) != z.size())
    throw InputError("latent value count does not match the declared shape");
  std::copy(values.begin(), values.end(), z.values().begin());
  return z;
}

json to_json(const ModelSpec& spec) {
  return {{"mode", spec.mode == LatentMode::static_positions ? "static" : "dynamic"},
          {"latent_dim", spec.latent_dim},
          {"scale_prior", spec.scale_prior == ScalePrior::gamma ? "gamma" : "fixed"},
          {"rho", spec.rho},
          {"sigma", spec.sigma},
          {"rho_prior", {spec.rho_prior.shape, spec.rho_prior.rate}},
          {"sigma_prior", {spec.sigma_prior.shape, spec.sigma_prior.rate}}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  const auto mode = j.value("mode", std::string("dynamic"));
  if (mode != "static" && mode != "dynamic") throw InputError("mode must be static or dynamic");
  s.mode = mode == "static" ? LatentMode::static_positions : LatentMode::dynamic;
  s.latent_dim = j.value("latent_dim", Index{2});
  const auto prior = j.value("scale_prior", std::string("fixed"));
  if (prior != "fixed" && prior != "gamma") throw InputError("scale_prior must be fixed or gamma");
  s.scale_prior = prior == "gamma" ? ScalePrior::gamma : ScalePrior::fixed;
  s.rho = j.value("rho", s.rho);
  s.sigma = j.value("sigma", s.sigma);
  if (j.contains("rho_prior")) s.rho_prior = {j["rho_prior"].at(0), j["rho_prior"].at(1)};
  if (j.contains("sigma_prior")) s.sigma_prior = {j["sigma_prior"].at(0), j["sigma_prior"].at(1)};
  return s;
}

json to_json(const ModelState& s) {
  return {{"alpha", s.params.alpha},
          {"beta", std::vector<double>(s.params.beta.data(), s.params.beta.data() + s.params.beta.size())},
          {"rho", s.params.rho},
          {"sigma", s.params.sigma},
          {"latents", to_json(s.latents)}};
}

ModelState state_from_json(const json& j) {
  ModelState s;
  s.params.alpha = j.at("alpha").get<double>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  s.params.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Index>(beta.size()));
  s.params.rho = j.value("rho", s.params.rho);
  s.params.sigma = j.value("sigma", s.params.sigma);
  s.latents = latents_from_json(j.at("latents"));
  return s;
}

json to_json(const MapEstimate& m) {
  return {{"state", to_json(m.state)},
          {"log_posterior", m.log_posterior},
          {"gradient_norm", m.gradient_norm},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"message", m.message}};
}

MapEstimate map_from_json(const json& j) {
  MapEstimate m;
  m.state = state_from_json(j.at("state"));
  m.log_posterior = j.at("log_posterior").get<double>();
  m.gradient_norm = j.value("gradient_norm", 0.0);
  m.converged = j.value("converged", false);
  m.iterations = j.value("iterations", 0);
  m.message = j.value("message", std::string());
  return m;
}

json to_json(const PosteriorDraw& d) {
  json j = to_json(d.state);
  j["chain"] = d.chain;
  j["iteration"] = d.iteration;
  j["log_posterior"] = d.log_posterior;
  return j;
}

PosteriorDraw draw_from_json(const json& j) {
  PosteriorDraw d;
  d.chain = j.at("chain").get<int>();
  d.iteration = j.at("iteration").get<int>();
  d.log_posterior = j.at("log_posterior").get<double>();
  d.state = state_from_json(j);
  return d;
}

json to_json(const HmcConfig& c) {
  json j = {{"n_iterations", c.n_iterations}, {"burn_in", c.burn_in},
            {"thin", c.thin},                 {"n_chains", c.n_chains},
            {"leapfrog_steps", c.leapfrog_steps},
            {"target_accept", c.target_accept},
            {"seed", c.seed},                 {"mass", c.mass},
            {"divergence_threshold", c.divergence_threshold}};
  j["step_size"] = c.step_size ? json(*c.step_size) : json("adapt");
  return j;
}

json to_json(const ChainStats& s) {
  return {{"chain", s.chain},
          {"acceptance_rate", s.acceptance_rate},
          {"divergences", s.divergences},
          {"burn_in_divergences", s.burn_in_divergences},
          {"step_size", s.step_size},
          {"draws", s.draws}};
}

ChainStats chain_stats_from_json(const json& j) {
  ChainStats s;
  s.chain = j.at("chain").get<int>();
  s.acceptance_rate = j.value("acceptance_rate", 0.0);
  s.divergences = j.value("divergences", 0);
  s.burn_in_divergences = j.value("burn_in_divergences", 0);
  s.step_size = j.value("step_size", 0.0);
  s.draws = j.value("draws", 0);
  return s;
}

json to_json(const StabilityReport& r) {
  return {{"max_abs_eigenvalue", r.max_abs_eigenvalue},
          {"row_lower", r.row_lower},
          {"row_upper", r.row_upper},
          {"r", std::vector<double>(r.r.data(), r.r.data() + r.r.size())},
          {"satisfied", r.satisfied},
          {"spectral_radius_below_one", r.spectral_radius_below_one}};
}

json to_json(const TrajectoryStability& r) {
  json slices = json::array();
  for (const auto& s : r.slices) slices.push_back(to_json(s));
  return {{"satisfied", r.satisfied},
          {"spectral_radius_below_one", r.spectral_radius_below_one},
          {"worst_max_abs_eigenvalue", r.worst_max_abs_eigenvalue},
          {"slices", slices}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write");
  out << j.dump(2) << '\n';
}

}  // namespace dtslpm
