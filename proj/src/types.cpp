#include "dtslpm/types.hpp"

#include <cmath>
#include <string>

namespace dtslpm {

CountPanel::CountPanel(CountMatrix counts, std::vector<std::string> series_labels,
                       std::vector<std::string> time_labels)
    : counts_(std::move(counts)),
      series_labels_(std::move(series_labels)),
      time_labels_(std::move(time_labels)),
      has_time_labels_(!time_labels_.empty()) {
  if (counts_.rows() < 1) throw ShapeError("count panel needs at least one series");
  if (counts_.cols() < 2) throw ShapeError("count panel needs at least two time points");
  for (Index t = 0; t < counts_.cols(); ++t)
    for (Index i = 0; i < counts_.rows(); ++i)
      if (counts_(i, t) < 0)
        throw DomainError("negative count at series " + std::to_string(i) + ", time " +
                          std::to_string(t));
  if (series_labels_.empty())
    for (Index i = 0; i < counts_.rows(); ++i) series_labels_.push_back("s" + std::to_string(i + 1));
  if (time_labels_.empty())
    for (Index t = 0; t < counts_.cols(); ++t) time_labels_.push_back(std::to_string(t + 1));
  if (static_cast<Index>(series_labels_.size()) != counts_.rows())
    throw ShapeError("series label count does not match the number of series");
  if (static_cast<Index>(time_labels_.size()) != counts_.cols())
    throw ShapeError("time label count does not match the number of time points");
}

Eigen::MatrixXd CountPanel::log1p_counts() const {
  return counts_.cast<double>().array().log1p().matrix();
}

LatentTrajectories::LatentTrajectories(Index nodes, Index times, Index dim)
    : nodes_(nodes), times_(times), dim_(dim) {
  if (nodes < 1 || times < 1 || dim < 1)
    throw ShapeError("latent trajectories need positive nodes, times and dimension");
  data_.assign(static_cast<std::size_t>(nodes * times * dim), 0.0);
}

SliceMap LatentTrajectories::slice(Index t) {
  return SliceMap(data_.data() + offset(0, t, 0), nodes_, dim_);
}

ConstSliceMap LatentTrajectories::slice(Index t) const {
  return ConstSliceMap(data_.data() + offset(0, t, 0), nodes_, dim_);
}

std::span<const double> LatentTrajectories::position(Index i, Index t) const {
  return {data_.data() + offset(i, t, 0), static_cast<std::size_t>(dim_)};
}

ConstSliceMap LatentTrajectories::stacked() const {
  return ConstSliceMap(data_.data(), nodes_ * times_, dim_);
}

SliceMap LatentTrajectories::stacked() { return SliceMap(data_.data(), nodes_ * times_, dim_); }

bool LatentTrajectories::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void ModelParams::validate(Index nodes) const {
  if (beta.size() != nodes)
    throw ShapeError("beta has length " + std::to_string(beta.size()) + " but the panel has " +
                     std::to_string(nodes) + " series");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("rho must be positive and finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("sigma must be positive and finite");
  if (scale_prior == ScalePrior::gamma) {
    if (!(rho_prior.shape > 0 && rho_prior.rate > 0 && sigma_prior.shape > 0 && sigma_prior.rate > 0))
      throw DomainError("gamma hyperparameters must be positive");
  }
}

}  // namespace dtslpm
