#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dtslpm {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SliceMap = Eigen::Map<RowMatrix>;
using ConstSliceMap = Eigen::Map<const RowMatrix>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Invalid value for a mathematically constrained argument (negative distance, non-positive scale).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent dimensions between inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: solver non-convergence, intensity overflow, non-finite objective.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed N x T panel of nonnegative integer counts, one row per series.
class CountPanel {
 public:
  CountPanel() = default;
  explicit CountPanel(CountMatrix counts, std::vector<std::string> series_labels = {},
                      std::vector<std::string> time_labels = {});

  Index nodes() const { return counts_.rows(); }
  Index times() const { return counts_.cols(); }
  std::int64_t operator()(Index i, Index t) const { return counts_(i, t); }

  const CountMatrix& counts() const { return counts_; }
  const std::vector<std::string>& series_labels() const { return series_labels_; }
  const std::vector<std::string>& time_labels() const { return time_labels_; }
  /// False when time labels were generated (1..T) rather than supplied.
  bool has_time_labels() const { return has_time_labels_; }

  /// Elementwise log(y + 1), the regressor entering the log-intensity.
  Eigen::MatrixXd log1p_counts() const;

 private:
  CountMatrix counts_;
  std::vector<std::string> series_labels_;
  std::vector<std::string> time_labels_;
  bool has_time_labels_ = false;
};

/// Latent positions z_{itk} stored time-major: slice t is a contiguous N x K row-major block.
///
/// A trajectory set with a single time slice represents the static model, where the
/// one configuration is shared by every time point.
class LatentTrajectories {
 public:
  LatentTrajectories() = default;
  LatentTrajectories(Index nodes, Index times, Index dim = 2);

  Index nodes() const { return nodes_; }
  Index times() const { return times_; }
  Index dim() const { return dim_; }
  bool is_static() const { return times_ == 1; }
  Index size() const { return static_cast<Index>(data_.size()); }

  double& operator()(Index i, Index t, Index k) { return data_[offset(i, t, k)]; }
  double operator()(Index i, Index t, Index k) const { return data_[offset(i, t, k)]; }

  SliceMap slice(Index t);
  ConstSliceMap slice(Index t) const;
  std::span<const double> position(Index i, Index t) const;

  /// All T*N points as a (T*N) x K matrix, time-major (rows t*N .. t*N+N-1 hold slice t).
  ConstSliceMap stacked() const;
  SliceMap stacked();

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool all_finite() const;

 private:
  std::size_t offset(Index i, Index t, Index k) const {
    return static_cast<std::size_t>((t * nodes_ + i) * dim_ + k);
  }

  Index nodes_ = 0;
  Index times_ = 0;
  Index dim_ = 0;
  std::vector<double> data_;
};

enum class ScalePrior { fixed, gamma };

/// Shape/rate parameterization.
struct GammaHyper {
  double shape;
  double rate;
};

struct ModelParams {
  double alpha = 0.0;
  Eigen::VectorXd beta;
  double rho = 10.0;
  double sigma = 0.05;
  ScalePrior scale_prior = ScalePrior::fixed;
  GammaHyper rho_prior{2.0, 2.0};
  GammaHyper sigma_prior{5.0, 10.0};

  void validate(Index nodes) const;
};

/// One complete point of the parameter space: scalar/vector parameters plus positions.
struct ModelState {
  ModelParams params;
  LatentTrajectories latents;
};

}  // namespace dtslpm
