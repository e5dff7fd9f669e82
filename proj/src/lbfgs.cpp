#include "dtslpm/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "dtslpm/types.hpp"

namespace dtslpm {
namespace {

struct Sample {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative along the search direction
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const LbfgsConfig& cfg, const Eigen::VectorXd& x,
             const Eigen::VectorXd& dir, double f0, double slope0, int& evals)
      : f_(f), cfg_(cfg), x_(x), dir_(dir), f0_(f0), slope0_(slope0), evals_(evals) {
    // Tolerate roundoff-level increases so the search does not stall near the optimum.
    noise_ = 1e-13 * (1.0 + std::abs(f0));
  }

  /// Finds a step satisfying the strong Wolfe conditions; false if none was found.
  bool run(double initial_step, Sample& out) {
    Sample prev;
    prev.step = 0.0;
    prev.value = f0_;
    prev.slope = slope0_;
    double step = initial_step;
    for (int i = 0; i < cfg_.max_line_search; ++i) {
      Sample cur = evaluate(step);
      if (!sufficient_decrease(cur) || (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur, out);
      }
      if (std::abs(cur.slope) <= -cfg_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      prev = std::move(cur);
      step *= 2.0;
    }
    return false;
  }

 private:
  Sample evaluate(double step) {
    Sample s;
    s.step = step;
    s.x = x_ + step * dir_;
    s.grad.resize(x_.size());
    s.value = f_(s.x, s.grad);
    ++evals_;
    if (!std::isfinite(s.value) || !s.grad.allFinite()) {
      s.value = std::numeric_limits<double>::infinity();
      s.slope = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.slope = s.grad.dot(dir_);
    }
    return s;
  }

  bool sufficient_decrease(const Sample& s) const {
    return std::isfinite(s.value) && s.value <= f0_ + cfg_.c1 * s.step * slope0_ + noise_;
  }

  static double interpolate(const Sample& lo, const Sample& hi) {
    const double a = lo.step;
    const double b = hi.step;
    const double width = b - a;
    double trial = 0.5 * (a + b);
    if (std::isfinite(hi.value) && std::isfinite(hi.slope)) {
      // Minimizer of the cubic matching values and slopes at both ends.
      const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
      const double disc = d1 * d1 - lo.slope * hi.slope;
      if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double cubic = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
        if (std::isfinite(cubic)) trial = cubic;
      }
    }
    const double lo_edge = std::min(a, b) + 0.1 * std::abs(width);
    const double hi_edge = std::max(a, b) - 0.1 * std::abs(width);
    if (!(trial >= lo_edge && trial <= hi_edge)) trial = 0.5 * (a + b);
    return trial;
  }

  bool zoom(Sample lo, Sample hi, Sample& out) {
    for (int j = 0; j < cfg_.max_line_search; ++j) {
      if (std::abs(hi.step - lo.step) * dir_.norm() <=
          std::numeric_limits<double>::epsilon() * (1.0 + x_.norm()))
        break;
      Sample cur = evaluate(interpolate(lo, hi));
      if (!sufficient_decrease(cur) || cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -cfg_.c2 * slope0_) {
          out = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // No Wolfe point; accept the bracket's low end if it made strict progress.
    if (lo.step > 0.0 && lo.value < f0_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  const Objective& f_;
  const LbfgsConfig& cfg_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& dir_;
  double f0_;
  double slope0_;
  int& evals_;
  double noise_ = 0.0;
};

struct CurvaturePair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

Eigen::VectorXd two_loop(const std::deque<CurvaturePair>& memory, const Eigen::VectorXd& grad) {
  Eigen::VectorXd q = grad;
  std::vector<double> alpha(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    alpha[k] = memory[k].rho * memory[k].s.dot(q);
    q -= alpha[k] * memory[k].y;
  }
  const auto& last = memory.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const double b = memory[k].rho * memory[k].y.dot(q);
    q += (alpha[k] - b) * memory[k].s;
  }
  return -q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsConfig& config) {
  LbfgsResult res;
  res.x = std::move(x0);
  Eigen::VectorXd grad(res.x.size());
  res.value = objective(res.x, grad);
  res.evaluations = 1;
  if (!std::isfinite(res.value) || !grad.allFinite())
    throw NumericalError("objective is not finite at the initial point");

  std::deque<CurvaturePair> memory;
  for (res.iterations = 0; res.iterations < config.max_iterations; ++res.iterations) {
    res.gradient_norm = grad.norm();
    if (res.gradient_norm <= config.gradient_tolerance) {
      res.converged = true;
      res.message = "gradient norm below tolerance";
      return res;
    }

    Eigen::VectorXd dir = memory.empty() ? Eigen::VectorXd(-grad) : two_loop(memory, grad);
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      memory.clear();
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    double step = memory.empty() ? std::min(1.0, 1.0 / res.gradient_norm) : 1.0;

    Sample next;
    bool ok;
    {
      LineSearch search(objective, config, res.x, dir, res.value, slope, res.evaluations);
      ok = search.run(step, next);
    }
    if (!ok && !memory.empty()) {
      memory.clear();
      dir = -grad;
      slope = -grad.squaredNorm();
      step = std::min(1.0, 1.0 / res.gradient_norm);
      LineSearch search(objective, config, res.x, dir, res.value, slope, res.evaluations);
      ok = search.run(step, next);
    }
    if (!ok) {
      res.message = "line search failed to make progress";
      return res;
    }

    CurvaturePair pair{next.x - res.x, next.grad - grad, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > config.memory) memory.pop_front();
    }
    res.x = std::move(next.x);
    grad = std::move(next.grad);
    res.value = next.value;
  }
  res.gradient_norm = grad.norm();
  res.converged = res.gradient_norm <= config.gradient_tolerance;
  res.message = res.converged ? "gradient norm below tolerance" : "iteration limit reached";
  return res;
}

}  // namespace dtslpm
