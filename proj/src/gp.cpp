#include "stride/gp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace stride {

namespace {

constexpr double kMinNoise = 1e-8;
constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_params(const KernelParams& p, std::size_t dim) {
  if (p.length_scales.size() != dim) {
    std::ostringstream msg;
    msg << "kernel has " << p.length_scales.size() << " length-scales for dimension " << dim;
    throw std::invalid_argument(msg.str());
  }
  for (double l : p.length_scales) {
    if (!(l > 0.0)) throw std::invalid_argument("kernel length-scales must be positive");
  }
  if (!(p.signal_var > 0.0)) throw std::invalid_argument("signal variance must be positive");
}

}  // namespace

KernelParams KernelParams::defaults(std::size_t dim) {
  KernelParams p;
  p.length_scales.assign(dim, 0.3);
  return p;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(kTwoPi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

GpSurrogate::GpSurrogate(std::vector<GpObservation> obs, KernelParams params)
    : obs_(std::move(obs)), params_(std::move(params)) {
  if (obs_.empty()) {
    dim_ = params_.length_scales.size();
    check_params(params_, dim_);
    params_.noise_var = std::max(params_.noise_var, kMinNoise);
    return;
  }
  dim_ = obs_.front().x.size();
  if (dim_ == 0) throw std::invalid_argument("observations must have at least one coordinate");
  for (const auto& o : obs_) {
    if (o.x.size() != dim_) throw std::invalid_argument("observations disagree on dimension");
    if (!(o.noise_multiplier > 0.0)) {
      throw std::invalid_argument("noise multiplier must be positive");
    }
    if (!std::isfinite(o.y)) throw std::invalid_argument("observation value must be finite");
  }
  if (params_.length_scales.empty()) params_.length_scales.assign(dim_, 0.3);
  check_params(params_, dim_);
  params_.noise_var = std::max(params_.noise_var, kMinNoise);
  factorize();
}

double GpSurrogate::kernel(const std::vector<double>& a, const std::vector<double>& b) const {
  double s = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double diff = (a[d] - b[d]) / params_.length_scales[d];
    s += diff * diff;
  }
  return params_.signal_var * std::exp(-0.5 * s);
}

void GpSurrogate::factorize() {
  const std::size_t n = obs_.size();
  Eigen::MatrixXd gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double k = kernel(obs_[i].x, obs_[j].x);
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k;
      gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = k;
    }
    gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +=
        std::max(params_.noise_var * obs_[i].noise_multiplier, kMinNoise);
  }

  // Escalate jitter until the Cholesky factorization succeeds; ill-conditioned
  // Gram matrices arise when points nearly coincide.
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd regularized = gram;
    if (jitter > 0.0) {
      regularized.diagonal().array() += jitter;
    }
    llt_.compute(regularized);
    if (llt_.info() == Eigen::Success) {
      jitter_ = jitter;
      Eigen::VectorXd y(n);
      for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = obs_[i].y;
      alpha_ = llt_.solve(y);
      log_det_half_ = llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
      return;
    }
    jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
  }

  const double max_diag = gram.diagonal().maxCoeff();
  const double min_diag = gram.diagonal().minCoeff();
  std::ostringstream msg;
  msg << "Gram factorization failed after jitter escalation to " << jitter
      << "; diagonal condition estimate " << (max_diag / std::max(min_diag, 1e-300));
  throw std::runtime_error(msg.str());
}

GpPosterior GpSurrogate::posterior(const std::vector<double>& x) const {
  if (x.size() != dim_) {
    std::ostringstream msg;
    msg << "query has dimension " << x.size() << ", surrogate expects " << dim_;
    throw std::invalid_argument(msg.str());
  }
  GpPosterior post;
  if (obs_.empty()) {
    post.mean = 0.0;
    post.variance = params_.signal_var;
    return post;
  }
  const std::size_t n = obs_.size();
  Eigen::VectorXd k_star(n);
  for (std::size_t i = 0; i < n; ++i) {
    k_star(static_cast<Eigen::Index>(i)) = kernel(x, obs_[i].x);
  }
  post.mean = k_star.dot(alpha_);
  const Eigen::VectorXd v = llt_.solve(k_star);
  post.variance = std::max(0.0, params_.signal_var - k_star.dot(v));
  return post;
}

double GpSurrogate::log_marginal_likelihood() const {
  if (obs_.empty()) return 0.0;
  const auto n = static_cast<double>(obs_.size());
  double fit = 0.0;
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    fit += obs_[i].y * alpha_(static_cast<Eigen::Index>(i));
  }
  return -0.5 * fit - log_det_half_ - 0.5 * n * std::log(kTwoPi);
}

GpSurrogate gp_fit(std::vector<GpObservation> obs, KernelParams params,
                   bool optimize_hyperparameters) {
  if (!obs.empty() && params.length_scales.empty()) {
    params.length_scales.assign(obs.front().x.size(), 0.3);
  }
  GpSurrogate gp(obs, params);
  if (!optimize_hyperparameters || obs.empty()) return gp;

  // Deterministic multiplicative hill climb on a shared length-scale factor,
  // the signal variance, and the noise variance.
  double best_ll = gp.log_marginal_likelihood();
  KernelParams best = gp.params();
  const double factors[] = {4.0, 2.0, 1.4142135623730951};
  for (double f : factors) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int coord = 0; coord < 3; ++coord) {
        for (double step : {f, 1.0 / f}) {
          KernelParams trial = best;
          if (coord == 0) {
            for (double& l : trial.length_scales) l *= step;
          } else if (coord == 1) {
            trial.signal_var *= step;
          } else {
            trial.noise_var = std::max(trial.noise_var * step, kMinNoise);
          }
          try {
            GpSurrogate candidate(obs, trial);
            const double ll = candidate.log_marginal_likelihood();
            if (ll > best_ll + 1e-10) {
              best_ll = ll;
              best = candidate.params();
              improved = true;
            }
          } catch (const std::runtime_error&) {
            // Factorization failure at extreme hyperparameters: skip the move.
          }
        }
      }
    }
  }
  return GpSurrogate(std::move(obs), best);
}

double expected_improvement(double mean, double std_dev, double best_so_far) {
  if (std_dev < 0.0) throw std::invalid_argument("standard deviation must be non-negative");
  const double gain = mean - best_so_far;
  if (std_dev == 0.0) return std::max(0.0, gain);
  const double z = gain / std_dev;
  return gain * normal_cdf(z) + std_dev * normal_pdf(z);
}

double cost_aware_acquisition(double ei, double cost) {
  if (!(cost > 0.0)) throw std::invalid_argument("cost must be positive");
  return ei / cost;
}

}  // namespace stride
