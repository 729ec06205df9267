#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace stride {

/// Squared-exponential kernel with per-dimension length-scales.
struct KernelParams {
  std::vector<double> length_scales;  // resized to the input dimension on fit
  double signal_var = 1.0;
  double noise_var = 1e-4;  // clamped to >= 1e-8

  static KernelParams defaults(std::size_t dim);
};

struct GpObservation {
  std::vector<double> x;
  double y = 0.0;
  // Per-observation noise inflation: effective noise = noise_var * multiplier.
  // Folded proxy-task points carry multiplier > 1 so they shape the surrogate
  // without outweighing real observations.
  double noise_multiplier = 1.0;
};

struct GpPosterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Zero-mean Gaussian process regressor. Fitting factorizes the Gram matrix
/// once (Cholesky with escalating jitter); predictions reuse the factor.
class GpSurrogate {
 public:
  GpSurrogate() = default;
  GpSurrogate(std::vector<GpObservation> obs, KernelParams params);

  GpPosterior posterior(const std::vector<double>& x) const;
  double log_marginal_likelihood() const;

  const std::vector<GpObservation>& observations() const { return obs_; }
  const KernelParams& params() const { return params_; }
  std::size_t dim() const { return dim_; }
  /// Jitter that had to be added to make the factorization succeed.
  double jitter() const { return jitter_; }

 private:
  double kernel(const std::vector<double>& a, const std::vector<double>& b) const;
  void factorize();

  std::vector<GpObservation> obs_;
  KernelParams params_;
  std::size_t dim_ = 0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // (K + D)^-1 y
  double log_det_half_ = 0.0;
};

/// Fits a surrogate; with optimize_hyperparameters set, runs a deterministic
/// multiplicative hill climb on (length-scale factor, signal_var, noise_var)
/// maximizing the log marginal likelihood.
GpSurrogate gp_fit(std::vector<GpObservation> obs, KernelParams params,
                   bool optimize_hyperparameters = false);

inline GpPosterior gp_posterior(const GpSurrogate& gp, const std::vector<double>& x) {
  return gp.posterior(x);
}

/// Expected improvement for maximization, E[max(0, f - best)] under
/// N(mean, std^2); the closed form (mean-best)*Phi(z) + std*phi(z).
double expected_improvement(double mean, double std_dev, double best_so_far);

/// Acquisition per unit cost: EI / cost.
double cost_aware_acquisition(double ei, double cost);

double normal_pdf(double z);
double normal_cdf(double z);

}  // namespace stride
