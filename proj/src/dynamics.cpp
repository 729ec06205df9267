#include "stride/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace stride {

std::vector<std::string> TrainingLog::validate() const {
  std::vector<std::string> out;
  if (completed != static_cast<int>(epochs.size()))
    out.push_back("completed count does not match epoch records");
  if (completed > budget) out.push_back("completed exceeds budget");
  int prev = 0;
  bool first = true;
  for (const auto& e : epochs) {
    if (first && e.epoch != 1) out.push_back("epoch indices must start at 1");
    if (!first && e.epoch != prev + 1)
      out.push_back("epoch indices must increase by 1");
    if (!std::isfinite(e.train_loss) || e.train_loss < 0.0)
      out.push_back("epoch " + std::to_string(e.epoch) + " has invalid loss");
    if (!std::isfinite(e.batch_loss_variance) || e.batch_loss_variance < 0.0)
      out.push_back("epoch " + std::to_string(e.epoch) + " has invalid batch variance");
    prev = e.epoch;
    first = false;
  }
  return out;
}

double DynamicsFeatures::dot(const std::vector<double>& w) const {
  if (w.size() != kDim)
    throw std::invalid_argument("weight vector dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < kDim; ++i) acc += w[i] * v[i];
  return acc;
}

DynamicsFeatures extract_dynamics_features(const TrainingLog& log) {
  const auto& ep = log.epochs;
  if (ep.empty())
    throw std::invalid_argument("cannot extract features from an empty log");

  DynamicsFeatures f;
  f.v[0] = 1.0;
  f.v[1] = ep.front().train_loss;
  f.v[2] = ep.back().train_loss;

  const std::size_t n = ep.size();
  if (n >= 2) {
    double sum_delta = 0.0;
    for (std::size_t i = 1; i < n; ++i)
      sum_delta += ep[i].train_loss - ep[i - 1].train_loss;
    f.v[3] = sum_delta / static_cast<double>(n - 1);
  }

  // log-loss slope over epochs with strictly positive loss; clipped-to-zero
  // epochs are excluded so the fit stays finite. The x coordinate is the
  // 1-based position, not the stored label, so relabeled logs agree.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = ep[i];
    if (e.train_loss > 0.0) {
      double x = static_cast<double>(i + 1);
      double y = std::log(e.train_loss);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
  }
  if (m >= 2) {
    double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom != 0.0) f.v[4] = (static_cast<double>(m) * sxy - sx * sy) / denom;
  }

  const std::size_t k = std::min<std::size_t>(3, n);
  double mean = 0.0;
  for (std::size_t i = n - k; i < n; ++i) mean += ep[i].batch_loss_variance;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (std::size_t i = n - k; i < n; ++i) {
    double d = ep[i].batch_loss_variance - mean;
    var += d * d;
  }
  f.v[5] = var / static_cast<double>(k);

  for (double x : f.v) {
    if (!std::isfinite(x))
      throw std::invalid_argument("training log produced non-finite features");
  }
  return f;
}

double trial_objective(const TrialRecord& trial) {
  if (trial.final_performance) return *trial.final_performance;
  for (auto it = trial.log.epochs.rbegin(); it != trial.log.epochs.rend(); ++it) {
    if (it->val_metric) return std::clamp(*it->val_metric, 0.0, 1.0);
  }
  if (trial.log.epochs.empty()) return 0.0;
  return std::clamp(1.0 - trial.log.epochs.back().train_loss, 0.0, 1.0);
}

}  // namespace stride
