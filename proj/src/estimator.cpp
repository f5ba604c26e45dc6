#include "adastrat/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace adastrat {

StratumMoments stratum_moments_from_sums(double sum, double sum_sq, std::int64_t n, double p_i) {
  if (p_i <= 0.0) throw std::invalid_argument("stratum_moments: p_i must be > 0");
  StratumMoments m;
  m.draws_used = n;
  if (n == 0) {
    m.empty = true;
    m.sigma_stale = true;
    return m;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  m.nu_phi = p_i * sum * inv_n;
  m.nu_phi2 = p_i * sum_sq * inv_n;
  if (n < 2) {
    m.sigma_stale = true;
    return m;
  }
  const double mean = sum * inv_n;
  const double var = sum_sq * inv_n - mean * mean;
  m.sigma_hat = var > 0.0 ? std::sqrt(var) : 0.0;
  return m;
}

StratumMoments stratum_moments(std::span<const double> samples, double p_i) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : samples) {
    sum += v;
    sum_sq += v * v;
  }
  return stratum_moments_from_sums(sum, sum_sq, static_cast<std::int64_t>(samples.size()), p_i);
}

void StratumStats::resize(std::size_t n) {
  nu_phi.assign(n, 0.0);
  nu_phi2.assign(n, 0.0);
  sigma_hat.assign(n, 0.0);
  draws_used.assign(n, 0);
}

double stratified_estimate(const StratumStats& stats) {
  double total = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats.draws_used[i] > 0) total += stats.nu_phi[i];
  }
  return total;
}

double estimator_variance(std::span<const double> p, std::span<const double> sigma_hat,
                          std::int64_t M) {
  if (p.size() != sigma_hat.size()) throw std::invalid_argument("estimator_variance: size mismatch");
  if (M < 1) throw std::invalid_argument("estimator_variance: M must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * sigma_hat[i];
  return s * s / static_cast<double>(M);
}

void AveragedEstimate::update(double estimate, double variance_proxy) {
  ++iterations_;
  plain_sum_ += estimate;
  if (!(variance_proxy > 0.0) || !std::isfinite(variance_proxy)) {
    ++skipped_;
    return;
  }
  const double w = 1.0 / variance_proxy;
  weight_sum_ += w;
  weighted_value_sum_ += w * estimate;
}

double AveragedEstimate::value() const {
  if (weight_sum_ > 0.0) return weighted_value_sum_ / weight_sum_;
  if (iterations_ > 0) return plain_sum_ / static_cast<double>(iterations_);
  return std::numeric_limits<double>::quiet_NaN();
}

double AveragedEstimate::unweighted_mean() const {
  if (iterations_ == 0) return std::numeric_limits<double>::quiet_NaN();
  return plain_sum_ / static_cast<double>(iterations_);
}

}  // namespace adastrat
