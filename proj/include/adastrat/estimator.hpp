#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adastrat {

// Per-stratum moment estimates. nu_phi and nu_phi2 carry the p_i / M_i
// factor, i.e. they estimate the integrals of f*phi and f*phi^2 over the
// stratum, so the stratified estimate is just the sum of nu_phi.
struct StratumMoments {
  double nu_phi = 0.0;
  double nu_phi2 = 0.0;
  double sigma_hat = 0.0;
  std::int64_t draws_used = 0;
  bool empty = false;        // no samples: moments contribute zero
  bool sigma_stale = false;  // fewer than 2 samples: sigma carried over
};

StratumMoments stratum_moments(std::span<const double> samples, double p_i);
StratumMoments stratum_moments_from_sums(double sum, double sum_sq, std::int64_t n, double p_i);

// Moments for all strata of one sampling pass.
struct StratumStats {
  std::vector<double> nu_phi;
  std::vector<double> nu_phi2;
  std::vector<double> sigma_hat;
  std::vector<std::int64_t> draws_used;

  std::size_t size() const { return nu_phi.size(); }
  void resize(std::size_t n);
};

// Sum of nu_phi over strata that received draws.
double stratified_estimate(const StratumStats& stats);

// Optimal-allocation variance proxy (1/M) (sum_i p_i sigma_hat_i)^2.
double estimator_variance(std::span<const double> p, std::span<const double> sigma_hat,
                          std::int64_t M);

// Inverse-variance weighted average of per-iteration estimates. Iterations
// with a nonpositive variance proxy carry no information about precision and
// are skipped (counted); if every iteration was skipped the plain mean of
// the submitted estimates is reported instead.
class AveragedEstimate {
 public:
  void update(double estimate, double variance_proxy);

  double value() const;
  double unweighted_mean() const;  // diagnostic
  std::int64_t iteration_count() const { return iterations_; }
  std::int64_t skipped_count() const { return skipped_; }
  double weight_sum() const { return weight_sum_; }

 private:
  double weight_sum_ = 0.0;
  double weighted_value_sum_ = 0.0;
  double plain_sum_ = 0.0;
  std::int64_t iterations_ = 0;
  std::int64_t skipped_ = 0;
};

}  // namespace adastrat
