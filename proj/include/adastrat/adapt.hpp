#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "adastrat/estimator.hpp"
#include "adastrat/gauss.hpp"
#include "adastrat/payoffs.hpp"
#include "adastrat/strata.hpp"

namespace adastrat {

enum class StepsizePolicy {
  Constant,    // gamma_t = scale / sqrt(N)
  Decreasing,  // gamma_t = scale / t^alpha, alpha in (1/2, 1]
};

enum class GradientDraws {
  Shared,       // boundary draws reuse the stratum-draw normals
  Independent,  // boundary draws use their own substreams
};

struct AdaptConfig {
  int d = 16;
  int m = 1;
  int I = 100;
  std::int64_t M = 20000;    // stratified draws per iteration
  int N = 200;               // iterations
  StepsizePolicy policy = StepsizePolicy::Constant;
  double step_scale = 0.3;
  double step_alpha = 1.0;   // only for the decreasing policy
  std::uint64_t seed = 0;
  double allocation_floor = 0.1;  // per-stratum floor = allocation_floor / I^m
  GradientDraws gradient_draws = GradientDraws::Shared;
  std::int64_t gradient_total = -1;  // boundary draws per iteration; -1 = M
  std::optional<Eigen::MatrixXd> initial_direction;  // default (1..1)/sqrt(d)

  void validate() const;  // throws config_error
};

struct IterationTrace {
  double estimate = 0.0;        // stratified estimate of the iteration
  double variance_proxy = 0.0;  // (sum_i p_i sigma_hat_i)^2
  double averaged = 0.0;        // running weighted average
  Eigen::MatrixXd mu;
};

struct AdaptState {
  int iteration = 0;
  StrataGrid grid;
  StratificationMatrix mu;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<std::int64_t> counts;
  std::vector<double> sigma;  // sigma_hat carried across iterations
  AveragedEstimate averaged;
  std::vector<IterationTrace> traces;
  std::int64_t degenerate_gradient_count = 0;
  std::int64_t zero_variance_count = 0;
};

struct AdaptReport {
  double averaged_estimate = 0.0;
  double unweighted_estimate = 0.0;
  double variance_statistic = 0.0;  // N / sum_t 1/(sum_i p_i sigma_i^(t))^2
  Eigen::MatrixXd mu_final;
  std::vector<IterationTrace> traces;
  std::int64_t degenerate_gradient_count = 0;
  std::int64_t zero_variance_count = 0;
};

AdaptState init_state(const AdaptConfig& config, const GaussianPayoff& payoff);
void iterate(AdaptState& state, const GaussianPayoff& payoff, const AdaptConfig& config);
AdaptReport run(const AdaptConfig& config, const GaussianPayoff& payoff);

// Harmonic-mean variance statistic over per-iteration proxies; entries that
// are not positive are excluded from the mean.
double harmonic_variance_statistic(std::span<const double> variance_proxies);

}  // namespace adastrat
