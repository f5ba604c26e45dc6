#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "adastrat/payoffs.hpp"
#include "adastrat/rng.hpp"

namespace adastrat {

// Latin Hypercube sample of M points in R^d under the standard normal law:
// column j holds the quantiles of (pi_j(i) - U_ij) / M for an independent
// uniform permutation pi_j per coordinate.
Eigen::MatrixXd lhs_sample(std::int64_t M, int d, RandomStream& stream);

struct LhsResult {
  double mean = 0.0;
  double variance = 0.0;  // per-sample statistic M * Var(replicate means)
  std::vector<double> replicate_means;
};

// N independent replicates of size M, each estimating E[phi(O y)]; the mean
// is rotation invariant while the variance statistic depends on O. Pass
// rotation = nullptr for the identity.
LhsResult lhs_estimate(const GaussianPayoff& payoff, const Eigen::MatrixXd* rotation,
                       std::int64_t M, int N, std::uint64_t seed);

}  // namespace adastrat
