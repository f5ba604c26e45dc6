#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adastrat/gauss.hpp"

namespace adastrat {

// Quantile grid with I equiprobable strata per direction. Cells are the
// half-open products prod_k (b[i_k], b[i_k+1]]; every cell has probability
// 1/I^m regardless of the direction matrix.
struct StrataGrid {
  int m = 1;
  int I = 2;
  // Standard normal quantiles of j/I, j = 0..I; first/last are -inf/+inf.
  std::vector<double> boundaries;

  std::int64_t cell_count() const;
  double stratum_probability() const;  // 1 / I^m

  // Probability interval of stratum j (0-based) along one direction.
  std::pair<double, double> interval(int j) const;
  // Probability cell of a multi-index (each entry in [0, I)).
  ProbabilityCell cell(std::span<const int> multi_index) const;

  // Lexicographic linearization of multi-indices (row major).
  std::int64_t linear_index(std::span<const int> multi_index) const;
  std::vector<int> multi_index(std::int64_t linear) const;

  // Index of the stratum containing x along one direction; a value equal to
  // an interior boundary belongs to the lower-indexed cell.
  int locate(double x) const;
};

StrataGrid build_equiprobable_grid(int m, int I);

// Draw counts per stratum from an allocation vector by the cumulative floor
// rule; the counts always sum to M and |M_i - M q_i| < 1.
std::vector<std::int64_t> draws_from_allocation(std::span<const double> q, std::int64_t M);

// q*_i proportional to p_i sigma_i, renormalized by the exact sum.
// Throws degenerate_error when every sigma is zero; callers fall back to the
// proportional allocation.
std::vector<double> optimal_allocation(std::span<const double> p, std::span<const double> sigma);

// Variance of the stratified estimator at finite M (draw counts from the
// cumulative floor rule applied to q); strata with no draws are skipped.
double fixed_I_variance(std::span<const double> p, std::span<const double> sigma,
                        std::span<const double> q, std::int64_t M);

// Large-M companion: (1/M) sum_{q_i > 0} p_i^2 sigma_i^2 / q_i.
double asymptotic_variance(std::span<const double> p, std::span<const double> sigma,
                           std::span<const double> q, std::int64_t M);

}  // namespace adastrat
