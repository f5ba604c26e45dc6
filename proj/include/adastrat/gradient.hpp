#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adastrat/estimator.hpp"
#include "adastrat/gauss.hpp"
#include "adastrat/payoffs.hpp"
#include "adastrat/strata.hpp"

namespace adastrat {

// Monte Carlo estimates of the surface integrals
//   int y * prod_{j != k} 1{mu_j^T y in cell_j} * h(y) dlambda_z
// for h in {f, f*phi, f*phi^2}, at one boundary hyperplane mu_k^T y = z.
struct BoundaryIntegrals {
  Eigen::VectorXd f;
  Eigen::VectorXd f_phi;
  Eigen::VectorXd f_phi2;
  std::int64_t draws_used = 0;
};

// Single-constraint estimator used directly in tests and small studies.
// other_cells holds the value-space intervals (lo, hi] of the m-1 remaining
// directions in ascending direction order. When the payoff needs auxiliary
// randomness, aux_base supplies one substream per draw index.
BoundaryIntegrals boundary_integral(const StratificationMatrix& mu, int k, double z,
                                    std::span<const std::pair<double, double>> other_cells,
                                    const GaussianPayoff& payoff, std::int64_t n,
                                    RandomStream& stream, RandomStream* aux_base = nullptr);

// All boundary integrals of one iteration, bucketed by the cell multi-index
// of the non-boundary directions so that a single batch of hyperplane draws
// serves every stratum sharing the boundary.
class BoundaryField {
 public:
  BoundaryField(int d, int m, int I);

  // Adds one hyperplane draw for boundary (direction k, interior boundary
  // bj, 0-based so its abscissa is grid.boundaries[bj + 1]).
  void accumulate(int k, int bj, const StrataGrid& grid, const Eigen::MatrixXd& mu,
                  const Eigen::VectorXd& y, double phi_value);
  // Applies the normal density / draw count normalization. Call once.
  void finalize(const StrataGrid& grid);

  // Column of the bucketed integral for a stratum multi-index.
  Eigen::VectorXd integral_f(int k, int bj, std::span<const int> multi) const;
  Eigen::VectorXd integral_f_phi(int k, int bj, std::span<const int> multi) const;
  Eigen::VectorXd integral_f_phi2(int k, int bj, std::span<const int> multi) const;

  std::int64_t bucket_of(int k, std::span<const int> multi) const;
  std::int64_t bucket_count() const { return buckets_; }
  std::int64_t draws(int k, int bj) const { return batch(k, bj).draws; }

  struct Batch {
    Eigen::MatrixXd f, f_phi, f_phi2;  // d x bucket_count
    std::int64_t draws = 0;
  };
  Batch& batch(int k, int bj);
  const Batch& batch(int k, int bj) const;

 private:
  int d_, m_, I_;
  std::int64_t buckets_;
  std::vector<Batch> batches_;  // indexed k * (I-1) + bj
  bool finalized_ = false;
};

// Gradient of nu_i(h, mu) for one stratum: column k telescopes the two
// bucketed boundary integrals of direction k, infinite boundaries
// contributing zero.
struct NuGradients {
  Eigen::MatrixXd f;
  Eigen::MatrixXd f_phi;
  Eigen::MatrixXd f_phi2;
};
NuGradients grad_nu(std::span<const int> multi, const StrataGrid& grid,
                    const BoundaryField& field);

// Gradient of V(mu) = sum_i p_i sigma_i assembled from the per-stratum
// moment estimates and the boundary field. Strata with p_i * sigma_i below
// 1e-12 are skipped; when every stratum is skipped the zero matrix is
// returned and *degenerate is set.
Eigen::MatrixXd grad_V(const StrataGrid& grid, const StratumStats& stats,
                       std::span<const double> p, const BoundaryField& field,
                       bool* degenerate = nullptr);

// Draw counts per boundary: `total` split equally over the m(I-1) finite
// boundaries, the remainder going to the most central abscissae first.
std::vector<std::int64_t> boundary_draw_counts(int m, int I, std::int64_t total);

}  // namespace adastrat
