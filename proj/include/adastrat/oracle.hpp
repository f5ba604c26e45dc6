#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adastrat/gauss.hpp"
#include "adastrat/payoffs.hpp"
#include "adastrat/strata.hpp"

// Independent verification machinery: quadrature evaluations of the limiting
// variance, exact per-stratum quantities for analytic test integrands,
// finite-difference gradients and brute-force replication variances. Nothing
// here reuses the Monte Carlo sampling paths it is meant to check.
namespace adastrat::oracle {

// Test integrand with closed-form conditional moments given mu^T Y = x
// (single stratification direction).
struct ConditionalMomentModel {
  int d = 0;
  Eigen::VectorXd mu;                        // unit direction
  std::function<double(double)> phi_mean;    // E[phi(Y)   | mu^T Y = x]
  std::function<double(double)> phi2_mean;   // E[phi^2(Y) | mu^T Y = x]
  std::function<double(std::span<const double>)> phi;  // the integrand itself

  double conditional_variance(double x) const {
    const double m1 = phi_mean(x);
    const double m2 = phi2_mean(x);
    return std::max(m2 - m1 * m1, 0.0);
  }
};

ConditionalMomentModel linear_model(Eigen::VectorXd a, Eigen::VectorXd mu);
ConditionalMomentModel quadratic_y1_model(Eigen::VectorXd mu);
ConditionalMomentModel exponential_model(Eigen::VectorXd a, Eigen::VectorXd mu);

enum class AllocationDensity { Proportional, Optimal };

// Adaptive Gauss-Kronrod integral on a finite interval.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10);

// Limiting variance per sample as I -> infinity: E[Var(phi | mu^T Y)] for the
// proportional density, (E[sqrt(Var(phi | mu^T Y))])^2 for the optimal one.
double limiting_variance(const ConditionalMomentModel& model, AllocationDensity density);

// Exact per-stratum quantities of a quantile grid with I strata.
struct StratumTable {
  std::vector<double> p, nu_phi, nu_phi2, sigma;
};
StratumTable stratum_table(const ConditionalMomentModel& model, int I);

struct VarianceLimitRow {
  int I = 0;
  double m_variance = 0.0;  // sum_i p_i^2 sigma_i^2 / q_i (the M * variance limit)
};

// M * variance at each I against the limiting value, for the allocation
// deduced from the given density.
std::vector<VarianceLimitRow> variance_limit_table(const ConditionalMomentModel& model,
                                  std::span<const int> I_list, AllocationDensity density);

// L1 distance between the optimal allocation vector and the cell integrals
// of the optimal density (vanishes as I grows).
double optimal_density_gap(const ConditionalMomentModel& model, int I);

// Empirical variance of R independent stratified estimates.
double brute_force_estimator_variance(const GaussianPayoff& payoff,
                                      const StratificationMatrix& mu, const StrataGrid& grid,
                                      std::span<const double> q, std::int64_t M, int R,
                                      std::uint64_t seed);

// Two-dimensional test integrand for the gradient checks (d = 2, m = 1,
// direction mu(theta) = (cos theta, sin theta)); conditional moments are
// evaluated by quadrature along the conditioning line.
struct TestIntegrand2D {
  std::function<double(double, double)> phi;
};

double quadrature_V(const TestIntegrand2D& integrand, int I, double theta);
Eigen::Vector2d quadrature_grad_V(const TestIntegrand2D& integrand, int I, double theta);
// Directional derivative of V along theta: <grad V, dmu/dtheta>.
double quadrature_grad_V_theta(const TestIntegrand2D& integrand, int I, double theta);
// Central finite difference of the quadrature V.
double finite_difference_gradV(const TestIntegrand2D& integrand, int I, double theta,
                               double step = 1e-4);

// Mean and variance of the standard normal restricted to (a, b); infinite
// endpoints allowed, far tails computed through log survival differences.
std::pair<double, double> truncated_normal_moments(double a, double b);

}  // namespace adastrat::oracle
