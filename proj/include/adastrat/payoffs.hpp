#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "adastrat/rng.hpp"

namespace adastrat {

// Nonnegative payoff of a standard Gaussian vector. Evaluation is pure; the
// optional stream supplies auxiliary randomness that is deliberately kept
// out of the stratification (Heston Bernoulli ordering).
class GaussianPayoff {
 public:
  virtual ~GaussianPayoff() = default;
  virtual int dim() const = 0;
  virtual bool requires_aux() const { return false; }
  virtual double evaluate(std::span<const double> y, RandomStream* aux = nullptr) const = 0;

  double operator()(std::span<const double> y, RandomStream* aux = nullptr) const {
    return evaluate(y, aux);
  }
};

using PayoffPtr = std::shared_ptr<GaussianPayoff>;

// ---------------------------------------------------------------------------
// Model parameter blocks

struct AsianParams {
  double s0 = 50.0;
  double r = 0.05;
  double vol = 0.1;
  double T = 1.0;
  double strike = 45.0;
  int steps = 16;  // monitoring dates = driving dimension
};

struct BarrierParams {
  AsianParams base;   // strike/vol/... of the averaged payoff
  double barrier = 60.0;  // knock-out level on the terminal price
};

struct BasketParams {
  int assets = 40;
  double correlation = 0.1;  // off-diagonal of the equicorrelation matrix
  double r = 0.05;
  double T = 1.0;
  double strike = 45.0;
  std::vector<double> weights;  // defaults to 1/d
  std::vector<double> spots;    // defaults to U[20,80] draws from spot_seed
  std::vector<double> vols;     // defaults to linspace [0.1, 0.4], ascending
  std::uint64_t spot_seed = 20080;
};

struct HestonParams {
  double s0 = 100.0;
  double xi0 = 0.01;   // initial variance
  double mean_reversion = 2.0;
  double long_run_variance = 0.01;
  double vol_of_vol = 0.2;
  double rho = -0.5;
  double r = 0.095;
  double T = 1.0;
  double strike = 100.0;
  int steps = 50;  // driving dimension is 2 * steps
  enum class Scheme { Splitting, EulerFullTruncation } scheme = Scheme::Splitting;
  enum class Averaging { Trapezoid, Discrete } averaging = Averaging::Trapezoid;
};

// ---------------------------------------------------------------------------
// Payoff factories

PayoffPtr make_asian_payoff(const AsianParams& params);
PayoffPtr make_barrier_payoff(const BarrierParams& params);
// Throws std::invalid_argument if the correlation matrix is not positive
// semidefinite or the parameter vectors have the wrong length.
PayoffPtr make_basket_payoff(const BasketParams& params);
// Throws std::invalid_argument unless vol_of_vol^2 <= 4 k theta.
PayoffPtr make_heston_payoff(const HestonParams& params);

// Square root of the basket correlation matrix (Cholesky when positive
// definite, symmetric eigendecomposition with eigenvalues clipped at zero
// otherwise).
Eigen::MatrixXd basket_correlation_root(int assets, double correlation);
std::vector<double> basket_default_spots(int assets, std::uint64_t spot_seed);
std::vector<double> basket_default_vols(int assets);

// ---------------------------------------------------------------------------
// Cameron-Martin drift

// y -> payoff(y + nu) * exp(-nu^T y - nu^T nu / 2); same expectation.
PayoffPtr apply_drift(PayoffPtr payoff, Eigen::VectorXd nu);

struct DriftOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  double fd_step = 1e-5;
  std::uint64_t aux_seed = 7;  // only used when the payoff needs aux noise
};

// Maximizer of ln payoff(nu) - |nu|^2/2 by gradient ascent with central
// difference gradients and a backtracking line search that keeps
// payoff(nu) > 0. Throws degenerate_error when no feasible start is found
// on the diagonal probe; callers proceed with nu = 0.
Eigen::VectorXd optimal_drift(const GaussianPayoff& payoff, const DriftOptions& options = {});

// Pilot-run regression direction: normalized mean of y * payoff(y).
// Throws degenerate_error when the estimate is numerically zero.
Eigen::VectorXd regression_direction(const GaussianPayoff& payoff, std::int64_t n_pilot,
                                     RandomStream& stream);

// Fixed per-model guesses; only defined for the averaged payoffs and the
// basket. Throws std::invalid_argument for other models.
Eigen::VectorXd guess_direction_asian(int steps);
Eigen::VectorXd guess_direction_basket(const BasketParams& params);

}  // namespace adastrat
