#include "adastrat/payoffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/normal.hpp"

namespace adastrat {

namespace {

class AsianPayoff final : public GaussianPayoff {
 public:
  explicit AsianPayoff(const AsianParams& p) : p_(p) {
    if (p_.steps < 1) throw std::invalid_argument("asian: steps must be >= 1");
    if (p_.s0 <= 0.0 || p_.T <= 0.0) throw std::invalid_argument("asian: s0 and T must be > 0");
    if (p_.vol < 0.0) throw std::invalid_argument("asian: negative volatility");
    dt_drift_ = (p_.r - 0.5 * p_.vol * p_.vol) * p_.T / p_.steps;
    vol_step_ = p_.vol * std::sqrt(p_.T / p_.steps);
    discount_ = std::exp(-p_.r * p_.T);
  }

  int dim() const override { return p_.steps; }

  double evaluate(std::span<const double> y, RandomStream*) const override {
    double brownian = 0.0;
    double avg = 0.0;
    for (int k = 0; k < p_.steps; ++k) {
      brownian += y[static_cast<std::size_t>(k)];
      avg += std::exp(dt_drift_ * (k + 1) + vol_step_ * brownian);
    }
    avg *= p_.s0 / p_.steps;
    return discount_ * std::max(avg - p_.strike, 0.0);
  }

 private:
  AsianParams p_;
  double dt_drift_, vol_step_, discount_;
};

class BarrierPayoff final : public GaussianPayoff {
 public:
  explicit BarrierPayoff(const BarrierParams& p) : base_(p.base), s0_(p.base.s0), barrier_(p.barrier) {
    terminal_drift_ = (p.base.r - 0.5 * p.base.vol * p.base.vol) * p.base.T;
    vol_step_ = p.base.vol * std::sqrt(p.base.T / p.base.steps);
  }

  int dim() const override { return base_.dim(); }

  double evaluate(std::span<const double> y, RandomStream* aux) const override {
    double brownian = 0.0;
    for (int k = 0; k < dim(); ++k) brownian += y[static_cast<std::size_t>(k)];
    const double terminal = s0_ * std::exp(terminal_drift_ + vol_step_ * brownian);
    if (terminal > barrier_) return 0.0;
    return base_.evaluate(y, aux);
  }

 private:
  AsianPayoff base_;
  double s0_, barrier_;
  double terminal_drift_, vol_step_;
};

class BasketPayoff final : public GaussianPayoff {
 public:
  explicit BasketPayoff(const BasketParams& p)
      : assets_(p.assets), strike_(p.strike), root_(basket_correlation_root(p.assets, p.correlation)) {
    if (p.assets < 1) throw std::invalid_argument("basket: assets must be >= 1");
    weights_ = p.weights.empty() ? std::vector<double>(p.assets, 1.0 / p.assets) : p.weights;
    spots_ = p.spots.empty() ? basket_default_spots(p.assets, p.spot_seed) : p.spots;
    vols_ = p.vols.empty() ? basket_default_vols(p.assets) : p.vols;
    if (static_cast<int>(weights_.size()) != p.assets || static_cast<int>(spots_.size()) != p.assets ||
        static_cast<int>(vols_.size()) != p.assets) {
      throw std::invalid_argument("basket: weights/spots/vols must have one entry per asset");
    }
    discount_ = std::exp(-p.r * p.T);
    scale_.resize(p.assets);
    volT_.resize(p.assets);
    for (int k = 0; k < p.assets; ++k) {
      scale_[k] = weights_[k] * spots_[k] * std::exp((p.r - 0.5 * vols_[k] * vols_[k]) * p.T);
      volT_[k] = vols_[k] * std::sqrt(p.T);
    }
  }

  int dim() const override { return assets_; }

  double evaluate(std::span<const double> y, RandomStream*) const override {
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), assets_);
    Eigen::VectorXd correlated = root_ * yv;
    double basket = 0.0;
    for (int k = 0; k < assets_; ++k) {
      basket += scale_[static_cast<std::size_t>(k)] *
                std::exp(volT_[static_cast<std::size_t>(k)] * correlated(k));
    }
    return discount_ * std::max(basket - strike_, 0.0);
  }

  const Eigen::MatrixXd& correlation_root() const { return root_; }

 private:
  int assets_;
  double strike_, discount_;
  Eigen::MatrixXd root_;
  std::vector<double> weights_, spots_, vols_, scale_, volT_;
};

class HestonPayoff final : public GaussianPayoff {
 public:
  explicit HestonPayoff(const HestonParams& p) : p_(p) {
    if (p_.steps < 1) throw std::invalid_argument("heston: steps must be >= 1");
    if (p_.rho < -1.0 || p_.rho > 1.0) throw std::invalid_argument("heston: |rho| must be <= 1");
    if (p_.xi0 < 0.0 || p_.long_run_variance < 0.0 || p_.mean_reversion < 0.0) {
      throw std::invalid_argument("heston: variance parameters must be nonnegative");
    }
    if (p_.vol_of_vol * p_.vol_of_vol > 4.0 * p_.mean_reversion * p_.long_run_variance) {
      throw std::invalid_argument("heston: requires vol_of_vol^2 <= 4 k theta");
    }
    // The splitting scheme recovers the correlated price noise through the
    // variance increment divided by vol_of_vol; at vol_of_vol = 0 that term
    // vanishes, which is only consistent when rho = 0.
    if (p_.scheme == HestonParams::Scheme::Splitting && p_.vol_of_vol == 0.0 && p_.rho != 0.0) {
      throw std::invalid_argument("heston: vol_of_vol = 0 with rho != 0 needs the euler scheme");
    }
    h_ = p_.T / p_.steps;
    theta2_ = p_.long_run_variance -
              p_.vol_of_vol * p_.vol_of_vol / (4.0 * std::max(p_.mean_reversion, 1e-300));
    if (p_.mean_reversion == 0.0) theta2_ = 0.0;
    ortho_ = std::sqrt(1.0 - p_.rho * p_.rho);
    discount_ = std::exp(-p_.r * p_.T);
  }

  int dim() const override { return 2 * p_.steps; }
  bool requires_aux() const override { return p_.scheme == HestonParams::Scheme::Splitting; }

  double evaluate(std::span<const double> y, RandomStream* aux) const override {
    if (requires_aux() && aux == nullptr) {
      throw std::invalid_argument("heston: payoff requires an auxiliary stream");
    }
    const double integral = p_.scheme == HestonParams::Scheme::Splitting
                                ? simulate_splitting(y, *aux)
                                : simulate_euler(y);
    return discount_ * std::max(integral / p_.T - p_.strike, 0.0);
  }

 private:
  // Half-step exact flow of the variance drift ODE; theta2 >= 0 keeps it
  // nonnegative.
  double drift_flow(double x, double t) const {
    return theta2_ + (x - theta2_) * std::exp(-p_.mean_reversion * t);
  }

  // Variance step: exact drift ODE halves around the squared diffusion flow.
  double variance_step(double xi, double z) const {
    const double mid = drift_flow(xi, 0.5 * h_);
    const double root = std::sqrt(mid) + 0.5 * p_.vol_of_vol * std::sqrt(h_) * z;
    return drift_flow(root * root, 0.5 * h_);
  }

  double simulate_splitting(std::span<const double> y, RandomStream& aux) const {
    const double k = p_.mean_reversion;
    const double theta = p_.long_run_variance;
    const double sigma = p_.vol_of_vol;
    double xi = p_.xi0;
    double log_s = std::log(p_.s0);
    double s_prev = p_.s0;
    double integral = 0.0;
    for (int i = 0; i < p_.steps; ++i) {
      const double z1 = y[static_cast<std::size_t>(i)];
      const double z2 = y[static_cast<std::size_t>(p_.steps + i)];
      const bool correlated_first = (aux.next_u64() & 1u) != 0;

      // Flow driven by W^2 with the variance frozen: exact lognormal step.
      auto flow_ortho = [&]() {
        log_s += -0.5 * ortho_ * ortho_ * xi * h_ + ortho_ * std::sqrt(xi * h_) * z2;
      };
      // Flow driven by W^1: the variance moves and the price picks up the
      // correlated part through the integrated variance identity
      // int sqrt(xi) dW^1 = (xi' - xi - k theta h + k int xi dt) / sigma.
      auto flow_corr = [&]() {
        const double xi_new = variance_step(xi, z1);
        const double iv = 0.5 * h_ * (xi + xi_new);
        double increment = p_.r * h_ - 0.5 * p_.rho * p_.rho * iv;
        if (sigma > 0.0) {
          increment += p_.rho / sigma * (xi_new - xi - k * theta * h_ + k * iv);
        }
        log_s += increment;
        xi = xi_new;
      };

      if (correlated_first) {
        flow_corr();
        flow_ortho();
      } else {
        flow_ortho();
        flow_corr();
      }
      const double s = std::exp(log_s);
      integral += p_.averaging == HestonParams::Averaging::Trapezoid
                      ? 0.5 * h_ * (s_prev + s)
                      : h_ * s;
      s_prev = s;
    }
    return integral;
  }

  double simulate_euler(std::span<const double> y) const {
    double xi = p_.xi0;
    double log_s = std::log(p_.s0);
    double s_prev = p_.s0;
    double integral = 0.0;
    for (int i = 0; i < p_.steps; ++i) {
      const double z1 = y[static_cast<std::size_t>(i)];
      const double z2 = y[static_cast<std::size_t>(p_.steps + i)];
      const double xp = std::max(xi, 0.0);
      const double vol_h = std::sqrt(xp * h_);
      log_s += (p_.r - 0.5 * xp) * h_ + vol_h * (p_.rho * z1 + ortho_ * z2);
      xi += p_.mean_reversion * (p_.long_run_variance - xp) * h_ +
            p_.vol_of_vol * vol_h * z1;
      const double s = std::exp(log_s);
      integral += p_.averaging == HestonParams::Averaging::Trapezoid
                      ? 0.5 * h_ * (s_prev + s)
                      : h_ * s;
      s_prev = s;
    }
    return integral;
  }

  HestonParams p_;
  double h_, theta2_, ortho_, discount_;
};

class DriftedPayoff final : public GaussianPayoff {
 public:
  DriftedPayoff(PayoffPtr base, Eigen::VectorXd nu)
      : base_(std::move(base)), nu_(std::move(nu)), half_norm2_(0.5 * nu_.squaredNorm()) {
    if (nu_.size() != base_->dim()) {
      throw std::invalid_argument("apply_drift: drift dimension mismatch");
    }
  }

  int dim() const override { return base_->dim(); }
  bool requires_aux() const override { return base_->requires_aux(); }

  double evaluate(std::span<const double> y, RandomStream* aux) const override {
    const int d = dim();
    Eigen::VectorXd shifted(d);
    double dot = 0.0;
    for (int i = 0; i < d; ++i) {
      shifted(i) = y[static_cast<std::size_t>(i)] + nu_(i);
      dot += nu_(i) * y[static_cast<std::size_t>(i)];
    }
    const double base = base_->evaluate(std::span<const double>(shifted.data(), d), aux);
    if (base == 0.0) return 0.0;
    return base * std::exp(-dot - half_norm2_);
  }

 private:
  PayoffPtr base_;
  Eigen::VectorXd nu_;
  double half_norm2_;
};

}  // namespace

PayoffPtr make_asian_payoff(const AsianParams& params) {
  return std::make_shared<AsianPayoff>(params);
}

PayoffPtr make_barrier_payoff(const BarrierParams& params) {
  return std::make_shared<BarrierPayoff>(params);
}

PayoffPtr make_basket_payoff(const BasketParams& params) {
  return std::make_shared<BasketPayoff>(params);
}

PayoffPtr make_heston_payoff(const HestonParams& params) {
  return std::make_shared<HestonPayoff>(params);
}

Eigen::MatrixXd basket_correlation_root(int assets, double correlation) {
  if (assets < 1) throw std::invalid_argument("basket: assets must be >= 1");
  const double min_corr = assets > 1 ? -1.0 / (assets - 1) : -1.0;
  if (correlation > 1.0 || correlation < min_corr) {
    throw std::invalid_argument("basket: correlation matrix is not positive semidefinite");
  }
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(assets, assets, correlation);
  sigma.diagonal().setOnes();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-12) {
      throw std::invalid_argument("basket: correlation matrix is not positive semidefinite");
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<double> basket_default_spots(int assets, std::uint64_t spot_seed) {
  RandomStream stream(spot_seed, substream_key(9, 0, 0));
  std::vector<double> spots(static_cast<std::size_t>(assets));
  for (double& s : spots) s = 20.0 + 60.0 * stream.next_uniform();
  return spots;
}

std::vector<double> basket_default_vols(int assets) {
  std::vector<double> vols(static_cast<std::size_t>(assets));
  if (assets == 1) {
    vols[0] = 0.1;
    return vols;
  }
  for (int k = 0; k < assets; ++k) {
    vols[static_cast<std::size_t>(k)] = 0.1 + 0.3 * k / (assets - 1.0);
  }
  return vols;
}

PayoffPtr apply_drift(PayoffPtr payoff, Eigen::VectorXd nu) {
  return std::make_shared<DriftedPayoff>(std::move(payoff), std::move(nu));
}

namespace {

double drift_objective(const GaussianPayoff& payoff, const Eigen::VectorXd& nu,
                       const DriftOptions& options) {
  RandomStream aux(options.aux_seed, substream_key(10, 0, 0));
  RandomStream* aux_ptr = payoff.requires_aux() ? &aux : nullptr;
  const double value =
      payoff.evaluate(std::span<const double>(nu.data(), nu.size()), aux_ptr);
  if (value <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(value) - 0.5 * nu.squaredNorm();
}

}  // namespace

Eigen::VectorXd optimal_drift(const GaussianPayoff& payoff, const DriftOptions& options) {
  const int d = payoff.dim();
  const Eigen::VectorXd diag = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));

  Eigen::VectorXd nu;
  double value = -std::numeric_limits<double>::infinity();
  for (double c : {0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5, 2.0, -2.0, 3.0, -3.0,
                   4.0, -4.0, 6.0, -6.0}) {
    Eigen::VectorXd probe = c * diag;
    const double v = drift_objective(payoff, probe, options);
    if (std::isfinite(v)) {
      nu = std::move(probe);
      value = v;
      break;
    }
  }
  if (!std::isfinite(value)) {
    throw degenerate_error("optimal_drift: no feasible start along the diagonal probe");
  }

  Eigen::VectorXd grad(d), probe(d);
  for (int it = 0; it < options.max_iterations; ++it) {
    // Central differences, one-sided next to the feasibility boundary.
    for (int i = 0; i < d; ++i) {
      probe = nu;
      probe(i) = nu(i) + options.fd_step;
      const double up = drift_objective(payoff, probe, options);
      probe(i) = nu(i) - options.fd_step;
      const double down = drift_objective(payoff, probe, options);
      if (std::isfinite(up) && std::isfinite(down)) {
        grad(i) = (up - down) / (2.0 * options.fd_step);
      } else if (std::isfinite(up)) {
        grad(i) = (up - value) / options.fd_step;
      } else if (std::isfinite(down)) {
        grad(i) = (value - down) / options.fd_step;
      } else {
        grad(i) = 0.0;
      }
    }
    const double gnorm = grad.norm();
    if (gnorm <= options.gradient_tolerance) break;

    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-12) {
      probe = nu + alpha * grad;
      const double v = drift_objective(payoff, probe, options);
      if (std::isfinite(v) && v >= value + 1e-4 * alpha * gnorm * gnorm) {
        nu = probe;
        value = v;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  return nu;
}

Eigen::VectorXd regression_direction(const GaussianPayoff& payoff, std::int64_t n_pilot,
                                     RandomStream& stream) {
  if (n_pilot < 1000) throw std::invalid_argument("regression_direction: pilot too small");
  const int d = payoff.dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd y(d);
  for (std::int64_t n = 0; n < n_pilot; ++n) {
    for (int i = 0; i < d; ++i) y(i) = stream.next_normal();
    RandomStream aux = stream.at_substream(
        substream_key(11, 0, static_cast<std::uint64_t>(n)));
    RandomStream* aux_ptr = payoff.requires_aux() ? &aux : nullptr;
    const double value = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
    for (int i = 0; i < d; ++i) {
      const double t = y(i) * value;
      sum(i) += t;
      sum_sq(i) += t * t;
    }
  }
  const Eigen::VectorXd mean = sum / static_cast<double>(n_pilot);
  // Standard error of the estimated coefficient vector; a norm within noise
  // of zero carries no direction information.
  double se2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double var = sum_sq(i) / n_pilot - mean(i) * mean(i);
    se2 += std::max(var, 0.0) / static_cast<double>(n_pilot);
  }
  if (mean.squaredNorm() <= 9.0 * se2 || mean.norm() == 0.0) {
    throw degenerate_error("regression_direction: estimate indistinguishable from zero");
  }
  return mean / mean.norm();
}

Eigen::VectorXd guess_direction_asian(int steps) {
  if (steps < 1) throw std::invalid_argument("guess_direction_asian: steps must be >= 1");
  Eigen::VectorXd v(steps);
  for (int k = 0; k < steps; ++k) v(k) = static_cast<double>(steps - k);
  return v / v.norm();
}

Eigen::VectorXd guess_direction_basket(const BasketParams& params) {
  const int d = params.assets;
  const std::vector<double> weights =
      params.weights.empty() ? std::vector<double>(d, 1.0 / d) : params.weights;
  const std::vector<double> spots =
      params.spots.empty() ? basket_default_spots(d, params.spot_seed) : params.spots;
  const std::vector<double> vols = params.vols.empty() ? basket_default_vols(d) : params.vols;
  Eigen::VectorXd w(d);
  for (int k = 0; k < d; ++k) {
    w(k) = weights[static_cast<std::size_t>(k)] * spots[static_cast<std::size_t>(k)] *
           std::exp((params.r - 0.5 * vols[static_cast<std::size_t>(k)] *
                                     vols[static_cast<std::size_t>(k)]) *
                    params.T) *
           vols[static_cast<std::size_t>(k)];
  }
  Eigen::VectorXd v = basket_correlation_root(d, params.correlation).transpose() * w;
  return v / v.norm();
}

}  // namespace adastrat
