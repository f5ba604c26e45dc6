#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "adastrat/errors.hpp"
#include "adastrat/normal.hpp"
#include "adastrat/payoffs.hpp"

using namespace adastrat;

namespace {

class ExpPayoff final : public GaussianPayoff {
 public:
  explicit ExpPayoff(Eigen::VectorXd a) : a_(std::move(a)) {}
  int dim() const override { return static_cast<int>(a_.size()); }
  double evaluate(std::span<const double> y, RandomStream*) const override {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a_.size(); ++i) s += a_(i) * y[static_cast<std::size_t>(i)];
    return std::exp(s);
  }

 private:
  Eigen::VectorXd a_;
};

class NormSquaredPayoff final : public GaussianPayoff {
 public:
  explicit NormSquaredPayoff(int d) : d_(d) {}
  int dim() const override { return d_; }
  double evaluate(std::span<const double> y, RandomStream*) const override {
    double s = 0.0;
    for (double v : y) s += v * v;
    return s;
  }

 private:
  int d_;
};

Eigen::VectorXd random_point(int d, RandomStream& stream) {
  Eigen::VectorXd y(d);
  for (int i = 0; i < d; ++i) y(i) = stream.next_normal();
  return y;
}

double mc_mean(const GaussianPayoff& payoff, std::int64_t n, std::uint64_t seed,
               double* se_out = nullptr) {
  RandomStream stream(seed, 1);
  const int d = payoff.dim();
  Eigen::VectorXd y(d);
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) y(j) = stream.next_normal();
    RandomStream aux(seed, substream_key(50, 0, static_cast<std::uint64_t>(i)));
    RandomStream* aux_ptr = payoff.requires_aux() ? &aux : nullptr;
    const double v = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / double(n);
  if (se_out != nullptr) {
    *se_out = std::sqrt(std::max(sum_sq / double(n) - mean * mean, 0.0) / double(n));
  }
  return mean;
}

}  // namespace

TEST_CASE("asian payoff: independent recomputation at y = 0, tail cases") {
  AsianParams p;
  p.vol = 0.1;
  p.strike = 45.0;
  const auto payoff = make_asian_payoff(p);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(16);
  // independent route: build the price path explicitly step by step
  double s = 50.0;
  double avg = 0.0;
  for (int k = 0; k < 16; ++k) {
    s *= std::exp((0.05 - 0.5 * 0.01) / 16.0);
    avg += s;
  }
  avg /= 16.0;
  const double expected = std::exp(-0.05) * std::max(avg - 45.0, 0.0);
  CHECK(payoff->evaluate(std::span<const double>(zero.data(), 16)) ==
        doctest::Approx(expected).epsilon(1e-12));

  AsianParams deep = p;
  deep.strike = 1e9;
  const auto dead = make_asian_payoff(deep);
  RandomStream stream(60, 0);
  CHECK(dead->evaluate(std::span<const double>(random_point(16, stream).data(), 16)) == 0.0);

  AsianParams flat = p;
  flat.vol = 0.0;
  const auto deterministic = make_asian_payoff(flat);
  const Eigen::VectorXd y1 = random_point(16, stream);
  const Eigen::VectorXd y2 = random_point(16, stream);
  CHECK(deterministic->evaluate(std::span<const double>(y1.data(), 16)) ==
        deterministic->evaluate(std::span<const double>(y2.data(), 16)));
}

TEST_CASE("barrier payoff: inactive and killing barriers") {
  BarrierParams p;
  p.base.vol = 0.1;
  p.base.strike = 50.0;
  p.barrier = 1e12;
  const auto barrier = make_barrier_payoff(p);
  const auto plain = make_asian_payoff(p.base);
  RandomStream stream(61, 0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd y = random_point(16, stream);
    CHECK(barrier->evaluate(std::span<const double>(y.data(), 16)) ==
          plain->evaluate(std::span<const double>(y.data(), 16)));
  }
  // terminal price at y = 0 is s0 e^{(r - v^2/2) T} = 50 e^{0.045} > 40
  BarrierParams killed = p;
  killed.barrier = 40.0;
  const auto dead = make_barrier_payoff(killed);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(16);
  CHECK(dead->evaluate(std::span<const double>(zero.data(), 16)) == 0.0);

  BarrierParams table = p;
  table.barrier = 80.0;
  const auto b80 = make_barrier_payoff(table);
  // independent recomputation: terminal below the barrier, payoff plain
  double s = 50.0, avg = 0.0;
  for (int k = 0; k < 16; ++k) {
    s *= std::exp((0.05 - 0.005) / 16.0);
    avg += s;
  }
  avg /= 16.0;
  const double expected = std::exp(-0.05) * std::max(avg - 50.0, 0.0);
  CHECK(b80->evaluate(std::span<const double>(zero.data(), 16)) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("basket payoff: correlation root, rank-1 limit, Black-Scholes cross-check") {
  {
    for (double c : {0.0, 0.1, 0.5, 0.9, 1.0}) {
      const int d = 8;
      const Eigen::MatrixXd root = basket_correlation_root(d, c);
      Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(d, d, c);
      sigma.diagonal().setOnes();
      CHECK((root * root.transpose() - sigma).cwiseAbs().maxCoeff() <= 1e-10);
    }
    CHECK_THROWS_AS((void)basket_correlation_root(40, -0.5), std::invalid_argument);
  }
  {
    // c = 1 in two dimensions: the payoff only sees y through y_1 + y_2
    BasketParams p;
    p.assets = 2;
    p.correlation = 1.0;
    p.strike = 45.0;
    p.spots = {50.0, 70.0};
    p.vols = {0.2, 0.3};
    p.weights = {0.5, 0.5};
    const auto payoff = make_basket_payoff(p);
    RandomStream stream(62, 0);
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd y = random_point(2, stream);
      Eigen::VectorXd swapped(2);
      swapped << y(1), y(0);
      CHECK(payoff->evaluate(std::span<const double>(y.data(), 2)) ==
            doctest::Approx(payoff->evaluate(std::span<const double>(swapped.data(), 2)))
                .epsilon(1e-12));
    }
  }
  {
    // single-asset weights reduce to a European call priced by Black-Scholes
    BasketParams p;
    p.assets = 5;
    p.correlation = 0.3;
    p.strike = 50.0;
    p.weights = {1.0, 0.0, 0.0, 0.0, 0.0};
    p.spots = {60.0, 40.0, 55.0, 30.0, 70.0};
    p.vols = {0.25, 0.2, 0.2, 0.2, 0.2};
    const auto payoff = make_basket_payoff(p);
    double se = 0.0;
    const double mc = mc_mean(*payoff, 200000, 63, &se);
    const double s0 = 60.0, k = 50.0, r = 0.05, t = 1.0, v = 0.25;
    const double d1 = (std::log(s0 / k) + (r + 0.5 * v * v) * t) / (v * std::sqrt(t));
    const double d2 = d1 - v * std::sqrt(t);
    const double bs = s0 * std_normal_cdf(d1) - k * std::exp(-r * t) * std_normal_cdf(d2);
    CHECK(std::abs(mc - bs) < 3.0 * se);
  }
}

TEST_CASE("heston payoff: construction guards and the degenerate reduction") {
  {
    HestonParams bad;
    bad.vol_of_vol = 1.0;  // 1 > 4 * 2 * 0.01
    CHECK_THROWS_AS((void)make_heston_payoff(bad), std::invalid_argument);
  }
  {
    // theta = xi0, sigma -> 0, rho = 0: the variance path is flat and the
    // discrete-average price path matches the Asian payoff exactly.
    HestonParams p;
    p.xi0 = 0.01;
    p.long_run_variance = 0.01;
    p.vol_of_vol = 0.0;
    p.rho = 0.0;
    p.averaging = HestonParams::Averaging::Discrete;
    const auto heston = make_heston_payoff(p);
    AsianParams a;
    a.s0 = p.s0;
    a.r = p.r;
    a.T = p.T;
    a.strike = p.strike;
    a.vol = 0.1;  // sqrt(xi0)
    a.steps = p.steps;
    const auto asian = make_asian_payoff(a);
    RandomStream stream(64, 0);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd y = random_point(100, stream);
      RandomStream aux(64, substream_key(51, 0, static_cast<std::uint64_t>(i)));
      const double h = heston->evaluate(std::span<const double>(y.data(), 100), &aux);
      const Eigen::VectorXd tail = y.segment(50, 50);
      const double ref = asian->evaluate(std::span<const double>(tail.data(), 50));
      REQUIRE(std::abs(h - ref) <= 1e-9 * (1.0 + std::abs(ref)));
    }
  }
  {
    HestonParams p;
    p.strike = 1e9;
    const auto payoff = make_heston_payoff(p);
    RandomStream stream(64, 1);
    const Eigen::VectorXd y = random_point(100, stream);
    RandomStream aux(64, 2);
    CHECK(payoff->evaluate(std::span<const double>(y.data(), 100), &aux) == 0.0);
  }
  {
    // the splitting scheme and the full-truncation Euler cross-check agree
    HestonParams p;
    double se1 = 0.0, se2 = 0.0;
    const double m1 = mc_mean(*make_heston_payoff(p), 100000, 65, &se1);
    p.scheme = HestonParams::Scheme::EulerFullTruncation;
    const double m2 = mc_mean(*make_heston_payoff(p), 100000, 65, &se2);
    CHECK(std::abs(m1 - m2) < 4.0 * std::sqrt(se1 * se1 + se2 * se2) + 0.02);
  }
}

TEST_CASE("apply_drift: zero drift is the identity, likelihood ratio integrates to one") {
  AsianParams ap;
  ap.vol = 0.1;
  ap.strike = 45.0;
  const auto base = make_asian_payoff(ap);
  {
    const auto same = apply_drift(base, Eigen::VectorXd::Zero(16));
    RandomStream stream(66, 0);
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd y = random_point(16, stream);
      CHECK(same->evaluate(std::span<const double>(y.data(), 16)) ==
            doctest::Approx(base->evaluate(std::span<const double>(y.data(), 16)))
                .epsilon(1e-12));
    }
  }
  {
    class OnePayoff final : public GaussianPayoff {
     public:
      int dim() const override { return 6; }
      double evaluate(std::span<const double>, RandomStream*) const override { return 1.0; }
    };
    RandomStream init(66, 1);
    Eigen::VectorXd nu = random_point(6, init);
    const auto ratio = apply_drift(std::make_shared<OnePayoff>(), nu);
    double se = 0.0;
    const double mean = mc_mean(*ratio, 200000, 67, &se);
    CHECK(std::abs(mean - 1.0) < 3.0 * se);
  }
  {
    // the drifted estimand keeps the Asian expectation
    const Eigen::VectorXd nu = optimal_drift(*base);
    const auto drifted = apply_drift(base, nu);
    double se0 = 0.0, se1 = 0.0;
    const double m0 = mc_mean(*base, 300000, 68, &se0);
    const double m1 = mc_mean(*drifted, 300000, 69, &se1);
    CHECK(std::abs(m0 - m1) < 3.0 * std::sqrt(se0 * se0 + se1 * se1));
  }
}

TEST_CASE("optimal_drift: exact recovery for the exponential integrand") {
  RandomStream init(70, 0);
  Eigen::VectorXd a = random_point(5, init);
  const ExpPayoff payoff(a);
  const Eigen::VectorXd nu = optimal_drift(payoff);
  CHECK((nu - a).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("optimal_drift: reported norms for the tabulated configurations") {
  {
    AsianParams p;
    p.vol = 0.1;
    p.strike = 45.0;
    const auto payoff = make_asian_payoff(p);
    CHECK(std::abs(optimal_drift(*payoff).norm() - 0.42) < 0.05);
  }
  {
    BarrierParams p;
    p.base.vol = 0.1;
    p.base.strike = 50.0;
    p.barrier = 60.0;
    const auto payoff = make_barrier_payoff(p);
    CHECK(std::abs(optimal_drift(*payoff).norm() - 0.84) < 0.08);
  }
}

TEST_CASE("regression_direction: recovers a linear direction, rejects even integrands") {
  {
    RandomStream init(71, 0);
    Eigen::VectorXd a = random_point(6, init);
    class LinearPayoff final : public GaussianPayoff {
     public:
      explicit LinearPayoff(Eigen::VectorXd a) : a_(std::move(a)) {}
      int dim() const override { return static_cast<int>(a_.size()); }
      double evaluate(std::span<const double> y, RandomStream*) const override {
        double s = 0.0;
        for (Eigen::Index i = 0; i < a_.size(); ++i) {
          s += a_(i) * y[static_cast<std::size_t>(i)];
        }
        return s;
      }

     private:
      Eigen::VectorXd a_;
    };
    const LinearPayoff payoff(a);
    RandomStream stream(72, 0);
    const Eigen::VectorXd mu = regression_direction(payoff, 100000, stream);
    const double angle = std::acos(std::min(1.0, std::abs(mu.dot(a) / a.norm())));
    CHECK(angle < 0.05);
  }
  {
    const NormSquaredPayoff payoff(4);
    RandomStream stream(73, 0);
    CHECK_THROWS_AS((void)regression_direction(payoff, 50000, stream), degenerate_error);
  }
}

TEST_CASE("guess directions") {
  {
    const Eigen::VectorXd mu = guess_direction_asian(16);
    CHECK(mu.size() == 16);
    CHECK(std::abs(mu.norm() - 1.0) < 1e-12);
    CHECK(mu(0) / mu(15) == doctest::Approx(16.0));
    CHECK(mu(1) / mu(15) == doctest::Approx(15.0));
  }
  {
    BasketParams p;
    p.assets = 4;
    p.correlation = 0.5;
    p.weights = {1.0, 0.0, 0.0, 0.0};
    p.spots = {50.0, 60.0, 70.0, 80.0};
    p.vols = {0.1, 0.2, 0.3, 0.4};
    const Eigen::VectorXd mu = guess_direction_basket(p);
    // with alpha = e_1 the guess is proportional to the first row of the root
    const Eigen::MatrixXd root = basket_correlation_root(4, 0.5);
    const Eigen::VectorXd row = root.row(0).transpose();
    const double cosine = std::abs(mu.dot(row) / row.norm());
    CHECK(cosine == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("payoffs stay nonnegative with finite second moments") {
  AsianParams ap;
  ap.vol = 1.0;
  ap.strike = 45.0;
  const auto asian = make_asian_payoff(ap);
  BasketParams bp;
  bp.assets = 10;
  bp.correlation = 0.9;
  const auto basket = make_basket_payoff(bp);
  HestonParams hp;
  const auto heston = make_heston_payoff(hp);
  RandomStream stream(74, 0);
  double second_asian = 0.0, second_basket = 0.0, second_heston = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd y16 = random_point(16, stream);
    const Eigen::VectorXd y10 = random_point(10, stream);
    const Eigen::VectorXd y100 = random_point(100, stream);
    RandomStream aux(74, substream_key(52, 0, static_cast<std::uint64_t>(i)));
    const double va = asian->evaluate(std::span<const double>(y16.data(), 16));
    const double vb = basket->evaluate(std::span<const double>(y10.data(), 10));
    const double vh = heston->evaluate(std::span<const double>(y100.data(), 100), &aux);
    REQUIRE(va >= 0.0);
    REQUIRE(vb >= 0.0);
    REQUIRE(vh >= 0.0);
    second_asian += va * va;
    second_basket += vb * vb;
    second_heston += vh * vh;
  }
  CHECK(std::isfinite(second_asian));
  CHECK(std::isfinite(second_basket));
  CHECK(std::isfinite(second_heston));
}
