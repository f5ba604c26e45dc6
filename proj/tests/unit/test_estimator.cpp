#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "adastrat/estimator.hpp"
#include "adastrat/gauss.hpp"
#include "adastrat/rng.hpp"
#include "adastrat/strata.hpp"

using namespace adastrat;

namespace {

// One stratified pass at fixed direction for testing the estimator layer.
StratumStats sample_pass(const StratificationMatrix& mu, const StrataGrid& grid,
                         const std::vector<std::int64_t>& counts,
                         const std::function<double(const Eigen::VectorXd&)>& phi,
                         std::uint64_t seed, std::span<const double> prev_sigma = {}) {
  const std::int64_t cells = grid.cell_count();
  StratumStats stats;
  stats.resize(static_cast<std::size_t>(cells));
  Eigen::VectorXd y(mu.dim());
  for (std::int64_t i = 0; i < cells; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::int64_t n = counts[ui];
    stats.draws_used[ui] = n;
    if (n == 0) {
      if (!prev_sigma.empty()) stats.sigma_hat[ui] = prev_sigma[ui];
      continue;
    }
    RandomStream stream(seed, substream_key(40, 0, static_cast<std::uint64_t>(i)));
    const auto multi = grid.multi_index(i);
    StratumSampler sampler(mu, grid.cell(multi));
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t r = 0; r < n; ++r) {
      sampler.draw(stream, y);
      const double v = phi(y);
      sum += v;
      sum_sq += v * v;
    }
    const auto m = stratum_moments_from_sums(sum, sum_sq, n, grid.stratum_probability());
    stats.nu_phi[ui] = m.nu_phi;
    stats.nu_phi2[ui] = m.nu_phi2;
    stats.sigma_hat[ui] = m.sigma_stale && !prev_sigma.empty() ? prev_sigma[ui] : m.sigma_hat;
  }
  return stats;
}

}  // namespace

TEST_CASE("stratum_moments: closed-form cases") {
  {
    const std::vector<double> samples(10, 3.25);
    const auto m = stratum_moments(samples, 0.2);
    CHECK(m.sigma_hat == 0.0);
    CHECK(m.nu_phi == doctest::Approx(0.2 * 3.25));
    CHECK_FALSE(m.sigma_stale);
  }
  {
    const std::vector<double> samples = {0.0, 2.0};
    const auto m = stratum_moments(samples, 0.5);
    CHECK(m.nu_phi == doctest::Approx(0.5));
    CHECK(m.nu_phi2 == doctest::Approx(1.0));
    CHECK(m.sigma_hat == doctest::Approx(1.0));
  }
  {
    // an indicator of the stratum's own event is constant inside it
    const std::vector<double> samples(25, 1.0);
    const auto m = stratum_moments(samples, 0.04);
    CHECK(m.sigma_hat == 0.0);
  }
  {
    const auto empty = stratum_moments({}, 0.1);
    CHECK(empty.empty);
    CHECK(empty.nu_phi == 0.0);
    const std::vector<double> one = {5.0};
    const auto single = stratum_moments(one, 0.1);
    CHECK(single.sigma_stale);
    CHECK(single.nu_phi == doctest::Approx(0.5));
  }
}

TEST_CASE("sigma_hat is never negative and respects Jensen on raw data") {
  RandomStream stream(21, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(stream.next_uniform() * 40);
    std::vector<double> samples(static_cast<std::size_t>(n));
    for (double& v : samples) v = stream.next_normal() * 3.0 + 1.0;
    const auto m = stratum_moments(samples, 0.25);
    REQUIRE(m.sigma_hat >= 0.0);
    REQUIRE(m.nu_phi2 / 0.25 + 1e-12 >= (m.nu_phi / 0.25) * (m.nu_phi / 0.25));
  }
}

TEST_CASE("stratified_estimate: single stratum is the plain mean") {
  StratumStats stats;
  stats.resize(1);
  stats.nu_phi[0] = 4.5;  // p = 1 absorbs the mean directly
  stats.draws_used[0] = 100;
  CHECK(stratified_estimate(stats) == doctest::Approx(4.5));
}

TEST_CASE("stratified_estimate: zero-mean linear integrand") {
  const int d = 3, I = 10;
  RandomStream init(22, 0);
  Eigen::MatrixXd dir(d, 1);
  for (int i = 0; i < d; ++i) dir(i, 0) = init.next_normal();
  const auto mu = orthonormalize_svd(dir);
  const StrataGrid grid = build_equiprobable_grid(1, I);
  Eigen::VectorXd a(d);
  for (int i = 0; i < d; ++i) a(i) = init.next_normal();
  const std::vector<double> p(static_cast<std::size_t>(I), grid.stratum_probability());
  const auto counts = draws_from_allocation(p, 20000);
  const auto stats = sample_pass(mu, grid, counts, [&](const Eigen::VectorXd& y) {
    return a.dot(y);
  }, 5);
  // SE of the stratified estimator ~ sqrt(sum p^2 s^2 / M_i)
  double se2 = 0.0;
  for (int i = 0; i < I; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    se2 += p[ui] * p[ui] * stats.sigma_hat[ui] * stats.sigma_hat[ui] / double(counts[ui]);
  }
  CHECK(std::abs(stratified_estimate(stats)) < 3.0 * std::sqrt(se2));
}

TEST_CASE("stratified_estimate: E[Y^2] = 1 at d=1, I=100") {
  const int I = 100;
  const std::int64_t M = 100000;
  const auto mu = orthonormalize_svd(Eigen::MatrixXd::Identity(1, 1));
  const StrataGrid grid = build_equiprobable_grid(1, I);
  const std::vector<double> p(static_cast<std::size_t>(I), grid.stratum_probability());
  auto phi = [](const Eigen::VectorXd& y) { return y(0) * y(0); };
  // pilot pass (proportional) feeds the optimal allocation, under which the
  // estimator variance equals the (sum p sigma)^2 / M proxy
  const auto pilot = sample_pass(mu, grid, draws_from_allocation(p, M), phi, 6);
  std::vector<double> q = optimal_allocation(p, pilot.sigma_hat);
  const double floor = 0.1 / double(I);
  double total = 0.0;
  for (double& v : q) {
    v = std::max(v, floor);
    total += v;
  }
  for (double& v : q) v /= total;
  const auto stats =
      sample_pass(mu, grid, draws_from_allocation(q, M), phi, 7, pilot.sigma_hat);
  const double estimate = stratified_estimate(stats);
  const double se = std::sqrt(estimator_variance(p, stats.sigma_hat, M));
  CHECK(std::abs(estimate - 1.0) < 3.0 * se + 1e-9);
}

TEST_CASE("estimator_variance: worked cases") {
  {
    const std::vector<double> p = {0.25, 0.75};
    const std::vector<double> s = {0.0, 0.0};
    CHECK(estimator_variance(p, s, 10) == 0.0);
  }
  {
    const std::vector<double> p = {1.0};
    const std::vector<double> s = {2.5};
    CHECK(estimator_variance(p, s, 50) == doctest::Approx(2.5 * 2.5 / 50.0));
  }
  {
    const std::vector<double> p = {0.5, 0.5};
    const std::vector<double> s = {1.0, 3.0};
    CHECK(estimator_variance(p, s, 100) == doctest::Approx(0.04));
  }
}

TEST_CASE("update_average: weighted combinations") {
  {
    AveragedEstimate avg;
    avg.update(2.5, 0.3);
    avg.update(2.5, 0.3);
    CHECK(avg.value() == doctest::Approx(2.5));
  }
  {
    AveragedEstimate avg;
    avg.update(1.0, 1.0);
    avg.update(3.0, 1.0);
    CHECK(avg.value() == doctest::Approx(2.0));
  }
  {
    AveragedEstimate avg;
    avg.update(0.0, 1.0);
    avg.update(4.0, 3.0);
    CHECK(avg.value() == doctest::Approx(1.0));
  }
  {
    AveragedEstimate avg;
    avg.update(7.0, 0.0);
    avg.update(7.0, 0.0);
    CHECK(avg.skipped_count() == 2);
    CHECK(avg.value() == doctest::Approx(7.0));  // plain-mean fallback
    avg.update(5.0, 1.0);
    CHECK(avg.value() == doctest::Approx(5.0));  // only the weighted entry counts
    CHECK(avg.unweighted_mean() == doctest::Approx(19.0 / 3.0));
  }
}

TEST_CASE("unbiasedness at fixed strata over 500 replications") {
  const int d = 3, I = 10;
  RandomStream init(23, 0);
  Eigen::MatrixXd dir(d, 1);
  for (int i = 0; i < d; ++i) dir(i, 0) = init.next_normal();
  const auto mu = orthonormalize_svd(dir);
  const StrataGrid grid = build_equiprobable_grid(1, I);
  Eigen::VectorXd a(d);
  for (int i = 0; i < d; ++i) a(i) = init.next_normal();
  const std::vector<double> p(static_cast<std::size_t>(I), grid.stratum_probability());
  const auto counts = draws_from_allocation(p, 500);
  const int R = 500;
  double sum = 0.0, sum_sq = 0.0;
  for (int rep = 0; rep < R; ++rep) {
    const auto stats = sample_pass(mu, grid, counts, [&](const Eigen::VectorXd& y) {
      return 1.0 + a.dot(y);
    }, derive_seed(900, static_cast<std::uint64_t>(rep)));
    const double e = stratified_estimate(stats);
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / R;
  const double sd = std::sqrt(std::max(sum_sq / R - mean * mean, 0.0));
  CHECK(std::abs(mean - 1.0) < 4.0 * sd / std::sqrt(double(R)));
}

TEST_CASE("variance dominance for a stratifiable integrand") {
  // phi = y_1^2 with mu = e_1: the conditional variance vanishes, so the
  // stratified estimator with learnt optimal allocation beats plain MC
  // (variance 2/M) by far more than a factor 20.
  const int d = 2, I = 100;
  const std::int64_t M = 5000;
  const auto mu = orthonormalize_svd(Eigen::MatrixXd::Identity(d, 1));
  const StrataGrid grid = build_equiprobable_grid(1, I);
  const std::vector<double> p(static_cast<std::size_t>(I), grid.stratum_probability());
  auto phi = [](const Eigen::VectorXd& y) { return y(0) * y(0); };
  const int R = 500;
  double sum = 0.0, sum_sq = 0.0;
  for (int rep = 0; rep < R; ++rep) {
    const std::uint64_t seed = derive_seed(901, static_cast<std::uint64_t>(rep));
    // pilot pass (proportional) estimates the deviations
    const auto pilot_counts = draws_from_allocation(p, M);
    const auto pilot = sample_pass(mu, grid, pilot_counts, phi, seed);
    std::vector<double> q;
    try {
      q = optimal_allocation(p, pilot.sigma_hat);
    } catch (...) {
      q = p;
    }
    const double floor = 0.1 / double(I);
    double qt = 0.0;
    for (double& v : q) {
      v = std::max(v, floor);
      qt += v;
    }
    for (double& v : q) v /= qt;
    const auto counts = draws_from_allocation(q, M);
    const auto stats =
        sample_pass(mu, grid, counts, phi, derive_seed(seed, 1), pilot.sigma_hat);
    const double e = stratified_estimate(stats);
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / R;
  const double var = std::max(sum_sq / R - mean * mean, 0.0);
  CHECK(var < (2.0 / double(M)) / 20.0);
  CHECK(std::abs(mean - 1.0) < 0.01);
}
