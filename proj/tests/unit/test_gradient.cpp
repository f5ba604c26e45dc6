#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

#include "adastrat/adapt.hpp"
#include "adastrat/gradient.hpp"
#include "adastrat/normal.hpp"
#include "adastrat/oracle.hpp"
#include "adastrat/payoffs.hpp"

using namespace adastrat;

namespace {

class FunctionPayoff final : public GaussianPayoff {
 public:
  FunctionPayoff(int d, std::function<double(std::span<const double>)> f)
      : d_(d), f_(std::move(f)) {}
  int dim() const override { return d_; }
  double evaluate(std::span<const double> y, RandomStream*) const override { return f_(y); }

 private:
  int d_;
  std::function<double(std::span<const double>)> f_;
};

}  // namespace

TEST_CASE("boundary_integral: central hyperplane has zero mean integral") {
  const auto mu = orthonormalize_svd(Eigen::MatrixXd::Identity(3, 1));
  FunctionPayoff one(3, [](std::span<const double>) { return 1.0; });
  RandomStream stream(30, 0);
  const std::int64_t n = 10000;
  const auto est = boundary_integral(mu, 0, 0.0, {}, one, n, stream);
  // component SE at z=0: pdf(0) / sqrt(n) per free coordinate
  const double se = std_normal_pdf(0.0) / std::sqrt(double(n));
  CHECK(est.f.norm() < 4.0 * se * std::sqrt(3.0));
}

TEST_CASE("boundary_integral: f-integral at z=1 is pdf(1) e_1") {
  const auto mu = orthonormalize_svd(Eigen::MatrixXd::Identity(2, 1));
  FunctionPayoff one(2, [](std::span<const double>) { return 1.0; });
  RandomStream stream(30, 1);
  const std::int64_t n = 20000;
  const auto est = boundary_integral(mu, 0, 1.0, {}, one, n, stream);
  CHECK(std::abs(est.f(0) - std_normal_pdf(1.0)) < 1e-12);  // fixed coordinate
  CHECK(std::abs(est.f(1)) < 4.0 * std_normal_pdf(1.0) / std::sqrt(double(n)));
}

TEST_CASE("boundary_integral: f phi integral with phi = y_2") {
  const auto mu = orthonormalize_svd(Eigen::MatrixXd::Identity(2, 1));
  FunctionPayoff phi(2, [](std::span<const double> y) { return y[1]; });
  for (double z : {-0.7, 0.4, 1.3}) {
    RandomStream stream(31, static_cast<std::uint64_t>(z * 10 + 100));
    const std::int64_t n = 40000;
    const auto est = boundary_integral(mu, 0, z, {}, phi, n, stream);
    const double pdf = std_normal_pdf(z);
    // E[y phi] on the plane = (z E[y2], E[y2^2]) = (0, 1)
    CHECK(std::abs(est.f_phi(0)) < 4.0 * pdf * std::abs(z) / std::sqrt(double(n)) + 1e-12);
    CHECK(std::abs(est.f_phi(1) - pdf) < 4.0 * pdf * std::sqrt(3.0 / double(n)));
  }
}

TEST_CASE("grad_nu: strata sharing a boundary telescope with opposite signs") {
  const int d = 3;
  RandomStream init(32, 0);
  Eigen::MatrixXd dir(d, 1);
  for (int i = 0; i < d; ++i) dir(i, 0) = init.next_normal();
  const auto mu = orthonormalize_svd(dir);
  const StrataGrid grid = build_equiprobable_grid(1, 2);
  FunctionPayoff one(d, [](std::span<const double>) { return 1.0; });

  BoundaryField field(d, 1, 2);
  HyperplaneSampler sampler(mu.column(0), grid.boundaries[1]);
  RandomStream stream(32, 1);
  Eigen::VectorXd y(d);
  for (int r = 0; r < 5000; ++r) {
    sampler.draw(stream, y);
    field.accumulate(0, 0, grid, mu.matrix(), y, 1.0);
  }
  field.finalize(grid);

  const int low[1] = {0}, high[1] = {1};
  const auto g0 = grad_nu(std::span<const int>(low, 1), grid, field);
  const auto g1 = grad_nu(std::span<const int>(high, 1), grid, field);
  CHECK((g0.f + g1.f).cwiseAbs().maxCoeff() == 0.0);  // shared batch, opposite sign
  CHECK(g0.f.col(0).norm() > 0.0);
}

TEST_CASE("grad_nu: middle cell uses both boundaries, edge cells skip infinity") {
  const int d = 2;
  const auto mu = orthonormalize_svd(Eigen::MatrixXd::Identity(d, 1));
  const StrataGrid grid = build_equiprobable_grid(1, 3);
  BoundaryField field(d, 1, 3);
  // synthetic batches: boundary 0 integral = a, boundary 1 integral = b
  for (int bj = 0; bj < 2; ++bj) {
    HyperplaneSampler sampler(mu.column(0), grid.boundaries[static_cast<std::size_t>(bj) + 1]);
    RandomStream stream(33, static_cast<std::uint64_t>(bj));
    Eigen::VectorXd y(d);
    for (int r = 0; r < 2000; ++r) {
      sampler.draw(stream, y);
      field.accumulate(0, bj, grid, mu.matrix(), y, 0.5);
    }
  }
  field.finalize(grid);
  const Eigen::VectorXd b0 = field.batch(0, 0).f.col(0);
  const Eigen::VectorXd b1 = field.batch(0, 1).f.col(0);
  const int c0[1] = {0}, c1[1] = {1}, c2[1] = {2};
  CHECK((grad_nu(std::span<const int>(c0, 1), grid, field).f.col(0) + b0).norm() == 0.0);
  CHECK((grad_nu(std::span<const int>(c1, 1), grid, field).f.col(0) - (b0 - b1)).norm() == 0.0);
  CHECK((grad_nu(std::span<const int>(c2, 1), grid, field).f.col(0) - b1).norm() == 0.0);
}

TEST_CASE("grad_nu against finite differences of the quadrature nu (phi = y_1)") {
  // d=2, m=1, mu(theta); nu_i(f phi) differentiated in theta. The boundary
  // integrals have closed forms for phi = y_1: E[phi | mu^T y = z] = z cos,
  // E[u phi | z] = -sin.
  const int I = 4;
  const double theta = 0.3;
  const StrataGrid grid = build_equiprobable_grid(1, I);
  auto nu_of = [&](double th, int cell) {
    const double lo = std::max(grid.boundaries[static_cast<std::size_t>(cell)], -12.0);
    const double hi = std::min(grid.boundaries[static_cast<std::size_t>(cell) + 1], 12.0);
    return oracle::integrate(
        [&](double x) { return std_normal_pdf(x) * x * std::cos(th); }, lo, hi);
  };
  const Eigen::Vector2d mu(std::cos(theta), std::sin(theta));
  const Eigen::Vector2d ortho(-std::sin(theta), std::cos(theta));
  const Eigen::Vector2d dmu = ortho;  // d mu / d theta
  for (int cell = 0; cell < I; ++cell) {
    // analytic gradient column via the boundary integrals
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    auto boundary = [&](int bj) -> Eigen::Vector2d {
      const double z = grid.boundaries[static_cast<std::size_t>(bj) + 1];
      const double pdf = std_normal_pdf(z);
      return pdf * (z * (z * std::cos(theta)) * mu + (-std::sin(theta)) * ortho);
    };
    if (cell <= I - 2) g -= boundary(cell);
    if (cell >= 1) g += boundary(cell - 1);
    const double analytic = g.dot(dmu);
    const double h = 1e-4;
    const double fd = (nu_of(theta + h, cell) - nu_of(theta - h, cell)) / (2.0 * h);
    const double scale = std::max(std::abs(fd), 1e-8);
    CHECK(std::abs(analytic - fd) / scale < 1e-3);
  }
}

TEST_CASE("grad_V: all deviations zero yields the zero matrix and a flag") {
  const StrataGrid grid = build_equiprobable_grid(1, 4);
  StratumStats stats;
  stats.resize(4);
  const std::vector<double> p(4, 0.25);
  BoundaryField field(3, 1, 4);
  field.finalize(grid);
  bool degenerate = false;
  const Eigen::MatrixXd g = grad_V(grid, stats, p, field, &degenerate);
  CHECK(degenerate);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quadrature V orders directions and its gradient points downhill") {
  // phi = y_1^2: stratifying along e_1 removes all conditional variance.
  oracle::TestIntegrand2D quad{[](double y1, double) { return y1 * y1; }};
  const double v_aligned = oracle::quadrature_V(quad, 4, 0.0);
  const double v_orthogonal = oracle::quadrature_V(quad, 4, M_PI / 2);
  CHECK(v_aligned < v_orthogonal);
  for (double theta : {0.3, 0.7, 1.1}) {
    CHECK(oracle::quadrature_grad_V_theta(quad, 4, theta) > 0.0);  // descent toward 0
  }
}

TEST_CASE("gradient matches finite differences for all test integrands") {
  std::vector<oracle::TestIntegrand2D> integrands;
  integrands.push_back({[](double y1, double) { return y1; }});
  integrands.push_back({[](double y1, double) { return y1 * y1; }});
  integrands.push_back({[](double y1, double y2) { return std::exp(y1 + y2); }});
  RandomStream stream(34, 0);
  for (const auto& integrand : integrands) {
    for (int trial = 0; trial < 10; ++trial) {
      const double theta = 0.1 + stream.next_uniform() * (M_PI / 2 - 0.2);
      for (int I : {2, 4}) {
        const double analytic = oracle::quadrature_grad_V_theta(integrand, I, theta);
        const double fd = oracle::finite_difference_gradV(integrand, I, theta);
        const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
        REQUIRE(std::abs(analytic - fd) / scale < 1e-3);
      }
    }
  }
}

TEST_CASE("rejection weighting reproduces the closed-form constrained integral") {
  // m = 2 in R^3; boundary along direction 0 at z, other-direction cell in
  // value space (a, b]. For phi = 1 the constrained integral is
  // pdf(z) (z P mu_0 + (pdf(a)-pdf(b)) mu_1) with P = Phi(b) - Phi(a).
  const int d = 3;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Identity(d, 2);
  const auto mu = orthonormalize_svd(cols);
  FunctionPayoff one(d, [](std::span<const double>) { return 1.0; });
  const double z = 0.8;
  const StrataGrid grid = build_equiprobable_grid(2, 3);

  for (int other_cell : {0, 1, 2}) {
    const double a = grid.boundaries[static_cast<std::size_t>(other_cell)];
    const double b = grid.boundaries[static_cast<std::size_t>(other_cell) + 1];
    const double mass = (std::isinf(b) ? 1.0 : std_normal_cdf(b)) -
                        (std::isinf(a) ? 0.0 : std_normal_cdf(a));
    const double tilt = (std::isinf(a) ? 0.0 : std_normal_pdf(a)) -
                        (std::isinf(b) ? 0.0 : std_normal_pdf(b));
    std::vector<std::pair<double, double>> cells = {{a, b}};
    RandomStream stream(35, static_cast<std::uint64_t>(other_cell));
    const std::int64_t n = 200000;
    const auto est = boundary_integral(mu, 0, z, cells, one, n, stream);
    const Eigen::VectorXd expected =
        std_normal_pdf(z) * (z * mass * mu.matrix().col(0) + tilt * mu.matrix().col(1));
    const double se = std_normal_pdf(z) / std::sqrt(double(n));
    for (int i = 0; i < d; ++i) {
      REQUIRE(std::abs(est.f(i) - expected(i)) < 5.0 * se);
    }
    // for the symmetric middle cell the tilt term vanishes and the
    // constrained integral is the unconstrained one times the cell mass
    if (other_cell == 1) {
      RandomStream stream2(35, 10);
      const std::vector<std::pair<double, double>> full = {{-INFINITY, INFINITY}};
      const auto unconstrained = boundary_integral(mu, 0, z, full, one, n, stream2);
      for (int i = 0; i < d; ++i) {
        REQUIRE(std::abs(est.f(i) - mass * unconstrained.f(i)) < 5.0 * se);
      }
    }
  }
}

TEST_CASE("descent property on the drifted Asian configuration") {
  AsianParams ap;
  ap.vol = 0.1;
  ap.strike = 45.0;
  const auto base = make_asian_payoff(ap);
  const auto payoff = apply_drift(base, optimal_drift(*base));
  int good = 0;
  for (int s = 0; s < 20; ++s) {
    AdaptConfig cfg;
    cfg.d = 16;
    cfg.I = 100;
    cfg.M = 20000;
    cfg.N = 60;
    cfg.seed = derive_seed(500, static_cast<std::uint64_t>(s));
    const AdaptReport report = run(cfg, *payoff);
    bool ok = true;
    // the trace sum_i p_i sigma_i, non-increasing after iteration 30 with
    // slack for the sigma estimation noise
    for (std::size_t t = 30; t + 1 < report.traces.size(); ++t) {
      const double cur = std::sqrt(report.traces[t].variance_proxy);
      const double next = std::sqrt(report.traces[t + 1].variance_proxy);
      if (next > cur * 1.05) {
        ok = false;
        break;
      }
    }
    if (ok) ++good;
  }
  CHECK(good >= 18);
}

TEST_CASE("boundary draw budget: equal split, remainder to the center") {
  const auto counts = boundary_draw_counts(1, 100, 20000);
  REQUIRE(counts.size() == 99);
  std::int64_t total = 0;
  for (auto c : counts) {
    total += c;
    CHECK(c >= 20000 / 99);
    CHECK(c <= 20000 / 99 + 1);
  }
  CHECK(total == 20000);
  // remainder 20000 - 99*202 = 2 goes to the most central boundaries
  CHECK(counts[49] == 203);  // boundary 50 of 99: |2*50 - 100| = 0
  std::int64_t extras = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 203) ++extras;
  }
  CHECK(extras == 2);
}
