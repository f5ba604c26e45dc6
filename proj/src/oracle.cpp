#include "adastrat/oracle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/estimator.hpp"
#include "adastrat/normal.hpp"

namespace adastrat::oracle {

namespace {

// Integration window: the standard normal weight is below 1e-31 outside.
constexpr double kCut = 12.0;

Eigen::VectorXd checked_unit(Eigen::VectorXd mu) {
  if (std::abs(mu.norm() - 1.0) > 1e-10) {
    throw std::invalid_argument("oracle model: direction must be a unit vector");
  }
  return mu;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (!(a < b)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, rel_tol);
}

ConditionalMomentModel linear_model(Eigen::VectorXd a, Eigen::VectorXd mu) {
  ConditionalMomentModel model;
  model.d = static_cast<int>(mu.size());
  model.mu = checked_unit(std::move(mu));
  const double b = a.dot(model.mu);
  const double resid = std::max(a.squaredNorm() - b * b, 0.0);
  model.phi_mean = [b](double x) { return b * x; };
  model.phi2_mean = [b, resid](double x) { return b * x * b * x + resid; };
  model.phi = [a](std::span<const double> y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += a(i) * y[static_cast<std::size_t>(i)];
    return s;
  };
  return model;
}

ConditionalMomentModel quadratic_y1_model(Eigen::VectorXd mu) {
  ConditionalMomentModel model;
  model.d = static_cast<int>(mu.size());
  model.mu = checked_unit(std::move(mu));
  // Y_1 | mu^T Y = x is N(mu_1 x, 1 - mu_1^2).
  const double m1 = model.mu(0);
  const double s2 = std::max(1.0 - m1 * m1, 0.0);
  model.phi_mean = [m1, s2](double x) { return m1 * x * m1 * x + s2; };
  model.phi2_mean = [m1, s2](double x) {
    const double mean = m1 * x;
    return mean * mean * mean * mean + 6.0 * mean * mean * s2 + 3.0 * s2 * s2;
  };
  model.phi = [](std::span<const double> y) { return y[0] * y[0]; };
  return model;
}

ConditionalMomentModel exponential_model(Eigen::VectorXd a, Eigen::VectorXd mu) {
  ConditionalMomentModel model;
  model.d = static_cast<int>(mu.size());
  model.mu = checked_unit(std::move(mu));
  const double b = a.dot(model.mu);
  const double resid = std::max(a.squaredNorm() - b * b, 0.0);
  model.phi_mean = [b, resid](double x) { return std::exp(b * x + 0.5 * resid); };
  model.phi2_mean = [b, resid](double x) { return std::exp(2.0 * b * x + 2.0 * resid); };
  model.phi = [a](std::span<const double> y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += a(i) * y[static_cast<std::size_t>(i)];
    return std::exp(s);
  };
  return model;
}

double limiting_variance(const ConditionalMomentModel& model, AllocationDensity density) {
  if (density == AllocationDensity::Proportional) {
    return integrate(
        [&](double x) { return std_normal_pdf(x) * model.conditional_variance(x); }, -kCut, kCut);
  }
  const double root = integrate(
      [&](double x) { return std_normal_pdf(x) * std::sqrt(model.conditional_variance(x)); },
      -kCut, kCut);
  return root * root;
}

StratumTable stratum_table(const ConditionalMomentModel& model, int I) {
  const StrataGrid grid = build_equiprobable_grid(1, I);
  StratumTable table;
  table.p.assign(static_cast<std::size_t>(I), 1.0 / I);
  table.nu_phi.resize(static_cast<std::size_t>(I));
  table.nu_phi2.resize(static_cast<std::size_t>(I));
  table.sigma.resize(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    const double lo = std::max(grid.boundaries[static_cast<std::size_t>(i)], -kCut);
    const double hi = std::min(grid.boundaries[static_cast<std::size_t>(i) + 1], kCut);
    const double nf = integrate(
        [&](double x) { return std_normal_pdf(x) * model.phi_mean(x); }, lo, hi);
    const double nf2 = integrate(
        [&](double x) { return std_normal_pdf(x) * model.phi2_mean(x); }, lo, hi);
    table.nu_phi[static_cast<std::size_t>(i)] = nf;
    table.nu_phi2[static_cast<std::size_t>(i)] = nf2;
    const double p = table.p[static_cast<std::size_t>(i)];
    table.sigma[static_cast<std::size_t>(i)] =
        std::sqrt(std::max(nf2 / p - (nf / p) * (nf / p), 0.0));
  }
  return table;
}

std::vector<VarianceLimitRow> variance_limit_table(const ConditionalMomentModel& model,
                                  std::span<const int> I_list, AllocationDensity density) {
  std::vector<VarianceLimitRow> rows;
  rows.reserve(I_list.size());
  for (int I : I_list) {
    const StratumTable table = stratum_table(model, I);
    std::vector<double> q;
    if (density == AllocationDensity::Proportional) {
      q = table.p;
    } else {
      q = optimal_allocation(table.p, table.sigma);
    }
    double value = 0.0;
    for (int i = 0; i < I; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double num = table.p[ui] * table.p[ui] * table.sigma[ui] * table.sigma[ui];
      if (num > 0.0) value += num / q[ui];
    }
    rows.push_back({I, value});
  }
  return rows;
}

double optimal_density_gap(const ConditionalMomentModel& model, int I) {
  const StratumTable table = stratum_table(model, I);
  const std::vector<double> q_star = optimal_allocation(table.p, table.sigma);
  const StrataGrid grid = build_equiprobable_grid(1, I);
  const double normalizer = integrate(
      [&](double x) { return std_normal_pdf(x) * std::sqrt(model.conditional_variance(x)); },
      -kCut, kCut);
  double total = 0.0;
  for (int i = 0; i < I; ++i) {
    const double lo = std::max(grid.boundaries[static_cast<std::size_t>(i)], -kCut);
    const double hi = std::min(grid.boundaries[static_cast<std::size_t>(i) + 1], kCut);
    const double mass = integrate(
        [&](double x) { return std_normal_pdf(x) * std::sqrt(model.conditional_variance(x)); },
        lo, hi) / normalizer;
    total += std::abs(q_star[static_cast<std::size_t>(i)] - mass);
  }
  return total;
}

double brute_force_estimator_variance(const GaussianPayoff& payoff,
                                      const StratificationMatrix& mu, const StrataGrid& grid,
                                      std::span<const double> q, std::int64_t M, int R,
                                      std::uint64_t seed) {
  if (R < 2) throw std::invalid_argument("brute_force_estimator_variance: need R >= 2");
  const auto counts = draws_from_allocation(q, M);
  const std::int64_t cells = grid.cell_count();
  const double p = grid.stratum_probability();
  const int d = mu.dim();
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int rep = 0; rep < R; ++rep) {
    double estimate = 0.0;
    for (std::int64_t i = 0; i < cells; ++i) {
      const std::int64_t n = counts[static_cast<std::size_t>(i)];
      if (n == 0) continue;
      RandomStream stream(derive_seed(seed, static_cast<std::uint64_t>(rep)),
                          substream_key(24, 0, static_cast<std::uint64_t>(i)));
      const auto multi = grid.multi_index(i);
      StratumSampler sampler(mu, grid.cell(multi));
      Eigen::VectorXd y(d);
      double local = 0.0;
      for (std::int64_t r = 0; r < n; ++r) {
        sampler.draw(stream, y);
        RandomStream aux(derive_seed(seed, static_cast<std::uint64_t>(rep)),
                         substream_key(25, static_cast<std::uint64_t>(i),
                                       static_cast<std::uint64_t>(r)));
        RandomStream* aux_ptr = payoff.requires_aux() ? &aux : nullptr;
        local += payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
      }
      estimate += p * local / static_cast<double>(n);
    }
    sum += estimate;
    sum_sq += estimate * estimate;
  }
  const double mean = sum / R;
  return std::max(sum_sq / R - mean * mean, 0.0) * R / (R - 1.0);
}

namespace {

// Per-cell quadrature data for the two-dimensional gradient checks.
struct Cell2D {
  double p, nu_phi, nu_phi2, psigma;
};

struct Line2D {
  // E[w(Y) | mu^T Y = z] and E[u w(Y) | mu^T Y = z] for w in {1, phi, phi^2},
  // where u is the coordinate along the orthogonal direction.
  double e_phi, e_phi2, eu_1, eu_phi, eu_phi2;
};

Line2D line_moments(const TestIntegrand2D& integrand, const Eigen::Vector2d& mu,
                    const Eigen::Vector2d& ortho, double z) {
  Line2D out{};
  auto point_value = [&](double u) {
    return integrand.phi(z * mu(0) + u * ortho(0), z * mu(1) + u * ortho(1));
  };
  out.e_phi = integrate([&](double u) { return std_normal_pdf(u) * point_value(u); }, -kCut, kCut);
  out.e_phi2 = integrate(
      [&](double u) {
        const double v = point_value(u);
        return std_normal_pdf(u) * v * v;
      },
      -kCut, kCut);
  out.eu_1 = 0.0;  // E[u] along the line vanishes
  out.eu_phi = integrate(
      [&](double u) { return std_normal_pdf(u) * u * point_value(u); }, -kCut, kCut);
  out.eu_phi2 = integrate(
      [&](double u) {
        const double v = point_value(u);
        return std_normal_pdf(u) * u * v * v;
      },
      -kCut, kCut);
  return out;
}

std::vector<Cell2D> cell_table(const TestIntegrand2D& integrand, const Eigen::Vector2d& mu,
                               const Eigen::Vector2d& ortho, int I) {
  const StrataGrid grid = build_equiprobable_grid(1, I);
  std::vector<Cell2D> cells(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    const double lo = std::max(grid.boundaries[static_cast<std::size_t>(i)], -kCut);
    const double hi = std::min(grid.boundaries[static_cast<std::size_t>(i) + 1], kCut);
    auto conditional = [&](double x, bool squared) {
      auto value = [&](double u) {
        const double v =
            integrand.phi(x * mu(0) + u * ortho(0), x * mu(1) + u * ortho(1));
        return squared ? v * v : v;
      };
      return integrate([&](double u) { return std_normal_pdf(u) * value(u); }, -kCut, kCut);
    };
    Cell2D& cell = cells[static_cast<std::size_t>(i)];
    cell.p = 1.0 / I;
    cell.nu_phi = integrate(
        [&](double x) { return std_normal_pdf(x) * conditional(x, false); }, lo, hi, 1e-9);
    cell.nu_phi2 = integrate(
        [&](double x) { return std_normal_pdf(x) * conditional(x, true); }, lo, hi, 1e-9);
    cell.psigma = std::sqrt(std::max(cell.p * cell.nu_phi2 - cell.nu_phi * cell.nu_phi, 0.0));
  }
  return cells;
}

}  // namespace

double quadrature_V(const TestIntegrand2D& integrand, int I, double theta) {
  const Eigen::Vector2d mu(std::cos(theta), std::sin(theta));
  const Eigen::Vector2d ortho(-std::sin(theta), std::cos(theta));
  const auto cells = cell_table(integrand, mu, ortho, I);
  double v = 0.0;
  for (const auto& cell : cells) v += cell.psigma;
  return v;
}

Eigen::Vector2d quadrature_grad_V(const TestIntegrand2D& integrand, int I, double theta) {
  const Eigen::Vector2d mu(std::cos(theta), std::sin(theta));
  const Eigen::Vector2d ortho(-std::sin(theta), std::cos(theta));
  const auto cells = cell_table(integrand, mu, ortho, I);
  const StrataGrid grid = build_equiprobable_grid(1, I);

  // Exact boundary integrals int y w f dlambda_z = pdf(z) (z mu E[w] + ortho E[u w]).
  std::vector<Eigen::Vector2d> b_f(static_cast<std::size_t>(I) - 1);
  std::vector<Eigen::Vector2d> b_phi(static_cast<std::size_t>(I) - 1);
  std::vector<Eigen::Vector2d> b_phi2(static_cast<std::size_t>(I) - 1);
  for (int j = 0; j + 1 < I; ++j) {
    const double z = grid.boundaries[static_cast<std::size_t>(j) + 1];
    const Line2D line = line_moments(integrand, mu, ortho, z);
    const double pdf = std_normal_pdf(z);
    b_f[static_cast<std::size_t>(j)] = pdf * (z * mu + line.eu_1 * ortho);
    b_phi[static_cast<std::size_t>(j)] = pdf * (z * line.e_phi * mu + line.eu_phi * ortho);
    b_phi2[static_cast<std::size_t>(j)] = pdf * (z * line.e_phi2 * mu + line.eu_phi2 * ortho);
  }

  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (int i = 0; i < I; ++i) {
    const Cell2D& cell = cells[static_cast<std::size_t>(i)];
    if (cell.psigma < 1e-12) continue;
    Eigen::Vector2d g_f = Eigen::Vector2d::Zero();
    Eigen::Vector2d g_phi = Eigen::Vector2d::Zero();
    Eigen::Vector2d g_phi2 = Eigen::Vector2d::Zero();
    if (i <= I - 2) {
      g_f -= b_f[static_cast<std::size_t>(i)];
      g_phi -= b_phi[static_cast<std::size_t>(i)];
      g_phi2 -= b_phi2[static_cast<std::size_t>(i)];
    }
    if (i >= 1) {
      g_f += b_f[static_cast<std::size_t>(i) - 1];
      g_phi += b_phi[static_cast<std::size_t>(i) - 1];
      g_phi2 += b_phi2[static_cast<std::size_t>(i) - 1];
    }
    grad += (g_f * cell.nu_phi2 + cell.p * g_phi2 - 2.0 * cell.nu_phi * g_phi) /
            (2.0 * cell.psigma);
  }
  return grad;
}

double quadrature_grad_V_theta(const TestIntegrand2D& integrand, int I, double theta) {
  const Eigen::Vector2d tangent(-std::sin(theta), std::cos(theta));
  return quadrature_grad_V(integrand, I, theta).dot(tangent);
}

double finite_difference_gradV(const TestIntegrand2D& integrand, int I, double theta,
                               double step) {
  return (quadrature_V(integrand, I, theta + step) - quadrature_V(integrand, I, theta - step)) /
         (2.0 * step);
}

namespace {

// log of the standard normal survival function, stable for large x.
double log_survival(double x) {
  if (x < 30.0) {
    return std::log(0.5 * std::erfc(x * 0.70710678118654752440));
  }
  // Mills asymptotics: Phi_bar(x) ~ pdf(x)/x (1 - 1/x^2 + 3/x^4 - 15/x^6).
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * std::log(2.0 * M_PI) - std::log(x) + std::log(series);
}

}  // namespace

std::pair<double, double> truncated_normal_moments(double a, double b) {
  if (!(a < b)) throw std::invalid_argument("truncated_normal_moments: need a < b");
  const bool a_inf = std::isinf(a);
  const bool b_inf = std::isinf(b);

  // Reduce far lower tails to the positive side for the log-space path.
  if (!b_inf && b < -8.0) {
    auto [mean, var] = truncated_normal_moments(-b, -a);
    return {-mean, var};
  }

  if (!a_inf && a > 8.0) {
    // Deep upper tail: the mass and the densities underflow individually,
    // so form the pdf/mass ratios from log survival differences.
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    const double la = log_survival(a);
    const double log_ratio_b_a =
        b_inf ? -std::numeric_limits<double>::infinity() : log_survival(b) - la;
    // log of (Phi_bar(a) - Phi_bar(b)) relative to Phi_bar(a)
    const double log_mass_scaled = std::log(-std::expm1(log_ratio_b_a));
    const double lpa = -0.5 * a * a - kHalfLog2Pi;
    const double ra = std::exp(lpa - la - log_mass_scaled);
    const double rb = b_inf ? 0.0 : std::exp(-0.5 * b * b - kHalfLog2Pi - la - log_mass_scaled);
    const double mean = ra - rb;
    const double var = 1.0 + (a * ra - (b_inf ? 0.0 : b * rb)) - mean * mean;
    return {mean, std::max(var, 0.0)};
  }

  const double ca = a_inf ? 0.0 : std_normal_cdf(a);
  const double cb = b_inf ? 1.0 : std_normal_cdf(b);
  const double mass = cb - ca;
  if (!(mass > 0.0)) {
    throw degenerate_error("truncated_normal_moments: interval carries no mass");
  }
  const double pa = a_inf ? 0.0 : std_normal_pdf(a);
  const double pb = b_inf ? 0.0 : std_normal_pdf(b);
  const double apa = a_inf ? 0.0 : a * pa;
  const double bpb = b_inf ? 0.0 : b * pb;
  const double mean = (pa - pb) / mass;
  const double var = 1.0 + (apa - bpb) / mass - mean * mean;
  return {mean, std::max(var, 0.0)};
}

}  // namespace adastrat::oracle
