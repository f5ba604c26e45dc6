#include "adastrat/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/gradient.hpp"
#include "adastrat/parallel.hpp"

namespace adastrat {

// Substream layout of one run: tag 1 = stratum draws keyed by (iteration,
// stratum), tag 2 = boundary draws keyed by (iteration, boundary), tags 3/4 =
// payoff aux noise keyed by (iteration, draw index). Every stratified or
// boundary draw occupies a fixed window of m + d stream values so that the
// shared-draw mode can regenerate the normals of any stratum draw.
namespace {

constexpr std::uint64_t kTagStratum = 1;
constexpr std::uint64_t kTagBoundary = 2;
constexpr std::uint64_t kTagAux = 3;
constexpr std::uint64_t kTagBoundaryAux = 4;
constexpr std::uint64_t kTagInitColumns = 8;

double stepsize(const AdaptConfig& config, int t_one_based) {
  if (config.policy == StepsizePolicy::Constant) {
    return config.step_scale / std::sqrt(static_cast<double>(config.N));
  }
  return config.step_scale / std::pow(static_cast<double>(t_one_based), config.step_alpha);
}

}  // namespace

void AdaptConfig::validate() const {
  if (d < 1) throw config_error("d", "dimension must be >= 1");
  if (m < 1) throw config_error("m", "need at least one direction");
  if (m >= d) throw config_error("m", "the adaptive engine requires m < d");
  if (I < 2) throw config_error("I", "need at least two strata per direction");
  if (M < 1) throw config_error("M", "need at least one draw per iteration");
  if (N < 1) throw config_error("N", "need at least one iteration");
  if (!(step_scale > 0.0)) throw config_error("step_scale", "must be positive");
  if (policy == StepsizePolicy::Decreasing && !(step_alpha > 0.5 && step_alpha <= 1.0)) {
    throw config_error("step_alpha", "decreasing policy requires alpha in (1/2, 1]");
  }
  if (!(allocation_floor >= 0.0) || allocation_floor >= 1.0) {
    throw config_error("allocation_floor", "floor fraction must lie in [0, 1)");
  }
  if (gradient_total < -1) throw config_error("gradient_total", "must be -1 or nonnegative");
}

AdaptState init_state(const AdaptConfig& config, const GaussianPayoff& payoff) {
  config.validate();
  if (payoff.dim() != config.d) {
    throw config_error("d", "payoff dimension does not match the configuration");
  }
  AdaptState state;
  state.grid = build_equiprobable_grid(config.m, config.I);

  if (config.initial_direction.has_value()) {
    const Eigen::MatrixXd& mu0 = *config.initial_direction;
    if (mu0.rows() != config.d || mu0.cols() != config.m) {
      throw config_error("initial_direction", "must be d x m");
    }
    state.mu = StratificationMatrix(mu0);
  } else {
    Eigen::MatrixXd mu0(config.d, config.m);
    mu0.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(config.d)));
    if (config.m > 1) {
      // Complete the constant vector with seeded random columns,
      // orthonormalized within its orthogonal complement.
      Eigen::MatrixXd rest(config.d, config.m - 1);
      RandomStream stream(config.seed, substream_key(kTagInitColumns, 0, 0));
      for (int c = 0; c + 1 < config.m; ++c) {
        for (int i = 0; i < config.d; ++i) rest(i, c) = stream.next_normal();
        rest.col(c) -= mu0.col(0).dot(rest.col(c)) * mu0.col(0);
      }
      const StratificationMatrix completed = orthonormalize_svd(rest);
      mu0.rightCols(config.m - 1) = completed.matrix();
    }
    state.mu = StratificationMatrix(mu0);
  }

  const auto cells = static_cast<std::size_t>(state.grid.cell_count());
  state.p.assign(cells, state.grid.stratum_probability());
  state.q = state.p;
  state.counts = draws_from_allocation(state.q, config.M);
  state.sigma.assign(cells, 0.0);
  return state;
}

void iterate(AdaptState& state, const GaussianPayoff& payoff, const AdaptConfig& config) {
  const int d = config.d;
  const int m = config.m;
  const int I = config.I;
  const std::int64_t cells = state.grid.cell_count();
  const auto t = static_cast<std::uint64_t>(state.iteration);
  const bool needs_aux = payoff.requires_aux();

  std::vector<std::int64_t> prefix(static_cast<std::size_t>(cells) + 1, 0);
  for (std::int64_t i = 0; i < cells; ++i) {
    prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] +
                                              state.counts[static_cast<std::size_t>(i)];
  }

  // Step 1a: conditional draws in every stratum and the moment estimates.
  StratumStats stats;
  stats.resize(static_cast<std::size_t>(cells));
  parallel_for(cells, [&](std::int64_t i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::int64_t n = state.counts[ui];
    stats.draws_used[ui] = n;
    StratumMoments moments;
    if (n > 0) {
      RandomStream stream(config.seed, substream_key(kTagStratum, t, static_cast<std::uint64_t>(i)));
      const auto multi = state.grid.multi_index(i);
      StratumSampler sampler(state.mu, state.grid.cell(multi));
      Eigen::VectorXd y(d);
      double sum = 0.0;
      double sum_sq = 0.0;
      for (std::int64_t r = 0; r < n; ++r) {
        stream.skip_to(static_cast<std::uint64_t>(r) * (m + d));
        sampler.draw(stream, y);
        RandomStream aux;
        RandomStream* aux_ptr = nullptr;
        if (needs_aux) {
          aux = RandomStream(config.seed,
                             substream_key(kTagAux, t, static_cast<std::uint64_t>(prefix[ui] + r)));
          aux_ptr = &aux;
        }
        const double v = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
        sum += v;
        sum_sq += v * v;
      }
      moments = stratum_moments_from_sums(sum, sum_sq, n, state.p[ui]);
    } else {
      moments.empty = true;
      moments.sigma_stale = true;
    }
    stats.nu_phi[ui] = moments.nu_phi;
    stats.nu_phi2[ui] = moments.nu_phi2;
    // Fewer than two draws leave sigma undefined; carry the previous value.
    stats.sigma_hat[ui] = moments.sigma_stale ? state.sigma[ui] : moments.sigma_hat;
  });

  // Step 1b: hyperplane draws at every interior boundary.
  const std::int64_t gradient_total = config.gradient_total < 0 ? config.M : config.gradient_total;
  const auto boundary_counts = boundary_draw_counts(m, I, gradient_total);
  std::vector<std::int64_t> boundary_offset(boundary_counts.size() + 1, 0);
  for (std::size_t b = 0; b < boundary_counts.size(); ++b) {
    boundary_offset[b + 1] = boundary_offset[b] + boundary_counts[b];
  }

  BoundaryField field(d, m, I);
  parallel_for(static_cast<std::int64_t>(boundary_counts.size()), [&](std::int64_t flat) {
    const auto uflat = static_cast<std::size_t>(flat);
    const std::int64_t n = boundary_counts[uflat];
    if (n == 0) return;
    const int k = static_cast<int>(flat / (I - 1));
    const int bj = static_cast<int>(flat % (I - 1));
    const double z = state.grid.boundaries[static_cast<std::size_t>(bj) + 1];
    HyperplaneSampler sampler(state.mu.column(k), z);
    Eigen::VectorXd gauss(d), y(d);
    for (std::int64_t r = 0; r < n; ++r) {
      const std::int64_t l = boundary_offset[uflat] + r;
      std::uint64_t aux_tag = kTagBoundaryAux;
      std::uint64_t aux_index = static_cast<std::uint64_t>(l);
      if (config.gradient_draws == GradientDraws::Shared) {
        // Reuse the normals of stratified draw l (wrapping if the gradient
        // budget exceeds M); the two estimates are deliberately dependent.
        const std::int64_t ls = l % config.M;
        const auto it = std::upper_bound(prefix.begin(), prefix.end(), ls);
        const auto s = static_cast<std::int64_t>(it - prefix.begin()) - 1;
        const std::int64_t rho = ls - prefix[static_cast<std::size_t>(s)];
        RandomStream stream(config.seed,
                            substream_key(kTagStratum, t, static_cast<std::uint64_t>(s)));
        stream.skip_to(static_cast<std::uint64_t>(rho) * (m + d) + m);
        for (int i = 0; i < d; ++i) gauss(i) = stream.next_normal();
        aux_tag = kTagAux;
        aux_index = static_cast<std::uint64_t>(ls);
      } else {
        RandomStream stream(config.seed,
                            substream_key(kTagBoundary, t, static_cast<std::uint64_t>(flat)));
        stream.skip_to(static_cast<std::uint64_t>(r) * (m + d) + m);
        for (int i = 0; i < d; ++i) gauss(i) = stream.next_normal();
      }
      sampler.transform(gauss, y);
      RandomStream aux;
      RandomStream* aux_ptr = nullptr;
      if (needs_aux) {
        aux = RandomStream(config.seed, substream_key(aux_tag, t, aux_index));
        aux_ptr = &aux;
      }
      const double phi = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
      field.accumulate(k, bj, state.grid, state.mu.matrix(), y, phi);
    }
  });
  field.finalize(state.grid);

  // Step 1c + step (b): gradient and the projected direction update.
  bool degenerate = false;
  const Eigen::MatrixXd gradient = grad_V(state.grid, stats, state.p, field, &degenerate);
  if (!degenerate) {
    const double gamma = stepsize(config, state.iteration + 1);
    try {
      state.mu = orthonormalize_svd(state.mu.matrix() - gamma * gradient);
    } catch (const degenerate_error&) {
      degenerate = true;
    }
  }
  if (degenerate) ++state.degenerate_gradient_count;

  // Step (c): allocation update from the new deviations, floored so that
  // every stratum keeps sampling.
  std::vector<double> q;
  try {
    q = optimal_allocation(state.p, stats.sigma_hat);
  } catch (const degenerate_error&) {
    q = state.p;  // proportional fallback
  }
  if (config.allocation_floor > 0.0) {
    const double floor = config.allocation_floor / static_cast<double>(cells);
    double total = 0.0;
    for (double& v : q) {
      v = std::max(v, floor);
      total += v;
    }
    for (double& v : q) v /= total;
  }
  state.q = std::move(q);
  state.counts = draws_from_allocation(state.q, config.M);

  // Step (d) is implicit: the grid is equiprobable for every direction
  // matrix, so the probabilities never change.

  // Step (e): averaged estimate, weighted by the variance proxy.
  double weighted_sigma = 0.0;
  for (std::int64_t i = 0; i < cells; ++i) {
    weighted_sigma += state.p[static_cast<std::size_t>(i)] * stats.sigma_hat[static_cast<std::size_t>(i)];
  }
  const double variance_proxy = weighted_sigma * weighted_sigma;
  const double estimate = stratified_estimate(stats);
  state.averaged.update(estimate, variance_proxy / static_cast<double>(config.M));
  state.zero_variance_count = state.averaged.skipped_count();

  IterationTrace trace;
  trace.estimate = estimate;
  trace.variance_proxy = variance_proxy;
  trace.averaged = state.averaged.value();
  trace.mu = state.mu.matrix();
  state.traces.push_back(std::move(trace));

  state.sigma = std::move(stats.sigma_hat);
  ++state.iteration;
}

AdaptReport run(const AdaptConfig& config, const GaussianPayoff& payoff) {
  AdaptState state = init_state(config, payoff);
  for (int t = 0; t < config.N; ++t) iterate(state, payoff, config);

  AdaptReport report;
  report.averaged_estimate = state.averaged.value();
  report.unweighted_estimate = state.averaged.unweighted_mean();
  std::vector<double> proxies;
  proxies.reserve(state.traces.size());
  for (const auto& tr : state.traces) proxies.push_back(tr.variance_proxy);
  report.variance_statistic = harmonic_variance_statistic(proxies);
  report.mu_final = state.mu.matrix();
  report.traces = std::move(state.traces);
  report.degenerate_gradient_count = state.degenerate_gradient_count;
  report.zero_variance_count = state.zero_variance_count;
  return report;
}

double harmonic_variance_statistic(std::span<const double> variance_proxies) {
  double inv_sum = 0.0;
  std::int64_t positive = 0;
  for (double v : variance_proxies) {
    if (v > 0.0) {
      inv_sum += 1.0 / v;
      ++positive;
    }
  }
  if (positive == 0 || inv_sum <= 0.0) return 0.0;
  return static_cast<double>(positive) / inv_sum;
}

}  // namespace adastrat
