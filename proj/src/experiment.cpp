#include "adastrat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/gradient.hpp"
#include "adastrat/lhs.hpp"
#include "adastrat/normal.hpp"
#include "adastrat/oracle.hpp"
#include "adastrat/parallel.hpp"

namespace adastrat {

namespace {

constexpr std::uint64_t kTagMc = 20;
constexpr std::uint64_t kTagMcAux = 21;
constexpr std::uint64_t kTagFixed = 22;
constexpr std::uint64_t kTagFixedAux = 23;
constexpr std::uint64_t kTagPilot = 26;

// phi(y) = y_1 + y_2: an analytic integrand with known mean 0 and
// variance 2, used to validate the harness itself.
class LinearTestPayoff final : public GaussianPayoff {
 public:
  explicit LinearTestPayoff(int d) : d_(d) {
    if (d < 2) throw std::invalid_argument("analytic payoff needs d >= 2");
  }
  int dim() const override { return d_; }
  double evaluate(std::span<const double> y, RandomStream*) const override {
    return y[0] + y[1];
  }

 private:
  int d_;
};

int payoff_dimension(const ExperimentConfig& config) {
  switch (config.model) {
    case Model::Asian:
      return config.asian.steps;
    case Model::Barrier:
      return config.asian.steps;
    case Model::Basket:
      return config.basket.assets;
    case Model::Heston:
      return 2 * config.heston.steps;
    case Model::Analytic:
      return config.analytic_dim;
  }
  return 0;
}

BarrierParams barrier_params(const ExperimentConfig& config) {
  BarrierParams bp = config.barrier;
  bp.base = config.asian;
  return bp;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (strata < 2) throw config_error("strata", "need at least two strata per direction");
  const int d = payoff_dimension(*this);
  if (d < 1) throw config_error("model", "payoff dimension must be positive");
  if (directions < 1) throw config_error("directions", "need at least one direction");
  if (method != Method::MonteCarlo && directions >= d) {
    throw config_error("directions", "stratification requires m < d");
  }
  if (draws < 1) throw config_error("draws", "need at least one draw per iteration");
  if (iterations < 1) throw config_error("iters", "need at least one iteration");
  if (replications < 1) throw config_error("reps", "need at least one replication");
  if (!(allocation_floor >= 0.0) || allocation_floor >= 1.0) {
    throw config_error("floor", "allocation floor must satisfy floor/I^m < 1/I^m");
  }
  if (!(step_scale > 0.0)) throw config_error("step_scale", "must be positive");
  if (step_policy == StepsizePolicy::Decreasing && !(step_alpha > 0.5 && step_alpha <= 1.0)) {
    throw config_error("step_alpha", "decreasing policy requires alpha in (1/2, 1]");
  }
  if (pilot_draws < 1000) throw config_error("pilot", "pilot run needs at least 1000 draws");

  if (method == Method::Adapt && direction != DirectionChoice::Adapt) {
    throw config_error("direction", "the adaptive method determines its own direction");
  }
  if (direction == DirectionChoice::Adapt && method == Method::StratFixed) {
    throw config_error("direction", "fixed stratification needs reg, star, l or custom");
  }
  if (direction == DirectionChoice::None && method != Method::Lhs) {
    throw config_error("direction", "'none' (identity rotation) only applies to lhs");
  }
  if (direction == DirectionChoice::Guess &&
      (model == Model::Heston || model == Model::Analytic)) {
    throw config_error("direction", "no per-model guess direction for this model");
  }
  if (direction == DirectionChoice::Custom) {
    if (custom_direction.rows() != d || custom_direction.cols() != directions) {
      throw config_error("direction", "custom direction must be d x m");
    }
    const Eigen::MatrixXd gram = custom_direction.transpose() * custom_direction;
    const double defect =
        (gram - Eigen::MatrixXd::Identity(directions, directions)).cwiseAbs().maxCoeff();
    if (defect > 1e-8) {
      throw config_error("direction", "custom direction matrix is not orthonormal (1e-8)");
    }
  }
  if (drift == DriftChoice::Explicit && drift_vector.size() != d) {
    throw config_error("drift", "explicit drift vector must match the payoff dimension");
  }
  if (model == Model::Heston) {
    const auto& h = heston;
    if (h.vol_of_vol * h.vol_of_vol > 4.0 * h.mean_reversion * h.long_run_variance) {
      throw config_error("model", "heston requires vol_of_vol^2 <= 4 k theta");
    }
  }
}

PayoffPtr base_payoff(const ExperimentConfig& config) {
  switch (config.model) {
    case Model::Asian:
      return make_asian_payoff(config.asian);
    case Model::Barrier:
      return make_barrier_payoff(barrier_params(config));
    case Model::Basket:
      return make_basket_payoff(config.basket);
    case Model::Heston:
      return make_heston_payoff(config.heston);
    case Model::Analytic:
      return std::make_shared<LinearTestPayoff>(config.analytic_dim);
  }
  throw std::logic_error("base_payoff: unreachable");
}

Eigen::VectorXd resolve_drift(const ExperimentConfig& config, const GaussianPayoff& base) {
  const int d = base.dim();
  switch (config.drift) {
    case DriftChoice::None:
      return Eigen::VectorXd::Zero(d);
    case DriftChoice::Explicit:
      return config.drift_vector;
    case DriftChoice::Optimal:
      try {
        return optimal_drift(base);
      } catch (const degenerate_error&) {
        return Eigen::VectorXd::Zero(d);  // proceed undrifted
      }
  }
  throw std::logic_error("resolve_drift: unreachable");
}

Eigen::MatrixXd resolve_direction(const ExperimentConfig& config, const GaussianPayoff& payoff) {
  const int d = payoff.dim();
  auto as_matrix = [&](Eigen::VectorXd v) {
    if (config.directions != 1) {
      throw config_error("direction", "vector direction choices require m = 1");
    }
    const double n = v.norm();
    if (n <= 0.0) throw degenerate_error("resolve_direction: zero direction");
    Eigen::MatrixXd mu(d, 1);
    mu.col(0) = v / n;
    fix_column_signs(mu);
    return mu;
  };

  switch (config.direction) {
    case DirectionChoice::Star: {
      const PayoffPtr base = base_payoff(config);
      Eigen::VectorXd nu = optimal_drift(*base);
      if (nu.norm() <= 0.0) {
        throw degenerate_error("resolve_direction: optimal drift is zero");
      }
      return as_matrix(std::move(nu));
    }
    case DirectionChoice::Regression: {
      RandomStream stream(derive_seed(config.seed, 0x9E6u), substream_key(kTagPilot, 0, 0));
      try {
        return as_matrix(regression_direction(payoff, config.pilot_draws, stream));
      } catch (const degenerate_error&) {
        // No usable regression signal: fall back to the constant vector.
        return as_matrix(Eigen::VectorXd::Constant(d, 1.0));
      }
    }
    case DirectionChoice::Guess: {
      if (config.model == Model::Basket) return as_matrix(guess_direction_basket(config.basket));
      return as_matrix(guess_direction_asian(config.asian.steps));
    }
    case DirectionChoice::Custom:
      return orthonormalize_svd(config.custom_direction).matrix();
    case DirectionChoice::Adapt: {
      AdaptConfig ac;
      ac.d = d;
      ac.m = config.directions;
      ac.I = config.strata;
      ac.M = config.draws;
      ac.N = config.iterations;
      ac.seed = derive_seed(config.seed, 0xADAu);
      ac.allocation_floor = config.allocation_floor;
      ac.policy = config.step_policy;
      ac.step_scale = config.step_scale;
      ac.step_alpha = config.step_alpha;
      return run(ac, payoff).mu_final;
    }
    case DirectionChoice::None:
      return Eigen::MatrixXd();  // identity rotation
  }
  throw std::logic_error("resolve_direction: unreachable");
}

namespace {

// Plain Monte Carlo: mean of phi and the per-sample variance over `total`
// standard normal draws.
std::pair<double, double> run_plain_mc(const GaussianPayoff& payoff, std::int64_t total,
                                       std::uint64_t seed) {
  const int d = payoff.dim();
  const std::int64_t chunk = 8192;
  const std::int64_t chunks = (total + chunk - 1) / chunk;
  std::vector<double> sums(static_cast<std::size_t>(chunks), 0.0);
  std::vector<double> sums_sq(static_cast<std::size_t>(chunks), 0.0);
  const bool needs_aux = payoff.requires_aux();
  parallel_for(chunks, [&](std::int64_t c) {
    RandomStream stream(seed, substream_key(kTagMc, 0, static_cast<std::uint64_t>(c)));
    const std::int64_t n = std::min(chunk, total - c * chunk);
    Eigen::VectorXd y(d);
    double s = 0.0, s2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) y(j) = stream.next_normal();
      RandomStream aux;
      RandomStream* aux_ptr = nullptr;
      if (needs_aux) {
        aux = RandomStream(seed, substream_key(kTagMcAux, static_cast<std::uint64_t>(c),
                                               static_cast<std::uint64_t>(i)));
        aux_ptr = &aux;
      }
      const double v = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
      s += v;
      s2 += v * v;
    }
    sums[static_cast<std::size_t>(c)] = s;
    sums_sq[static_cast<std::size_t>(c)] = s2;
  });
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t c = 0; c < sums.size(); ++c) {
    sum += sums[c];
    sum_sq += sums_sq[c];
  }
  const double mean = sum / static_cast<double>(total);
  const double var = std::max(sum_sq / static_cast<double>(total) - mean * mean, 0.0);
  return {mean, var};
}

// One stratified pass over all strata at fixed direction; sigma values of
// strata with fewer than two draws are carried from prev_sigma.
StratumStats stratified_pass(const GaussianPayoff& payoff, const StratificationMatrix& mu,
                             const StrataGrid& grid, std::span<const std::int64_t> counts,
                             std::uint64_t seed, std::uint64_t iteration,
                             std::span<const double> prev_sigma) {
  const int d = mu.dim();
  const std::int64_t cells = grid.cell_count();
  const double p = grid.stratum_probability();
  const bool needs_aux = payoff.requires_aux();
  std::vector<std::int64_t> prefix(static_cast<std::size_t>(cells) + 1, 0);
  for (std::int64_t i = 0; i < cells; ++i) {
    prefix[static_cast<std::size_t>(i) + 1] =
        prefix[static_cast<std::size_t>(i)] + counts[static_cast<std::size_t>(i)];
  }
  StratumStats stats;
  stats.resize(static_cast<std::size_t>(cells));
  parallel_for(cells, [&](std::int64_t i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::int64_t n = counts[ui];
    stats.draws_used[ui] = n;
    StratumMoments moments;
    if (n > 0) {
      RandomStream stream(seed, substream_key(kTagFixed, iteration, static_cast<std::uint64_t>(i)));
      const auto multi = grid.multi_index(i);
      StratumSampler sampler(mu, grid.cell(multi));
      Eigen::VectorXd y(d);
      double sum = 0.0, sum_sq = 0.0;
      for (std::int64_t r = 0; r < n; ++r) {
        sampler.draw(stream, y);
        RandomStream aux;
        RandomStream* aux_ptr = nullptr;
        if (needs_aux) {
          aux = RandomStream(seed, substream_key(kTagFixedAux, iteration,
                                                 static_cast<std::uint64_t>(prefix[ui] + r)));
          aux_ptr = &aux;
        }
        const double v = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
        sum += v;
        sum_sq += v * v;
      }
      moments = stratum_moments_from_sums(sum, sum_sq, n, p);
    } else {
      moments.empty = true;
      moments.sigma_stale = true;
    }
    stats.nu_phi[ui] = moments.nu_phi;
    stats.nu_phi2[ui] = moments.nu_phi2;
    stats.sigma_hat[ui] =
        moments.sigma_stale ? (prev_sigma.empty() ? 0.0 : prev_sigma[ui]) : moments.sigma_hat;
  });
  return stats;
}

void apply_floor(std::vector<double>& q, double floor_fraction) {
  if (floor_fraction <= 0.0) return;
  const double floor = floor_fraction / static_cast<double>(q.size());
  double total = 0.0;
  for (double& v : q) {
    v = std::max(v, floor);
    total += v;
  }
  for (double& v : q) v /= total;
}

// Fixed-direction stratification with proportional allocation: one pass of
// M*N draws; reports sum_i p_i sigma_i^2.
std::pair<double, double> run_fixed_proportional(const GaussianPayoff& payoff,
                                                 const StratificationMatrix& mu,
                                                 const StrataGrid& grid, std::int64_t total,
                                                 std::uint64_t seed) {
  const std::int64_t cells = grid.cell_count();
  const std::vector<double> p(static_cast<std::size_t>(cells), grid.stratum_probability());
  const auto counts = draws_from_allocation(p, total);
  const StratumStats stats = stratified_pass(payoff, mu, grid, counts, seed, 0, {});
  double variance = 0.0;
  for (std::int64_t i = 0; i < cells; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    variance += p[ui] * stats.sigma_hat[ui] * stats.sigma_hat[ui];
  }
  return {stratified_estimate(stats), variance};
}

// Fixed-direction stratification with the optimal allocation learnt
// iteratively: N rounds of M draws, allocation from the previous round's
// deviations, harmonic variance statistic over the rounds.
std::pair<double, double> run_fixed_optimal(const GaussianPayoff& payoff,
                                            const StratificationMatrix& mu,
                                            const StrataGrid& grid, std::int64_t M, int N,
                                            double floor_fraction, std::uint64_t seed) {
  const std::int64_t cells = grid.cell_count();
  const std::vector<double> p(static_cast<std::size_t>(cells), grid.stratum_probability());
  std::vector<double> sigma(static_cast<std::size_t>(cells), 0.0);
  std::vector<double> q = p;
  AveragedEstimate averaged;
  std::vector<double> proxies;
  proxies.reserve(static_cast<std::size_t>(N));
  for (int t = 0; t < N; ++t) {
    const auto counts = draws_from_allocation(q, M);
    const StratumStats stats =
        stratified_pass(payoff, mu, grid, counts, seed, static_cast<std::uint64_t>(t), sigma);
    sigma = stats.sigma_hat;
    double weighted = 0.0;
    for (std::int64_t i = 0; i < cells; ++i) {
      weighted += p[static_cast<std::size_t>(i)] * sigma[static_cast<std::size_t>(i)];
    }
    const double proxy = weighted * weighted;
    proxies.push_back(proxy);
    averaged.update(stratified_estimate(stats), proxy / static_cast<double>(M));
    try {
      q = optimal_allocation(p, sigma);
    } catch (const degenerate_error&) {
      q = p;
    }
    apply_floor(q, floor_fraction);
  }
  return {averaged.value(), harmonic_variance_statistic(proxies)};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const PayoffPtr base = base_payoff(config);
  const Eigen::VectorXd nu = resolve_drift(config, *base);
  const PayoffPtr payoff = nu.isZero(0.0) ? base : apply_drift(base, nu);
  const int d = payoff->dim();

  Eigen::MatrixXd direction;    // fixed direction / rotation source
  const Eigen::MatrixXd* rotation_direction = nullptr;
  if (config.method == Method::StratFixed ||
      (config.method == Method::Lhs && config.direction != DirectionChoice::None)) {
    direction = resolve_direction(config, *payoff);
    rotation_direction = &direction;
  }
  Eigen::MatrixXd rotation;
  if (config.method == Method::Lhs && rotation_direction != nullptr) {
    if (direction.cols() != 1) {
      throw config_error("direction", "lhs rotation requires a single direction");
    }
    rotation = rotation_from_direction(direction.col(0));
  }

  ExperimentResult result;
  result.prices.resize(static_cast<std::size_t>(config.replications));
  result.variances.resize(static_cast<std::size_t>(config.replications));

  for (int rep = 0; rep < config.replications; ++rep) {
    const std::uint64_t seed_rep = derive_seed(config.seed, static_cast<std::uint64_t>(rep));
    double price = 0.0, variance = 0.0;
    switch (config.method) {
      case Method::MonteCarlo: {
        const std::int64_t total = config.draws * static_cast<std::int64_t>(config.iterations);
        std::tie(price, variance) = run_plain_mc(*payoff, total, seed_rep);
        break;
      }
      case Method::Adapt: {
        AdaptConfig ac;
        ac.d = d;
        ac.m = config.directions;
        ac.I = config.strata;
        ac.M = config.draws;
        ac.N = config.iterations;
        ac.seed = seed_rep;
        ac.allocation_floor = config.allocation_floor;
        ac.policy = config.step_policy;
        ac.step_scale = config.step_scale;
        ac.step_alpha = config.step_alpha;
        AdaptReport report = run(ac, *payoff);
        price = report.averaged_estimate;
        variance = report.variance_statistic;
        if (rep == 0) {
          result.mu_final = report.mu_final;
          result.traces = std::move(report.traces);
        }
        break;
      }
      case Method::StratFixed: {
        const StratificationMatrix mu(direction);
        const StrataGrid grid = build_equiprobable_grid(config.directions, config.strata);
        if (config.allocation == AllocationChoice::Proportional) {
          const std::int64_t total = config.draws * static_cast<std::int64_t>(config.iterations);
          std::tie(price, variance) = run_fixed_proportional(*payoff, mu, grid, total, seed_rep);
        } else {
          std::tie(price, variance) =
              run_fixed_optimal(*payoff, mu, grid, config.draws, config.iterations,
                                config.allocation_floor, seed_rep);
        }
        break;
      }
      case Method::Lhs: {
        const LhsResult lhs = lhs_estimate(*payoff, rotation_direction ? &rotation : nullptr,
                                           config.draws, config.iterations, seed_rep);
        price = lhs.mean;
        variance = lhs.variance;
        break;
      }
    }
    result.prices[static_cast<std::size_t>(rep)] = price;
    result.variances[static_cast<std::size_t>(rep)] = variance;
  }

  double price = 0.0, variance = 0.0;
  for (int rep = 0; rep < config.replications; ++rep) {
    price += result.prices[static_cast<std::size_t>(rep)];
    variance += result.variances[static_cast<std::size_t>(rep)];
  }
  price /= config.replications;
  variance /= config.replications;

  ResultRow row;
  row.model = model_name(config.model);
  row.params = params_string(config);
  row.drift = config.drift == DriftChoice::None
                  ? "none"
                  : (config.drift == DriftChoice::Optimal ? "optimal" : "explicit");
  switch (config.method) {
    case Method::MonteCarlo:
      row.method = "mc";
      break;
    case Method::Adapt:
      row.method = "adapt";
      break;
    case Method::StratFixed:
      row.method = "strat-fixed";
      break;
    case Method::Lhs:
      row.method = "lhs";
      break;
  }
  switch (config.direction) {
    case DirectionChoice::Adapt:
      row.direction = config.method == Method::MonteCarlo ? "none" : "adapt";
      break;
    case DirectionChoice::Regression:
      row.direction = "reg";
      break;
    case DirectionChoice::Star:
      row.direction = "star";
      break;
    case DirectionChoice::Guess:
      row.direction = "l";
      break;
    case DirectionChoice::Custom:
      row.direction = "custom";
      break;
    case DirectionChoice::None:
      row.direction = "none";
      break;
  }
  if (config.method == Method::MonteCarlo) row.direction = "none";
  if (config.method == Method::MonteCarlo || config.method == Method::Lhs) {
    row.allocation = "none";
  } else if (config.method == Method::Adapt) {
    row.allocation = "opt";
  } else {
    row.allocation = config.allocation == AllocationChoice::Proportional ? "prop" : "opt";
  }
  row.price = price;
  row.variance = variance;
  row.seed = config.seed;
  row.strata = config.strata;
  row.draws = config.draws;
  row.iterations = config.iterations;
  result.rows.push_back(std::move(row));
  return result;
}

std::string model_name(Model model) {
  switch (model) {
    case Model::Asian:
      return "asian";
    case Model::Barrier:
      return "barrier";
    case Model::Basket:
      return "basket";
    case Model::Heston:
      return "heston";
    case Model::Analytic:
      return "analytic";
  }
  return "?";
}

std::string params_string(const ExperimentConfig& config) {
  std::ostringstream out;
  switch (config.model) {
    case Model::Asian:
      out << "v=" << format_double(config.asian.vol) << ";K=" << format_double(config.asian.strike)
          << ";s0=" << format_double(config.asian.s0) << ";r=" << format_double(config.asian.r)
          << ";T=" << format_double(config.asian.T) << ";d=" << config.asian.steps;
      break;
    case Model::Barrier:
      out << "v=" << format_double(config.asian.vol) << ";K=" << format_double(config.asian.strike)
          << ";B=" << format_double(config.barrier.barrier) << ";s0="
          << format_double(config.asian.s0) << ";r=" << format_double(config.asian.r)
          << ";T=" << format_double(config.asian.T) << ";d=" << config.asian.steps;
      break;
    case Model::Basket:
      out << "c=" << format_double(config.basket.correlation)
          << ";K=" << format_double(config.basket.strike) << ";d=" << config.basket.assets
          << ";r=" << format_double(config.basket.r) << ";T=" << format_double(config.basket.T)
          << ";spotseed=" << config.basket.spot_seed;
      break;
    case Model::Heston:
      out << "xi0=" << format_double(config.heston.xi0)
          << ";K=" << format_double(config.heston.strike)
          << ";S0=" << format_double(config.heston.s0)
          << ";k=" << format_double(config.heston.mean_reversion)
          << ";theta=" << format_double(config.heston.long_run_variance)
          << ";sigma=" << format_double(config.heston.vol_of_vol)
          << ";rho=" << format_double(config.heston.rho)
          << ";r=" << format_double(config.heston.r) << ";T=" << format_double(config.heston.T)
          << ";d=" << config.heston.steps;
      break;
    case Model::Analytic:
      out << "d=" << config.analytic_dim;
      break;
  }
  return out.str();
}

void emit_csv(std::span<const ResultRow> rows, std::ostream& out) {
  if (rows.empty()) throw std::invalid_argument("emit_csv: no rows");
  out << "model,params,drift,method,direction,allocation,price,variance,seed,I,M,N\n";
  for (const auto& row : rows) {
    out << row.model << ',' << row.params << ',' << row.drift << ',' << row.method << ','
        << row.direction << ',' << row.allocation << ',' << format_double(row.price) << ','
        << format_double(row.variance) << ',' << row.seed << ',' << row.strata << ','
        << row.draws << ',' << row.iterations << '\n';
  }
}

void emit_csv(std::span<const ResultRow> rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  emit_csv(rows, out);
  out.flush();
  if (!out.good()) throw std::runtime_error("emit_csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Configuration files: flat key = value entries under [section] headers.

std::vector<ConfigSection> parse_config_text(const std::string& text) {
  std::vector<ConfigSection> sections;
  ConfigSection current;
  bool has_current = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return std::string();
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') {
        throw config_error("line " + std::to_string(line_no), "unterminated section header");
      }
      if (has_current) sections.push_back(std::move(current));
      current = ConfigSection{};
      current.name = trim(stripped.substr(1, stripped.size() - 2));
      has_current = true;
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw config_error("line " + std::to_string(line_no), "expected key = value");
    }
    if (!has_current) {
      current.name = "default";
      has_current = true;
    }
    current.entries.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  if (has_current) sections.push_back(std::move(current));
  return sections;
}

std::vector<ConfigSection> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config", "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

double parse_number(const std::string& path, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw config_error(path, "expected a number, got '" + value + "'");
  }
}

std::int64_t parse_integer(const std::string& path, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw config_error(path, "expected an integer, got '" + value + "'");
  }
}

Eigen::VectorXd parse_vector(const std::string& path, const std::string& value) {
  std::vector<double> values;
  std::string token;
  std::istringstream in(value);
  while (std::getline(in, token, ',')) values.push_back(parse_number(path, token));
  if (values.empty()) throw config_error(path, "expected a comma separated vector");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd load_direction_file(const std::string& path, int rows) {
  std::ifstream in(path);
  if (!in) throw config_error("direction", "cannot open " + path);
  std::vector<double> values;
  double v = 0.0;
  while (in >> v) values.push_back(v);
  if (values.empty() || rows < 1 || values.size() % static_cast<std::size_t>(rows) != 0) {
    throw config_error("direction", "file must hold d x m values, column major");
  }
  const auto cols = static_cast<Eigen::Index>(values.size() / static_cast<std::size_t>(rows));
  return Eigen::Map<Eigen::MatrixXd>(values.data(), rows, cols);
}

}  // namespace

ExperimentConfig config_from_section(const ConfigSection& section) {
  ExperimentConfig config;
  std::string custom_direction_file;
  for (const auto& [key, value] : section.entries) {
    const std::string path = section.name + "." + key;
    if (key == "model") {
      if (value == "asian") config.model = Model::Asian;
      else if (value == "barrier" || value == "knockout") config.model = Model::Barrier;
      else if (value == "basket") config.model = Model::Basket;
      else if (value == "heston") config.model = Model::Heston;
      else if (value == "analytic") config.model = Model::Analytic;
      else throw config_error(path, "unknown model '" + value + "'");
    } else if (key == "s0") {
      config.asian.s0 = parse_number(path, value);
      config.heston.s0 = config.asian.s0;
    } else if (key == "r") {
      config.asian.r = parse_number(path, value);
      config.basket.r = config.asian.r;
      config.heston.r = config.asian.r;
    } else if (key == "vol" || key == "v") {
      config.asian.vol = parse_number(path, value);
    } else if (key == "T") {
      config.asian.T = parse_number(path, value);
      config.basket.T = config.asian.T;
      config.heston.T = config.asian.T;
    } else if (key == "strike" || key == "K") {
      config.asian.strike = parse_number(path, value);
      config.basket.strike = config.asian.strike;
      config.heston.strike = config.asian.strike;
    } else if (key == "steps") {
      config.asian.steps = static_cast<int>(parse_integer(path, value));
      config.heston.steps = config.asian.steps;
    } else if (key == "barrier" || key == "B") {
      config.barrier.barrier = parse_number(path, value);
    } else if (key == "assets") {
      config.basket.assets = static_cast<int>(parse_integer(path, value));
    } else if (key == "correlation" || key == "c") {
      config.basket.correlation = parse_number(path, value);
    } else if (key == "spot_seed") {
      config.basket.spot_seed = static_cast<std::uint64_t>(parse_integer(path, value));
    } else if (key == "xi0") {
      config.heston.xi0 = parse_number(path, value);
    } else if (key == "kappa") {
      config.heston.mean_reversion = parse_number(path, value);
    } else if (key == "theta") {
      config.heston.long_run_variance = parse_number(path, value);
    } else if (key == "vol_of_vol") {
      config.heston.vol_of_vol = parse_number(path, value);
    } else if (key == "rho") {
      config.heston.rho = parse_number(path, value);
    } else if (key == "heston_steps") {
      config.heston.steps = static_cast<int>(parse_integer(path, value));
    } else if (key == "heston_scheme") {
      if (value == "splitting") config.heston.scheme = HestonParams::Scheme::Splitting;
      else if (value == "euler") config.heston.scheme = HestonParams::Scheme::EulerFullTruncation;
      else throw config_error(path, "expected splitting or euler");
    } else if (key == "heston_averaging") {
      if (value == "trapezoid") config.heston.averaging = HestonParams::Averaging::Trapezoid;
      else if (value == "discrete") config.heston.averaging = HestonParams::Averaging::Discrete;
      else throw config_error(path, "expected trapezoid or discrete");
    } else if (key == "dim") {
      config.analytic_dim = static_cast<int>(parse_integer(path, value));
    } else if (key == "drift") {
      if (value == "none") config.drift = DriftChoice::None;
      else if (value == "optimal") config.drift = DriftChoice::Optimal;
      else {
        config.drift = DriftChoice::Explicit;
        config.drift_vector = parse_vector(path, value);
      }
    } else if (key == "method") {
      if (value == "mc") config.method = Method::MonteCarlo;
      else if (value == "adapt") config.method = Method::Adapt;
      else if (value == "strat-fixed") config.method = Method::StratFixed;
      else if (value == "lhs") config.method = Method::Lhs;
      else throw config_error(path, "unknown method '" + value + "'");
    } else if (key == "direction") {
      if (value == "adapt") config.direction = DirectionChoice::Adapt;
      else if (value == "reg") config.direction = DirectionChoice::Regression;
      else if (value == "star") config.direction = DirectionChoice::Star;
      else if (value == "l") config.direction = DirectionChoice::Guess;
      else if (value == "none") config.direction = DirectionChoice::None;
      else if (value.rfind("custom=", 0) == 0) {
        config.direction = DirectionChoice::Custom;
        custom_direction_file = value.substr(7);
      } else throw config_error(path, "unknown direction '" + value + "'");
    } else if (key == "allocation") {
      if (value == "prop") config.allocation = AllocationChoice::Proportional;
      else if (value == "opt") config.allocation = AllocationChoice::Optimal;
      else throw config_error(path, "expected prop or opt");
    } else if (key == "strata" || key == "I") {
      config.strata = static_cast<int>(parse_integer(path, value));
    } else if (key == "directions" || key == "m") {
      config.directions = static_cast<int>(parse_integer(path, value));
    } else if (key == "draws" || key == "M") {
      config.draws = parse_integer(path, value);
    } else if (key == "iters" || key == "N") {
      config.iterations = static_cast<int>(parse_integer(path, value));
    } else if (key == "reps" || key == "R") {
      config.replications = static_cast<int>(parse_integer(path, value));
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_integer(path, value));
    } else if (key == "floor") {
      config.allocation_floor = parse_number(path, value);
    } else if (key == "step_scale") {
      config.step_scale = parse_number(path, value);
    } else if (key == "step_policy") {
      if (value == "constant") config.step_policy = StepsizePolicy::Constant;
      else if (value == "decreasing") config.step_policy = StepsizePolicy::Decreasing;
      else throw config_error(path, "expected constant or decreasing");
    } else if (key == "step_alpha") {
      config.step_alpha = parse_number(path, value);
    } else if (key == "pilot") {
      config.pilot_draws = parse_integer(path, value);
    } else if (key == "out") {
      config.output_path = value;
    } else {
      throw config_error(path, "unknown key");
    }
  }
  if (config.method == Method::Adapt) config.direction = DirectionChoice::Adapt;
  if (!custom_direction_file.empty()) {
    config.custom_direction = load_direction_file(custom_direction_file, payoff_dimension(config));
  }
  return config;
}

}  // namespace adastrat
