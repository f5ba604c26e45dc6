// Python bindings for the core operations: normal primitives, strata and
// allocation arithmetic, the payoff catalogue, the adaptive loop and the
// Latin Hypercube estimator.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "adastrat/adapt.hpp"
#include "adastrat/errors.hpp"
#include "adastrat/experiment.hpp"
#include "adastrat/gauss.hpp"
#include "adastrat/lhs.hpp"
#include "adastrat/normal.hpp"
#include "adastrat/oracle.hpp"
#include "adastrat/payoffs.hpp"
#include "adastrat/rng.hpp"
#include "adastrat/strata.hpp"

namespace py = pybind11;
using namespace adastrat;

namespace {

double evaluate_payoff(const GaussianPayoff& payoff, const Eigen::VectorXd& y,
                       std::optional<std::uint64_t> aux_seed) {
  if (y.size() != payoff.dim()) {
    throw std::invalid_argument("evaluate: point dimension mismatch");
  }
  RandomStream aux;
  RandomStream* aux_ptr = nullptr;
  if (payoff.requires_aux()) {
    aux = RandomStream(aux_seed.value_or(0), 0);
    aux_ptr = &aux;
  }
  return payoff.evaluate(std::span<const double>(y.data(), y.size()), aux_ptr);
}

py::dict report_to_dict(const AdaptReport& report) {
  py::dict out;
  out["price"] = report.averaged_estimate;
  out["unweighted_price"] = report.unweighted_estimate;
  out["variance_statistic"] = report.variance_statistic;
  out["mu_final"] = report.mu_final;
  std::vector<double> estimates, proxies, averaged;
  for (const auto& trace : report.traces) {
    estimates.push_back(trace.estimate);
    proxies.push_back(trace.variance_proxy);
    averaged.push_back(trace.averaged);
  }
  out["estimates"] = estimates;
  out["variance_proxies"] = proxies;
  out["averaged"] = averaged;
  out["degenerate_gradients"] = report.degenerate_gradient_count;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive stratified sampling for Monte Carlo over Gaussian vectors";

  py::register_exception<degenerate_error>(m, "DegenerateError");
  py::register_exception<config_error>(m, "ConfigError");

  // normal primitives
  m.def("std_normal_quantile", &std_normal_quantile, py::arg("u"));
  m.def("std_normal_cdf", &std_normal_cdf, py::arg("x"));
  m.def("std_normal_pdf", &std_normal_pdf, py::arg("x"));

  py::class_<RandomStream>(m, "RandomStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("substream") = 0)
      .def("next_u64", &RandomStream::next_u64)
      .def("next_uniform", &RandomStream::next_uniform)
      .def("next_normal", &RandomStream::next_normal)
      .def("skip_to", &RandomStream::skip_to, py::arg("position"))
      .def_property_readonly("position", &RandomStream::position);

  // direction utilities
  m.def(
      "orthonormalize",
      [](const Eigen::MatrixXd& a) { return orthonormalize_svd(a).matrix(); },
      py::arg("matrix"), "Nearest orthonormal matrix with the same column span");
  m.def("rotation_from_direction", &rotation_from_direction, py::arg("direction"));

  // strata and allocations
  py::class_<StrataGrid>(m, "StrataGrid")
      .def_readonly("m", &StrataGrid::m)
      .def_readonly("I", &StrataGrid::I)
      .def_readonly("boundaries", &StrataGrid::boundaries)
      .def("cell_count", &StrataGrid::cell_count)
      .def("stratum_probability", &StrataGrid::stratum_probability);
  m.def("build_equiprobable_grid", &build_equiprobable_grid, py::arg("m"), py::arg("I"));
  m.def(
      "draws_from_allocation",
      [](const std::vector<double>& q, std::int64_t M) { return draws_from_allocation(q, M); },
      py::arg("q"), py::arg("M"));
  m.def(
      "optimal_allocation",
      [](const std::vector<double>& p, const std::vector<double>& sigma) {
        return optimal_allocation(p, sigma);
      },
      py::arg("p"), py::arg("sigma"));
  m.def(
      "fixed_I_variance",
      [](const std::vector<double>& p, const std::vector<double>& sigma,
         const std::vector<double>& q, std::int64_t M) {
        return fixed_I_variance(p, sigma, q, M);
      },
      py::arg("p"), py::arg("sigma"), py::arg("q"), py::arg("M"));

  // payoffs
  py::class_<GaussianPayoff, PayoffPtr>(m, "Payoff")
      .def_property_readonly("dim", &GaussianPayoff::dim)
      .def_property_readonly("requires_aux", &GaussianPayoff::requires_aux)
      .def("evaluate", &evaluate_payoff, py::arg("y"), py::arg("aux_seed") = std::nullopt);

  m.def(
      "asian_payoff",
      [](double s0, double r, double vol, double maturity, double strike, int steps) {
        AsianParams p{s0, r, vol, maturity, strike, steps};
        return make_asian_payoff(p);
      },
      py::arg("s0") = 50.0, py::arg("r") = 0.05, py::arg("vol") = 0.1,
      py::arg("maturity") = 1.0, py::arg("strike") = 45.0, py::arg("steps") = 16);
  m.def(
      "barrier_payoff",
      [](double s0, double r, double vol, double maturity, double strike, int steps,
         double barrier) {
        BarrierParams p{{s0, r, vol, maturity, strike, steps}, barrier};
        return make_barrier_payoff(p);
      },
      py::arg("s0") = 50.0, py::arg("r") = 0.05, py::arg("vol") = 0.1,
      py::arg("maturity") = 1.0, py::arg("strike") = 50.0, py::arg("steps") = 16,
      py::arg("barrier") = 60.0);
  m.def(
      "basket_payoff",
      [](int assets, double correlation, double r, double maturity, double strike,
         std::uint64_t spot_seed) {
        BasketParams p;
        p.assets = assets;
        p.correlation = correlation;
        p.r = r;
        p.T = maturity;
        p.strike = strike;
        p.spot_seed = spot_seed;
        return make_basket_payoff(p);
      },
      py::arg("assets") = 40, py::arg("correlation") = 0.1, py::arg("r") = 0.05,
      py::arg("maturity") = 1.0, py::arg("strike") = 45.0, py::arg("spot_seed") = 20080);
  m.def(
      "heston_payoff",
      [](double s0, double xi0, double kappa, double theta, double vol_of_vol, double rho,
         double r, double maturity, double strike, int steps, const std::string& scheme) {
        HestonParams p;
        p.s0 = s0;
        p.xi0 = xi0;
        p.mean_reversion = kappa;
        p.long_run_variance = theta;
        p.vol_of_vol = vol_of_vol;
        p.rho = rho;
        p.r = r;
        p.T = maturity;
        p.strike = strike;
        p.steps = steps;
        if (scheme == "euler") {
          p.scheme = HestonParams::Scheme::EulerFullTruncation;
        } else if (scheme != "splitting") {
          throw std::invalid_argument("scheme must be 'splitting' or 'euler'");
        }
        return make_heston_payoff(p);
      },
      py::arg("s0") = 100.0, py::arg("xi0") = 0.01, py::arg("kappa") = 2.0,
      py::arg("theta") = 0.01, py::arg("vol_of_vol") = 0.2, py::arg("rho") = -0.5,
      py::arg("r") = 0.095, py::arg("maturity") = 1.0, py::arg("strike") = 100.0,
      py::arg("steps") = 50, py::arg("scheme") = "splitting");

  m.def("apply_drift", &apply_drift, py::arg("payoff"), py::arg("nu"));
  m.def(
      "optimal_drift",
      [](const PayoffPtr& payoff) { return optimal_drift(*payoff); }, py::arg("payoff"));
  m.def(
      "regression_direction",
      [](const PayoffPtr& payoff, std::int64_t pilot, std::uint64_t seed) {
        RandomStream stream(seed, 0);
        return regression_direction(*payoff, pilot, stream);
      },
      py::arg("payoff"), py::arg("pilot") = 100000, py::arg("seed") = 0);
  m.def("guess_direction_asian", &guess_direction_asian, py::arg("steps") = 16);

  // adaptive loop
  m.def(
      "run_adapt",
      [](const PayoffPtr& payoff, int m_directions, int strata, std::int64_t draws,
         int iterations, std::uint64_t seed, double step_scale, double allocation_floor,
         bool shared_gradient_draws,
         std::optional<Eigen::MatrixXd> initial_direction) {
        AdaptConfig config;
        config.d = payoff->dim();
        config.m = m_directions;
        config.I = strata;
        config.M = draws;
        config.N = iterations;
        config.seed = seed;
        config.step_scale = step_scale;
        config.allocation_floor = allocation_floor;
        config.gradient_draws =
            shared_gradient_draws ? GradientDraws::Shared : GradientDraws::Independent;
        config.initial_direction = std::move(initial_direction);
        return report_to_dict(run(config, *payoff));
      },
      py::arg("payoff"), py::arg("m") = 1, py::arg("strata") = 100, py::arg("draws") = 20000,
      py::arg("iterations") = 200, py::arg("seed") = 0, py::arg("step_scale") = 0.3,
      py::arg("allocation_floor") = 0.1, py::arg("shared_gradient_draws") = true,
      py::arg("initial_direction") = std::nullopt);

  // Latin Hypercube
  m.def(
      "lhs_estimate",
      [](const PayoffPtr& payoff, std::optional<Eigen::MatrixXd> rotation, std::int64_t draws,
         int replicates, std::uint64_t seed) {
        const LhsResult result = lhs_estimate(
            *payoff, rotation.has_value() ? &rotation.value() : nullptr, draws, replicates,
            seed);
        return py::make_tuple(result.mean, result.variance);
      },
      py::arg("payoff"), py::arg("rotation") = std::nullopt, py::arg("draws") = 20000,
      py::arg("replicates") = 200, py::arg("seed") = 0);

  // oracle helpers
  m.def("truncated_normal_moments", &oracle::truncated_normal_moments, py::arg("a"),
        py::arg("b"));

  // experiment harness driven by config text
  m.def(
      "run_experiment_text",
      [](const std::string& text) {
        py::list rows;
        for (const auto& section : parse_config_text(text)) {
          const ExperimentConfig config = config_from_section(section);
          const ExperimentResult result = run_experiment(config);
          for (const auto& row : result.rows) {
            py::dict d;
            d["section"] = section.name;
            d["model"] = row.model;
            d["params"] = row.params;
            d["drift"] = row.drift;
            d["method"] = row.method;
            d["direction"] = row.direction;
            d["allocation"] = row.allocation;
            d["price"] = row.price;
            d["variance"] = row.variance;
            d["seed"] = row.seed;
            d["I"] = row.strata;
            d["M"] = row.draws;
            d["N"] = row.iterations;
            rows.append(std::move(d));
          }
        }
        return rows;
      },
      py::arg("text"), "Run every experiment section of a configuration text");
}
