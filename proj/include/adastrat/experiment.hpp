#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adastrat/adapt.hpp"
#include "adastrat/payoffs.hpp"

namespace adastrat {

enum class Model { Asian, Barrier, Basket, Heston, Analytic };
enum class Method { MonteCarlo, Adapt, StratFixed, Lhs };
enum class DirectionChoice { Adapt, Regression, Star, Guess, Custom, None };
enum class AllocationChoice { Proportional, Optimal };
enum class DriftChoice { None, Optimal, Explicit };

// One experiment: a model, a drift, a method and its knobs. Field names
// follow the command line flags (--strata, --draws, --iters, --reps).
struct ExperimentConfig {
  Model model = Model::Asian;
  AsianParams asian;
  BarrierParams barrier;
  BasketParams basket;
  HestonParams heston;
  int analytic_dim = 2;  // phi(y) = y_1 + y_2 embedded in R^d

  DriftChoice drift = DriftChoice::None;
  Eigen::VectorXd drift_vector;  // only for DriftChoice::Explicit

  Method method = Method::MonteCarlo;
  DirectionChoice direction = DirectionChoice::Star;
  Eigen::MatrixXd custom_direction;  // d x m, required for Custom
  AllocationChoice allocation = AllocationChoice::Optimal;

  int strata = 100;          // I
  int directions = 1;        // m
  std::int64_t draws = 20000;  // M per iteration
  int iterations = 200;      // N
  int replications = 10;     // R
  std::uint64_t seed = 0;
  double allocation_floor = 0.1;
  StepsizePolicy step_policy = StepsizePolicy::Constant;
  double step_scale = 0.3;
  double step_alpha = 0.7;  // only for the decreasing policy
  std::int64_t pilot_draws = 100000;  // regression direction pilot size
  std::string output_path;

  void validate() const;  // throws config_error with a field path
};

struct ResultRow {
  std::string model;
  std::string params;
  std::string drift;
  std::string method;
  std::string direction;
  std::string allocation;
  double price = 0.0;
  double variance = 0.0;
  std::uint64_t seed = 0;
  int strata = 0;
  std::int64_t draws = 0;
  int iterations = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  // Per-replication values behind the averaged row, in replication order.
  std::vector<double> prices;
  std::vector<double> variances;
  // Final adaptive direction and traces of the first replication, when the
  // adaptive method ran.
  Eigen::MatrixXd mu_final;
  std::vector<IterationTrace> traces;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// CSV with header model,params,drift,method,direction,allocation,price,
// variance,seed,I,M,N; floats with 6 significant digits, rows in input
// order.
void emit_csv(std::span<const ResultRow> rows, std::ostream& out);
void emit_csv(std::span<const ResultRow> rows, const std::string& path);

// Flat key = value configuration with one [section] per experiment.
struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
};
std::vector<ConfigSection> parse_config_file(const std::string& path);
std::vector<ConfigSection> parse_config_text(const std::string& text);
ExperimentConfig config_from_section(const ConfigSection& section);

// Payoff and direction assembly shared with the command line tool.
PayoffPtr base_payoff(const ExperimentConfig& config);
Eigen::VectorXd resolve_drift(const ExperimentConfig& config, const GaussianPayoff& base);
// The stratification direction for fixed-direction methods and rotations;
// payoff is the drifted estimand. Columns are orthonormal.
Eigen::MatrixXd resolve_direction(const ExperimentConfig& config, const GaussianPayoff& payoff);

std::string model_name(Model model);
std::string params_string(const ExperimentConfig& config);

}  // namespace adastrat
