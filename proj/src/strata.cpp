#include "adastrat/strata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/normal.hpp"

namespace adastrat {

std::int64_t StrataGrid::cell_count() const {
  std::int64_t n = 1;
  for (int k = 0; k < m; ++k) n *= I;
  return n;
}

double StrataGrid::stratum_probability() const {
  return 1.0 / static_cast<double>(cell_count());
}

std::pair<double, double> StrataGrid::interval(int j) const {
  if (j < 0 || j >= I) throw std::out_of_range("StrataGrid::interval");
  return {static_cast<double>(j) / I, static_cast<double>(j + 1) / I};
}

ProbabilityCell StrataGrid::cell(std::span<const int> multi_index) const {
  if (static_cast<int>(multi_index.size()) != m) {
    throw std::invalid_argument("StrataGrid::cell: rank mismatch");
  }
  ProbabilityCell c;
  c.reserve(m);
  for (int idx : multi_index) c.push_back(interval(idx));
  return c;
}

std::int64_t StrataGrid::linear_index(std::span<const int> multi_index) const {
  if (static_cast<int>(multi_index.size()) != m) {
    throw std::invalid_argument("StrataGrid::linear_index: rank mismatch");
  }
  std::int64_t lin = 0;
  for (int k = 0; k < m; ++k) {
    const int idx = multi_index[k];
    if (idx < 0 || idx >= I) throw std::out_of_range("StrataGrid::linear_index");
    lin = lin * I + idx;
  }
  return lin;
}

std::vector<int> StrataGrid::multi_index(std::int64_t linear) const {
  if (linear < 0 || linear >= cell_count()) throw std::out_of_range("StrataGrid::multi_index");
  std::vector<int> idx(m);
  for (int k = m - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(linear % I);
    linear /= I;
  }
  return idx;
}

int StrataGrid::locate(double x) const {
  // First boundary >= x; ties belong to the lower cell per the half-open
  // (a, b] convention.
  const auto it = std::lower_bound(boundaries.begin(), boundaries.end(), x);
  auto j = static_cast<std::int64_t>(it - boundaries.begin()) - 1;
  if (j < 0) j = 0;
  if (j >= I) j = I - 1;
  return static_cast<int>(j);
}

StrataGrid build_equiprobable_grid(int m, int I) {
  if (m < 1) throw std::invalid_argument("build_equiprobable_grid: m must be >= 1");
  if (I < 2) throw std::invalid_argument("build_equiprobable_grid: I must be >= 2");
  StrataGrid grid;
  grid.m = m;
  grid.I = I;
  grid.boundaries.resize(static_cast<std::size_t>(I) + 1);
  grid.boundaries.front() = -std::numeric_limits<double>::infinity();
  grid.boundaries.back() = std::numeric_limits<double>::infinity();
  for (int j = 1; j < I; ++j) {
    grid.boundaries[static_cast<std::size_t>(j)] =
        std_normal_quantile(static_cast<double>(j) / I);
  }
  return grid;
}

std::vector<std::int64_t> draws_from_allocation(std::span<const double> q, std::int64_t M) {
  if (M < 1) throw std::invalid_argument("draws_from_allocation: M must be >= 1");
  std::vector<std::int64_t> counts(q.size());
  // Compensated extended-precision cumulative: the floors must see the exact
  // partial sums of the given weights, or an equal allocation like 100 cells
  // of 0.01 rounds to 199/201 instead of an even split.
  long double cum = 0.0L;
  long double compensation = 0.0L;
  std::int64_t prev_floor = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < 0.0) throw std::invalid_argument("draws_from_allocation: negative weight");
    const long double value = q[i];
    const long double t = cum + value;
    compensation += (std::abs(cum) >= std::abs(value)) ? (cum - t) + value : (value - t) + cum;
    cum = t;
    // The final cumulative equals 1 up to rounding; pin it so the counts
    // always sum to exactly M.
    const long double scaled = (i + 1 == q.size())
                                   ? static_cast<long double>(M)
                                   : static_cast<long double>(M) * (cum + compensation);
    const auto f = static_cast<std::int64_t>(std::floor(scaled));
    counts[i] = f - prev_floor;
    prev_floor = f;
  }
  return counts;
}

std::vector<double> optimal_allocation(std::span<const double> p, std::span<const double> sigma) {
  if (p.size() != sigma.size()) throw std::invalid_argument("optimal_allocation: size mismatch");
  std::vector<double> q(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) throw std::invalid_argument("optimal_allocation: probabilities must be > 0");
    if (sigma[i] < 0.0) throw std::invalid_argument("optimal_allocation: negative sigma");
    q[i] = p[i] * sigma[i];
    total += q[i];
  }
  if (total <= 0.0) {
    throw degenerate_error("optimal_allocation: all within-stratum deviations are zero");
  }
  for (double& v : q) v /= total;
  // Renormalize by the exact sum to absorb division rounding.
  double sum = 0.0;
  for (double v : q) sum += v;
  for (double& v : q) v /= sum;
  return q;
}

double fixed_I_variance(std::span<const double> p, std::span<const double> sigma,
                        std::span<const double> q, std::int64_t M) {
  if (p.size() != sigma.size() || p.size() != q.size()) {
    throw std::invalid_argument("fixed_I_variance: size mismatch");
  }
  const auto counts = draws_from_allocation(q, M);
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (counts[i] > 0) {
      v += p[i] * p[i] * sigma[i] * sigma[i] / static_cast<double>(counts[i]);
    }
  }
  return v;
}

double asymptotic_variance(std::span<const double> p, std::span<const double> sigma,
                           std::span<const double> q, std::int64_t M) {
  if (p.size() != sigma.size() || p.size() != q.size()) {
    throw std::invalid_argument("asymptotic_variance: size mismatch");
  }
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] > 0.0) {
      v += p[i] * p[i] * sigma[i] * sigma[i] / q[i];
    }
  }
  return v / static_cast<double>(M);
}

}  // namespace adastrat
