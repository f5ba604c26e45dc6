#include "adastrat/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/normal.hpp"

namespace adastrat {

BoundaryIntegrals boundary_integral(const StratificationMatrix& mu, int k, double z,
                                    std::span<const std::pair<double, double>> other_cells,
                                    const GaussianPayoff& payoff, std::int64_t n,
                                    RandomStream& stream, RandomStream* aux_base) {
  if (n <= 0) throw std::invalid_argument("boundary_integral: need at least one draw");
  const int m = mu.directions();
  if (static_cast<int>(other_cells.size()) != m - 1) {
    throw std::invalid_argument("boundary_integral: need one cell per remaining direction");
  }
  if (payoff.requires_aux() && aux_base == nullptr) {
    throw std::invalid_argument("boundary_integral: payoff requires an aux stream");
  }
  const int d = mu.dim();
  HyperplaneSampler sampler(mu.column(k), z);
  BoundaryIntegrals out;
  out.f = Eigen::VectorXd::Zero(d);
  out.f_phi = Eigen::VectorXd::Zero(d);
  out.f_phi2 = Eigen::VectorXd::Zero(d);
  out.draws_used = n;
  Eigen::VectorXd y(d);
  for (std::int64_t r = 0; r < n; ++r) {
    sampler.draw(stream, y);
    bool inside = true;
    int c = 0;
    for (int j = 0; j < m && inside; ++j) {
      if (j == k) continue;
      const double x = mu.column(j).dot(y);
      const auto& [lo, hi] = other_cells[static_cast<std::size_t>(c++)];
      inside = (x > lo) && (x <= hi);
    }
    if (!inside) continue;  // rejection weighting of the other constraints
    RandomStream aux;
    RandomStream* aux_ptr = nullptr;
    if (payoff.requires_aux()) {
      aux = aux_base->at_substream(aux_base->substream_id() +
                                   static_cast<std::uint64_t>(r));
      aux_ptr = &aux;
    }
    const double phi = payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
    out.f += y;
    out.f_phi += phi * y;
    out.f_phi2 += phi * phi * y;
  }
  const double scale = std_normal_pdf(z) / static_cast<double>(n);
  out.f *= scale;
  out.f_phi *= scale;
  out.f_phi2 *= scale;
  return out;
}

BoundaryField::BoundaryField(int d, int m, int I) : d_(d), m_(m), I_(I) {
  buckets_ = 1;
  for (int j = 0; j < m - 1; ++j) buckets_ *= I;
  batches_.resize(static_cast<std::size_t>(m) * (I - 1));
  for (auto& b : batches_) {
    b.f = Eigen::MatrixXd::Zero(d, buckets_);
    b.f_phi = Eigen::MatrixXd::Zero(d, buckets_);
    b.f_phi2 = Eigen::MatrixXd::Zero(d, buckets_);
  }
}

BoundaryField::Batch& BoundaryField::batch(int k, int bj) {
  return batches_[static_cast<std::size_t>(k) * (I_ - 1) + bj];
}

const BoundaryField::Batch& BoundaryField::batch(int k, int bj) const {
  return batches_[static_cast<std::size_t>(k) * (I_ - 1) + bj];
}

std::int64_t BoundaryField::bucket_of(int k, std::span<const int> multi) const {
  std::int64_t bucket = 0;
  for (int j = 0; j < m_; ++j) {
    if (j == k) continue;
    bucket = bucket * I_ + multi[static_cast<std::size_t>(j)];
  }
  return bucket;
}

void BoundaryField::accumulate(int k, int bj, const StrataGrid& grid, const Eigen::MatrixXd& mu,
                               const Eigen::VectorXd& y, double phi_value) {
  Batch& b = batch(k, bj);
  ++b.draws;
  std::int64_t bucket = 0;
  for (int j = 0; j < m_; ++j) {
    if (j == k) continue;
    bucket = bucket * I_ + grid.locate(mu.col(j).dot(y));
  }
  b.f.col(bucket) += y;
  b.f_phi.col(bucket) += phi_value * y;
  b.f_phi2.col(bucket) += phi_value * phi_value * y;
}

void BoundaryField::finalize(const StrataGrid& grid) {
  if (finalized_) throw std::logic_error("BoundaryField::finalize called twice");
  finalized_ = true;
  for (int k = 0; k < m_; ++k) {
    for (int bj = 0; bj + 1 < I_; ++bj) {
      Batch& b = batch(k, bj);
      if (b.draws == 0) continue;
      const double z = grid.boundaries[static_cast<std::size_t>(bj) + 1];
      const double scale = std_normal_pdf(z) / static_cast<double>(b.draws);
      b.f *= scale;
      b.f_phi *= scale;
      b.f_phi2 *= scale;
    }
  }
}

Eigen::VectorXd BoundaryField::integral_f(int k, int bj, std::span<const int> multi) const {
  return batch(k, bj).f.col(bucket_of(k, multi));
}
Eigen::VectorXd BoundaryField::integral_f_phi(int k, int bj, std::span<const int> multi) const {
  return batch(k, bj).f_phi.col(bucket_of(k, multi));
}
Eigen::VectorXd BoundaryField::integral_f_phi2(int k, int bj, std::span<const int> multi) const {
  return batch(k, bj).f_phi2.col(bucket_of(k, multi));
}

NuGradients grad_nu(std::span<const int> multi, const StrataGrid& grid,
                    const BoundaryField& field) {
  const int m = grid.m;
  const int I = grid.I;
  const Eigen::Index d = field.batch(0, 0).f.rows();
  NuGradients g;
  g.f = Eigen::MatrixXd::Zero(d, m);
  g.f_phi = Eigen::MatrixXd::Zero(d, m);
  g.f_phi2 = Eigen::MatrixXd::Zero(d, m);
  for (int k = 0; k < m; ++k) {
    const int idx = multi[static_cast<std::size_t>(k)];
    const std::int64_t bucket = field.bucket_of(k, multi);
    // d/dmu_k nu_i = -(upper boundary integral) + (lower boundary integral);
    // the +-infinity boundaries contribute nothing.
    if (idx <= I - 2) {
      const auto& b = field.batch(k, idx);
      g.f.col(k) -= b.f.col(bucket);
      g.f_phi.col(k) -= b.f_phi.col(bucket);
      g.f_phi2.col(k) -= b.f_phi2.col(bucket);
    }
    if (idx >= 1) {
      const auto& b = field.batch(k, idx - 1);
      g.f.col(k) += b.f.col(bucket);
      g.f_phi.col(k) += b.f_phi.col(bucket);
      g.f_phi2.col(k) += b.f_phi2.col(bucket);
    }
  }
  return g;
}

Eigen::MatrixXd grad_V(const StrataGrid& grid, const StratumStats& stats,
                       std::span<const double> p, const BoundaryField& field,
                       bool* degenerate) {
  const int m = grid.m;
  const Eigen::Index d = field.batch(0, 0).f.rows();
  const std::int64_t cells = grid.cell_count();
  if (static_cast<std::int64_t>(stats.size()) != cells ||
      static_cast<std::int64_t>(p.size()) != cells) {
    throw std::invalid_argument("grad_V: size mismatch");
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(d, m);
  bool any = false;
  for (std::int64_t i = 0; i < cells; ++i) {
    const double weight =
        p[static_cast<std::size_t>(i)] * stats.sigma_hat[static_cast<std::size_t>(i)];
    if (weight < 1e-12) continue;
    any = true;
    const auto multi = grid.multi_index(i);
    const NuGradients g = grad_nu(multi, grid, field);
    grad += (g.f * stats.nu_phi2[static_cast<std::size_t>(i)] +
             p[static_cast<std::size_t>(i)] * g.f_phi2 -
             2.0 * stats.nu_phi[static_cast<std::size_t>(i)] * g.f_phi) /
            (2.0 * weight);
  }
  if (degenerate != nullptr) *degenerate = !any;
  return grad;
}

std::vector<std::int64_t> boundary_draw_counts(int m, int I, std::int64_t total) {
  if (m < 1 || I < 2) throw std::invalid_argument("boundary_draw_counts: need m >= 1, I >= 2");
  const std::int64_t boundaries = static_cast<std::int64_t>(m) * (I - 1);
  if (total < 0) throw std::invalid_argument("boundary_draw_counts: negative total");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(boundaries), total / boundaries);
  std::int64_t rem = total % boundaries;
  if (rem > 0) {
    // Most central boundary abscissae first: order by |(bj+1) - I/2|.
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    auto centrality = [I](std::size_t flat) {
      const int bj = static_cast<int>(flat % static_cast<std::size_t>(I - 1));
      return std::abs(2.0 * (bj + 1) - I);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return centrality(a) < centrality(b); });
    for (std::int64_t r = 0; r < rem; ++r) ++counts[order[static_cast<std::size_t>(r)]];
  }
  return counts;
}

}  // namespace adastrat
