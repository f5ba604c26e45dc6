#include "adastrat/gauss.hpp"

#include <cmath>
#include <stdexcept>

#include "adastrat/errors.hpp"
#include "adastrat/normal.hpp"

namespace adastrat {

StratificationMatrix::StratificationMatrix(Eigen::MatrixXd columns)
    : columns_(std::move(columns)) {
  if (columns_.rows() < 1 || columns_.cols() < 1 || columns_.cols() > columns_.rows()) {
    throw std::invalid_argument("StratificationMatrix: need d x m with 1 <= m <= d");
  }
  const Eigen::MatrixXd gram = columns_.transpose() * columns_;
  const double defect =
      (gram - Eigen::MatrixXd::Identity(columns_.cols(), columns_.cols())).cwiseAbs().maxCoeff();
  if (defect > kOrthoTolerance) {
    throw std::invalid_argument("StratificationMatrix: columns not orthonormal");
  }
}

void fix_column_signs(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0) m.col(j) = -m.col(j);
        break;
      }
    }
  }
}

StratificationMatrix orthonormalize_svd(const Eigen::MatrixXd& a) {
  if (a.cols() > a.rows()) {
    throw std::invalid_argument("orthonormalize_svd: more columns than rows");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0))) {
    throw degenerate_error("orthonormalize_svd: input is numerically rank deficient");
  }
  // Polar factor U V^T: the closest orthonormal matrix, which also keeps the
  // column order of the input instead of sorting by singular value.
  Eigen::MatrixXd q = svd.matrixU() * svd.matrixV().transpose();
  fix_column_signs(q);
  return StratificationMatrix(std::move(q));
}

Eigen::MatrixXd rotation_from_direction(const Eigen::VectorXd& v) {
  const Eigen::Index d = v.size();
  if (d < 1) throw std::invalid_argument("rotation_from_direction: empty vector");
  if (std::abs(v.norm() - 1.0) > 1e-10) {
    throw std::domain_error("rotation_from_direction: direction must be a unit vector");
  }
  Eigen::MatrixXd o(d, d);
  o.col(0) = v;
  Eigen::Index next = 1;
  auto try_insert = [&](const Eigen::VectorXd& candidate) {
    if (next >= d) return;
    Eigen::VectorXd w = candidate;
    for (Eigen::Index j = 0; j < next; ++j) {
      w -= o.col(j).dot(w) * o.col(j);
    }
    // One re-orthogonalization pass keeps the result orthogonal to 1e-10
    // even when the candidate is nearly dependent.
    for (Eigen::Index j = 0; j < next; ++j) {
      w -= o.col(j).dot(w) * o.col(j);
    }
    const double n = w.norm();
    if (n <= 1e-8) return;
    o.col(next++) = w / n;
  };
  for (Eigen::Index k = 1; k < d && next < d; ++k) {
    try_insert(Eigen::VectorXd::Unit(d, k));
  }
  if (next < d) {
    try_insert(Eigen::VectorXd::Unit(d, 0));
  }
  if (next < d) {
    throw degenerate_error("rotation_from_direction: could not complete the basis");
  }
  return o;
}

StratumSampler::StratumSampler(const StratificationMatrix& mu, ProbabilityCell cell)
    : mu_(mu.matrix()), cell_(std::move(cell)), dim_(mu.dim()), directions_(mu.directions()) {
  if (static_cast<int>(cell_.size()) != directions_) {
    throw std::invalid_argument("StratumSampler: cell rank must match directions");
  }
  for (const auto& [lo, hi] : cell_) {
    if (!(0.0 <= lo && lo < hi && hi <= 1.0)) {
      throw std::invalid_argument("StratumSampler: invalid probability interval");
    }
  }
}

void StratumSampler::draw(RandomStream& stream, Eigen::VectorXd& out) const {
  // Fixed budget: m uniforms for the stratified coordinates, then d normals.
  Eigen::VectorXd s(directions_);
  for (int k = 0; k < directions_; ++k) {
    const auto& [lo, hi] = cell_[k];
    const double u = lo + (hi - lo) * stream.next_uniform();
    s(k) = std_normal_quantile(u);
  }
  out.resize(dim_);
  for (int i = 0; i < dim_; ++i) out(i) = stream.next_normal();
  // y = mu s + (I - mu mu^T) g, computed as g + mu (s - mu^T g).
  const Eigen::VectorXd t = mu_.transpose() * out;
  out.noalias() += mu_ * (s - t);
}

std::vector<Eigen::VectorXd> sample_stratum_conditional(const StratificationMatrix& mu,
                                                        const ProbabilityCell& cell,
                                                        std::int64_t n, RandomStream& stream) {
  StratumSampler sampler(mu, cell);
  std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(n));
  for (auto& y : draws) sampler.draw(stream, y);
  return draws;
}

HyperplaneSampler::HyperplaneSampler(Eigen::VectorXd direction, double z)
    : direction_(std::move(direction)), z_(z) {
  if (std::abs(direction_.norm() - 1.0) > 1e-10) {
    throw std::domain_error("HyperplaneSampler: direction must be a unit vector");
  }
  if (!std::isfinite(z_)) {
    throw std::invalid_argument("HyperplaneSampler: abscissa must be finite");
  }
}

void HyperplaneSampler::draw(RandomStream& stream, Eigen::VectorXd& out) const {
  out.resize(direction_.size());
  for (Eigen::Index i = 0; i < direction_.size(); ++i) out(i) = stream.next_normal();
  const double t = direction_.dot(out);
  out.noalias() += direction_ * (z_ - t);
}

void HyperplaneSampler::transform(const Eigen::VectorXd& gauss, Eigen::VectorXd& out) const {
  out = gauss;
  const double t = direction_.dot(out);
  out.noalias() += direction_ * (z_ - t);
}

std::vector<Eigen::VectorXd> sample_hyperplane_conditional(const Eigen::VectorXd& direction,
                                                           double z, std::int64_t n,
                                                           RandomStream& stream) {
  HyperplaneSampler sampler(direction, z);
  std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(n));
  for (auto& y : draws) sampler.draw(stream, y);
  return draws;
}

}  // namespace adastrat
