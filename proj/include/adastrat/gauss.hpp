#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "adastrat/rng.hpp"

namespace adastrat {

// Orthonormal d x m matrix whose columns are the stratification directions.
// Column sign convention: the first component larger than 1e-12 in absolute
// value is positive, which keeps iteration traces comparable across runs.
class StratificationMatrix {
 public:
  StratificationMatrix() = default;  // empty placeholder, assign before use
  explicit StratificationMatrix(Eigen::MatrixXd columns);

  int dim() const { return static_cast<int>(columns_.rows()); }
  int directions() const { return static_cast<int>(columns_.cols()); }
  const Eigen::MatrixXd& matrix() const { return columns_; }
  Eigen::VectorXd column(int k) const { return columns_.col(k); }

  static constexpr double kOrthoTolerance = 1e-10;

 private:
  Eigen::MatrixXd columns_;
};

// Applies the column sign convention in place.
void fix_column_signs(Eigen::MatrixXd& m);

// Nearest orthonormal matrix with the same column span as A (polar factor of
// the singular value decomposition), sign convention applied. Throws
// degenerate_error when A is numerically rank deficient; callers keep the
// previous directions in that case.
StratificationMatrix orthonormalize_svd(const Eigen::MatrixXd& a);

// d x d orthogonal matrix with first column v, the rest obtained by
// Gram-Schmidt on the last d-1 canonical basis vectors. A candidate whose
// residual falls below 1e-8 is replaced by the first canonical vector.
// Throws std::domain_error unless |v| = 1 within 1e-10.
Eigen::MatrixXd rotation_from_direction(const Eigen::VectorXd& v);

// One stratum of a quantile grid, as probability intervals per direction:
// direction k is conditioned on mu_k^T Y in (q(lo_k), q(hi_k)].
using ProbabilityCell = std::vector<std::pair<double, double>>;

// Draws Y ~ N(0, I_d) conditioned on mu^T Y falling in `cell`. Each draw
// consumes exactly m uniforms followed by d normals from the stream, so a
// draw at a known index can be regenerated by repositioning the stream.
class StratumSampler {
 public:
  StratumSampler(const StratificationMatrix& mu, ProbabilityCell cell);

  void draw(RandomStream& stream, Eigen::VectorXd& out) const;
  int values_per_draw() const { return dim_ + directions_; }

 private:
  const Eigen::MatrixXd& mu_;
  ProbabilityCell cell_;
  int dim_, directions_;
};

std::vector<Eigen::VectorXd> sample_stratum_conditional(const StratificationMatrix& mu,
                                                        const ProbabilityCell& cell,
                                                        std::int64_t n, RandomStream& stream);

// Draws Y ~ N(0, I_d) conditioned on mu_k^T Y = z exactly:
// Y = z mu_k + (I - mu_k mu_k^T) G with G standard normal. Consumes d
// normals per draw.
class HyperplaneSampler {
 public:
  HyperplaneSampler(Eigen::VectorXd direction, double z);

  void draw(RandomStream& stream, Eigen::VectorXd& out) const;
  // Applies the projection to an externally supplied standard normal vector
  // (used when stratum and boundary draws share the same normals).
  void transform(const Eigen::VectorXd& gauss, Eigen::VectorXd& out) const;

 private:
  Eigen::VectorXd direction_;
  double z_;
};

std::vector<Eigen::VectorXd> sample_hyperplane_conditional(const Eigen::VectorXd& direction,
                                                           double z, std::int64_t n,
                                                           RandomStream& stream);

}  // namespace adastrat
