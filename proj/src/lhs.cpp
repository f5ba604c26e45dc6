#include "adastrat/lhs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adastrat/normal.hpp"
#include "adastrat/parallel.hpp"

namespace adastrat {

namespace {

constexpr std::uint64_t kTagReplicate = 16;
constexpr std::uint64_t kTagReplicateAux = 17;

}  // namespace

Eigen::MatrixXd lhs_sample(std::int64_t M, int d, RandomStream& stream) {
  if (M < 2) throw std::invalid_argument("lhs_sample: need M >= 2");
  if (d < 1) throw std::invalid_argument("lhs_sample: need d >= 1");
  Eigen::MatrixXd sample(M, d);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(M));
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 1);
    // Fisher-Yates from the seeded stream, one permutation per coordinate.
    for (std::int64_t i = M - 1; i > 0; --i) {
      const auto pick = static_cast<std::int64_t>(stream.next_uniform() * (i + 1));
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(std::min(pick, i))]);
    }
    for (std::int64_t i = 0; i < M; ++i) {
      const double u =
          (static_cast<double>(perm[static_cast<std::size_t>(i)]) - stream.next_uniform()) /
          static_cast<double>(M);
      sample(i, j) = std_normal_quantile(u);
    }
  }
  return sample;
}

LhsResult lhs_estimate(const GaussianPayoff& payoff, const Eigen::MatrixXd* rotation,
                       std::int64_t M, int N, std::uint64_t seed) {
  const int d = payoff.dim();
  if (rotation != nullptr && (rotation->rows() != d || rotation->cols() != d)) {
    throw std::invalid_argument("lhs_estimate: rotation must be d x d");
  }
  if (N < 1) throw std::invalid_argument("lhs_estimate: need N >= 1");

  LhsResult result;
  result.replicate_means.assign(static_cast<std::size_t>(N), 0.0);
  parallel_for(N, [&](std::int64_t k) {
    RandomStream stream(seed, substream_key(kTagReplicate, static_cast<std::uint64_t>(k), 0));
    const Eigen::MatrixXd sample = lhs_sample(M, d, stream);
    Eigen::VectorXd y(d);
    double sum = 0.0;
    for (std::int64_t i = 0; i < M; ++i) {
      if (rotation != nullptr) {
        y.noalias() = (*rotation) * sample.row(i).transpose();
      } else {
        y = sample.row(i).transpose();
      }
      RandomStream aux;
      RandomStream* aux_ptr = nullptr;
      if (payoff.requires_aux()) {
        aux = RandomStream(seed, substream_key(kTagReplicateAux, static_cast<std::uint64_t>(k),
                                               static_cast<std::uint64_t>(i)));
        aux_ptr = &aux;
      }
      sum += payoff.evaluate(std::span<const double>(y.data(), d), aux_ptr);
    }
    result.replicate_means[static_cast<std::size_t>(k)] = sum / static_cast<double>(M);
  });

  double mean = 0.0;
  double mean_sq = 0.0;
  for (double e : result.replicate_means) {
    mean += e;
    mean_sq += e * e;
  }
  mean /= N;
  mean_sq /= N;
  result.mean = mean;
  result.variance = static_cast<double>(M) * std::max(mean_sq - mean * mean, 0.0);
  return result;
}

}  // namespace adastrat
