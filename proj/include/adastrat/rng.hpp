#pragma once

#include <cstdint>

namespace adastrat {

// Counter-based random stream (Philox4x32-10 core). A stream is addressed by
// (seed, substream_id); outputs depend only on that address and the position,
// so the same substream reproduces the same sequence no matter how other
// substreams are interleaved, and any position can be reached in O(1).
class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::uint64_t substream_id)
      : seed_(seed), substream_(substream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t substream_id() const { return substream_; }

  // Absolute position in 64-bit outputs.
  std::uint64_t position() const { return pos_; }
  void skip_to(std::uint64_t pos) { pos_ = pos; }

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1), 53-bit resolution.
  double next_uniform();

  // Standard normal via the inverse CDF; consumes exactly one output.
  double next_normal();

  RandomStream at_substream(std::uint64_t substream_id) const {
    return RandomStream(seed_, substream_id);
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t substream_ = 0;
  std::uint64_t pos_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::uint64_t lanes_[2] = {0, 0};
};

// Raw Philox4x32-10 block function (exposed for known-answer tests).
void philox4x32_10(const std::uint32_t counter[4], const std::uint32_t key[2],
                   std::uint32_t out[4]);

// Stateless mixing of a base seed with an index (replication, pilot run, ...)
// so that derived runs use disjoint stream families.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Substream address layout shared by the sampling engines: an 8-bit tag,
// a 24-bit major index (iteration, replicate) and a 32-bit minor index.
constexpr std::uint64_t substream_key(std::uint64_t tag, std::uint64_t major,
                                      std::uint64_t minor) {
  return (tag << 56) | ((major & 0xFFFFFFull) << 32) | (minor & 0xFFFFFFFFull);
}

}  // namespace adastrat
