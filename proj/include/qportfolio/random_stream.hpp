#pragma once

// Counter-based Gaussian streams. Variate k of stream (seed, id) is a pure
// function of (seed, id, k): every 64-bit word it consumes is a SplitMix64
// finalisation of a counter derived from k, and the normal transform is a
// ziggurat (Doornik's ZIGNOR variant) whose rare rejections draw further words
// from the same per-variate counter block.

#include <cstdint>
#include <span>
#include <vector>

namespace qportfolio {

/// SplitMix64 finaliser (a bijection on 64-bit words).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept;

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  /// Index of the next variate.
  std::uint64_t position() const noexcept { return position_; }

  double next_normal() noexcept { return normal_for(position_++); }

  void fill_normal(std::span<double> out) noexcept {
    for (auto& v : out) v = next_normal();
  }

  /// Variate k of stream (seed, id); identical to the k-th next_normal() call.
  static double normal_at(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t k) noexcept {
    return RandomStream(master_seed, stream_id).normal_for(k);
  }

 private:
  double normal_for(std::uint64_t k) const noexcept;

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t position_ = 0;
};

inline RandomStream make_stream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept {
  return RandomStream(master_seed, stream_id);
}

/// n i.i.d. N(0, dt) increments drawn from the stream. Throws DomainError if dt <= 0.
std::vector<double> wiener_increments(RandomStream& stream, std::size_t n, double dt);

/// Derives an independent seed for a sub-ensemble.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (salt + 1));
}

}  // namespace qportfolio
