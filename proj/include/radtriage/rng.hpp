#pragma once

#include <cstdint>

namespace radtriage {

/// Counter-based random stream. Draw i is a pure function of (seed, i), so a
/// stream can be replayed from any saved (seed, counter) pair.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  /// Independent stream derived from this seed and a key (image index, epoch, ...).
  static RngStream substream(std::uint64_t seed, std::uint64_t key);
  static RngStream substream(std::uint64_t seed, std::uint64_t key_a, std::uint64_t key_b);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Normal(0, std) resampled until it lies within two standard deviations.
  double truncated_normal(double std);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace radtriage
