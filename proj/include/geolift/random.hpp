#ifndef GEOLIFT_RANDOM_HPP
#define GEOLIFT_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace geolift {

struct Seed {
  std::uint64_t value = 0;

  constexpr Seed() = default;
  constexpr explicit Seed(std::uint64_t v) : value(v) {}
  friend constexpr bool operator==(Seed, Seed) = default;

  /// Deterministic child seed for an independent stream (e.g. one repetition).
  Seed derive(std::uint64_t stream) const noexcept;
};

/// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based generator: the draw for (seed, counter) does not depend on
/// how many other draws happened before it, so work split across threads
/// reproduces the serial stream exactly.
class CounterRng {
 public:
  explicit CounterRng(Seed seed) noexcept : key_(mix64(seed.value ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t bits(std::uint64_t counter) const noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const noexcept;

 private:
  std::uint64_t key_;
};

/// Small sequential generator built on the counter generator.
class Rng {
 public:
  explicit Rng(Seed seed) noexcept : gen_(seed) {}

  std::uint64_t next_bits() noexcept { return gen_.bits(counter_++); }
  double uniform() noexcept { return gen_.uniform(counter_++); }
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal() noexcept;
  /// Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// `count` distinct indices from [0, population), in draw order
  /// (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                      std::size_t count);

 private:
  CounterRng gen_;
  std::uint64_t counter_ = 0;
};

}  // namespace geolift

#endif  // GEOLIFT_RANDOM_HPP
