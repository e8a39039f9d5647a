#pragma once

#include <cstdint>
#include <limits>

namespace htspec {

/// 64-bit avalanche finalizer (the splitmix64 output stage).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Seed of replicate `r` under `master`. Pure function of its inputs, so
/// replicates can be generated in any order or in parallel.
constexpr std::uint64_t derive_replicate_seed(std::uint64_t master, std::uint64_t r) noexcept {
  return mix64(master ^ ((r + 1) * kGolden));
}

/// Domain tags keep the mask, value and solver streams disjoint.
enum class StreamTag : std::uint64_t {
  Mask = 0x6D61736BULL,
  Value = 0x76616C75ULL,
  Solver = 0x736F6C76ULL,
  Instance = 0x696E7374ULL,
};

/// Row part of stream_key; hoisted out of inner loops by the matrix sampler.
constexpr std::uint64_t stream_row_key(std::uint64_t seed, StreamTag tag, std::uint64_t i) noexcept {
  const std::uint64_t k = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
  return mix64(k ^ ((i + 1) * kGolden));
}

constexpr std::uint64_t stream_entry_key(std::uint64_t row_key, std::uint64_t j) noexcept {
  return mix64(row_key ^ ((j + 1) * 0xD1B54A32D192ED03ULL));
}

/// Key of the stream attached to index pair (i, j) of a matrix drawn from `seed`.
constexpr std::uint64_t stream_key(std::uint64_t seed, StreamTag tag, std::uint64_t i,
                                   std::uint64_t j) noexcept {
  return stream_entry_key(stream_row_key(seed, tag, i), j);
}

/// Counter-based generator: output n is mix64(key + n * golden). Models
/// UniformRandomBitGenerator so it also plugs into <random> distributions.
class IndexStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit IndexStream(std::uint64_t key) noexcept : key_(key) {}
  constexpr IndexStream(std::uint64_t seed, StreamTag tag, std::uint64_t i = 0,
                        std::uint64_t j = 0) noexcept
      : key_(stream_key(seed, tag, i, j)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on (0, 1], 53-bit resolution.
  constexpr double uniform_open_closed() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }
  /// Uniform on [0, 1), 53-bit resolution.
  constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace htspec
