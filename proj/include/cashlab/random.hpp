#ifndef CASHLAB_RANDOM_HPP
#define CASHLAB_RANDOM_HPP

#include <cstdint>
#include <limits>
#include <string_view>

namespace cashlab {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: (parent, stream, index) -> child seed.
// Streams are small tags so that different consumers of one run seed never
// share a sequence.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(parent ^ mix64(stream + 0x632be59bd9b4e019ULL)) + index);
}

enum class SeedStream : std::uint64_t {
  kSample = 1,
  kTrial = 2,
  kBracket = 3,
  kMonteCarlo = 4,
  kLandscape = 5,
  kNoise = 6,
  kRep = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t parent, SeedStream stream,
                                    std::uint64_t index) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(stream), index);
}

constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Small counter-based engine satisfying UniformRandomBitGenerator; cheap to
// construct per trial, unlike mt19937_64.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  // Uniform on {0, ..., n-1}; Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    u128 m = static_cast<u128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<u128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace cashlab

#endif  // CASHLAB_RANDOM_HPP
