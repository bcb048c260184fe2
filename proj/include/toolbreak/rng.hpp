#ifndef TOOLBREAK_RNG_HPP
#define TOOLBREAK_RNG_HPP

#include <cstdint>
#include <random>

namespace toolbreak {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Mixes a parent seed with a stream key into an independent child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state = a ^ (key * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
  splitmix64(state);
  return splitmix64(state);
}

/// Named streams. Each consumer draws from its own stream so that, e.g., the
/// batch order can be reproduced without replaying weight initialization.
enum class Stream : std::uint64_t {
  init = 1,
  dropout = 2,
  batch = 3,
  synth = 4,
  test_data = 5,
};

/// Seedable, splittable generator.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::uint64_t key) const { return Rng(derive_seed(seed_, key)); }
  Rng split(Stream stream) const { return split(static_cast<std::uint64_t>(stream)); }

  engine_type& engine() noexcept { return engine_; }

  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::uint64_t uniform_index(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

}  // namespace toolbreak

#endif
