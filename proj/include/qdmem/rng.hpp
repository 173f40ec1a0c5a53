#ifndef QDMEM_RNG_HPP
#define QDMEM_RNG_HPP

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every variate is a pure function of
// (seed, stream, counter), so per-cycle streams can be consumed on any
// thread in any order and still reproduce bit-identical results.

namespace qdmem {

namespace detail {

// splitmix64 finalizer: a bijective 64-bit mix with good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(detail::mix64(detail::mix64(seed) ^
                           (stream * 0xda942042e4dd58b5ULL))) {}

  std::uint64_t next_u64() { return detail::mix64(key_ ^ counter_++); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1], safe as a log argument.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  double normal(double mean, double sigma) {
    // Box-Muller; the spare deviate is discarded to keep the stream a
    // pure function of the counter.
    const double u1 = uniform_open();
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(6.283185307179586476925286766559 * u2);
  }

  // Knuth product-of-uniforms sampler; fine for the small means used here.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double product = uniform();
    while (product > limit) {
      ++k;
      product *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qdmem

#endif  // QDMEM_RNG_HPP
