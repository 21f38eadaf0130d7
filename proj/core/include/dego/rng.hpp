#pragma once

#include <cmath>
#include <cstdint>

namespace dego {

// Counter-based pseudo random stream built on the splitmix64 finalizer.
//
// A stream is identified by a 64-bit key and walks a counter through the
// finalizer, so the i-th draw of a stream depends only on (key, i).  Child
// streams are derived by hashing the parent key with a child index, which
// gives every repetition / iteration / purpose its own independent stream
// without any shared mutable state.  Two streams constructed from the same
// seed produce bit-identical sequences on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ kPhi)), counter_(0) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kPhi); }

  // Uniform draw on the open interval (0, 1); never returns 0 or 1, so it is
  // safe to take logarithms of either the value or its complement.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.  Uses rejection to avoid
  // modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = n * ((~0ull) / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal draw via Box-Muller; the second value of each generated
  // pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Independent stream derived from this stream's identity and `index`.
  // Derivation does not consume or depend on the parent's position.
  RngStream child(std::uint64_t index) const {
    RngStream c(0);
    c.key_ = mix(key_ ^ mix(index + kPhi));
    c.counter_ = 0;
    c.has_spare_ = false;
    return c;
  }

 private:
  static constexpr std::uint64_t kPhi = 0x9E3779B97F4A7C15ull;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dego
