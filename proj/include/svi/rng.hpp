#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace svi {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

}  // namespace detail

/// Names an independent random stream. Identical (master_seed, stream_id)
/// pairs reproduce identical draws bit for bit.
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  /// Derived stream for a sub-purpose (e.g. Wiener vs jump draws of one path).
  RngStream child(std::uint64_t k) const { return {master_seed, detail::hash_combine(stream_id, k + 1)}; }

  std::uint64_t engine_seed() const { return detail::hash_combine(detail::splitmix64(master_seed), stream_id); }

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Generator with platform-independent output: mt19937_64 is fully specified
/// by the standard, and the uniform/normal/exponential transforms are written
/// out here instead of using the implementation-defined std distributions.
class RandomEngine {
 public:
  explicit RandomEngine(const RngStream& stream) : gen_(stream.engine_seed()) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on (0, 1).
  double uniform() {
    std::uint64_t bits;
    do {
      bits = gen_() >> 11;
    } while (bits == 0);
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace svi
