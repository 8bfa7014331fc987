#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace edgelab {

inline constexpr double kPi = 3.14159265358979323846;

// splitmix64, used to expand a user seed into xoshiro state and to derive
// independent sub-stream seeds (e.g. one per dataset sample).
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  uint64_t s = base ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  return splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna). Chosen over the platform default engines
// because the output stream is fully specified by the algorithm, so seeds
// reproduce bit-identically everywhere.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool coin() { return (next() >> 63) != 0; }

  // Standard normal via Box-Muller. Deterministic for a given seed and
  // build; last-bit portability across platforms is limited by libm.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  const uint64_t* state() const { return s_; }
  void set_state(const uint64_t st[4]) {
    for (int i = 0; i < 4; ++i) s_[i] = st[i];
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace edgelab
