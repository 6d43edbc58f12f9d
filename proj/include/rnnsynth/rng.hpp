#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rnnsynth {

// splitmix64 finalizer; used to derive stable per-stage seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc908ull;
  for (auto p : parts) h = mix64(h ^ p);
  return h;
}

// Deterministic RNG. The standard <random> distributions are
// implementation-defined, so sampling is done by hand — artifacts must be
// byte-stable across reruns.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double next_real() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_real(); }

  // uniform integer in [lo, hi], inclusive, rejection-sampled
  long long uniform_int(long long lo, long long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<long long>(eng_());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return lo + static_cast<long long>(v % span);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1;
    do {
      u1 = next_real();
    } while (u1 <= 0.0);
    const double u2 = next_real();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTau = 6.283185307179586476925286766559;
    spare_ = r * std::sin(kTau * u2);
    have_spare_ = true;
    return mean + stddev * r * std::cos(kTau * u2);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rnnsynth
