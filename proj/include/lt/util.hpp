#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace lt {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// SplitMix64. Used everywhere a seeded stream is needed so that results do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

// Van der Corput radical inverse; bases 2,3,5,7,11,13 cover dim <= 6.
inline double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (i > 0) {
    x += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return x;
}

inline double halton(std::uint64_t i, int dim_index) {
  static constexpr int kBases[6] = {2, 3, 5, 7, 11, 13};
  return radical_inverse(i + 1, kBases[dim_index]);
}

// Neumaier compensated accumulator; fixed traversal order gives results
// independent of caller-side parallelism.
class KahanSum {
 public:
  void add(double x) {
    double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

inline std::uint64_t fnv1a64(std::span<const char> data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64({s.data(), s.size()})));
  return std::string(buf);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

}  // namespace lt
