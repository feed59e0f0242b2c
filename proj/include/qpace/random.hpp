#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace qpace {

/// Counter-based deterministic random stream. Draw i is a pure function of
/// (key, i), so substreams derived by label are reproducible no matter how
/// many values the parent has already produced. Same seed, same sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : key_(mix(seed ^ kRootSalt)) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Consumes exactly two draws per call.
  double normal() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Uniform index in [0, n). Lemire multiply-shift; biased by < 2^-64.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Child stream determined by (this stream's key, label) only. Draws made
  /// on the parent do not affect the child.
  RandomStream derive(std::string_view label) const {
    RandomStream child(0);
    child.key_ = mix(key_ ^ mix(fnv1a(label)));
    child.counter_ = 0;
    return child;
  }

  RandomStream derive(std::string_view label, std::uint64_t n) const {
    RandomStream child = derive(label);
    child.key_ = mix(child.key_ ^ mix(n + kRootSalt));
    return child;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kRootSalt = 0x8F5856CBF8EE3A1Dull;
  static constexpr double kPi = 3.14159265358979323846;

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace qpace
