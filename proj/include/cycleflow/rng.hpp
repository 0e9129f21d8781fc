#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>

#include "cycleflow/scalar.hpp"

namespace cycleflow {

/// splitmix64 finalizer; used to decorrelate (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// One independent random stream, identified by (master seed, stream index).
///
/// Simulations assign one stream per cycle, so results do not depend on how
/// cycles are distributed over workers. Uniforms are built from the top 53
/// engine bits, so sequences are identical across standard libraries.
class Stream {
public:
  Stream(std::uint64_t seed, std::uint64_t index)
      : engine_(mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ull))) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform on {0, ..., n-1}.
  Index below(Index n) {
    return std::min<Index>(n - 1, static_cast<Index>(uniform() * static_cast<double>(n)));
  }

  /// Draw an index with probability proportional to the nonnegative weights.
  template <class Derived>
  Index categorical(const Eigen::DenseBase<Derived>& weights) {
    const double total = weights.sum();
    const double u = uniform() * total;
    double acc = 0.0;
    Index last_positive = -1;
    for (Index i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = i;
      if (u < acc) return i;
    }
    return last_positive;  // rounding at the top end
  }

  /// Draw from a cumulative table (nondecreasing, last entry the total).
  Index from_cumulative(std::span<const double> cumulative) {
    const double u = uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) {
      // u landed on the total through rounding: take the last increasing entry.
      it = std::prev(cumulative.end());
      while (it != cumulative.begin() && *std::prev(it) == *it) --it;
    }
    return static_cast<Index>(it - cumulative.begin());
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace cycleflow
