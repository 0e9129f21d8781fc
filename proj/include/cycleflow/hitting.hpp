#pragma once

#include <vector>

#include "cycleflow/event_set.hpp"
#include "cycleflow/finite_system.hpp"

namespace cycleflow {

enum class Direction { forward, backward };

/// Hitting times of a target set from every point.
///
/// times[i] is the least n >= 1 with theta^{+-n}(i) in the target; a point of
/// the target therefore records its first return, not 0.
struct HittingProfile {
  Direction direction = Direction::forward;
  std::vector<HitTime> times;
  EventSet finite_set;  // {T < infinity}

  const HitTime& operator[](Index i) const { return times[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(times.size()); }
};

namespace detail {

template <class Scalar>
Index step(const FiniteSystem<Scalar>& sys, Index i, Direction dir) {
  return dir == Direction::forward ? sys.apply(i) : sys.apply_inverse(i);
}

template <class Scalar>
void require_direction(const FiniteSystem<Scalar>& sys, Direction dir) {
  if (dir == Direction::backward) sys.require_invertible("backward orbit");
}

}  // namespace detail

template <class Scalar>
HittingProfile hitting_profile(const FiniteSystem<Scalar>& sys, const EventSet& target,
                               Direction dir) {
  detail::require_direction(sys, dir);
  if (target.universe() != sys.size())
    throw Error(ErrorCode::structural, "event set universe does not match the system");
  const Index m = sys.size();
  HittingProfile profile{dir, std::vector<HitTime>(static_cast<std::size_t>(m)), EventSet(m)};
  // An orbit that enters the target does so within m steps.
  for (Index start = 0; start < m; ++start) {
    Index x = start;
    for (Index n = 1; n <= m; ++n) {
      x = detail::step(sys, x, dir);
      if (target.contains(x)) {
        profile.times[static_cast<std::size_t>(start)] = n;
        profile.finite_set.insert(start);
        break;
      }
    }
  }
  return profile;
}

/// Number of n in [0, T_B(omega)) with theta^{+-n}(omega) in A.
///
/// Infinite exactly when the orbit never reaches B and its eventual cycle
/// meets A; otherwise a finite count (including the n = 0 term).
template <class Scalar>
Count occupation_count(const FiniteSystem<Scalar>& sys, const EventSet& A, const EventSet& B,
                       Index omega, Direction dir) {
  detail::require_direction(sys, dir);
  const Index m = sys.size();
  if (omega < 0 || omega >= m)
    throw Error(ErrorCode::structural, "occupation_count: point index out of range");
  std::vector<Index> first_seen(static_cast<std::size_t>(m), -1);
  std::vector<Index> orbit;
  Index x = omega;
  for (Index n = 0;; ++n) {
    if (n >= 1 && B.contains(x)) {
      Index count = 0;
      for (Index k = 0; k < n; ++k) count += A.contains(orbit[static_cast<std::size_t>(k)]) ? 1 : 0;
      return count;
    }
    auto& seen = first_seen[static_cast<std::size_t>(x)];
    if (seen != -1) {
      // Orbit closed at step `seen` without reaching B.
      for (Index k = seen; k < n; ++k)
        if (A.contains(orbit[static_cast<std::size_t>(k)])) return std::nullopt;
      Index count = 0;
      for (Index k = 0; k < seen; ++k) count += A.contains(orbit[static_cast<std::size_t>(k)]) ? 1 : 0;
      return count;
    }
    seen = n;
    orbit.push_back(x);
    x = detail::step(sys, x, dir);
  }
}

}  // namespace cycleflow
