#pragma once

#include <string>
#include <vector>

#include "cycleflow/hitting.hpp"

namespace cycleflow {

/// Sum of point masses over the members of A.
template <class Scalar>
Scalar measure_of(const Vector<Scalar>& masses, const EventSet& A) {
  if (A.universe() != masses.size())
    throw Error(ErrorCode::structural, "event set universe does not match the measure");
  Scalar total(0);
  for (Index i : A.members()) total += masses[i];
  return total;
}

enum class CycleKind {
  mu,        // mu_B(A)       = int_B M_B(A) dmu, forward excursions
  mu_tilde,  // mu~_B(A)      = int_B M~_B(A) dmu, backward excursions
  nu,        // nu_B(A)       = mu(A, T_B < infinity)
};

inline const char* to_string(CycleKind kind) {
  switch (kind) {
    case CycleKind::mu: return "mu_B";
    case CycleKind::mu_tilde: return "mu_tilde_B";
    case CycleKind::nu: return "nu_B";
  }
  return "?";
}

template <class Scalar>
struct CycleMeasure {
  CycleKind kind;
  Vector<Scalar> values;

  Scalar operator()(const EventSet& A) const { return measure_of(values, A); }
};

namespace detail {

/// Point masses of int_B M_B(.) dmu along the orbits in `dir`.
template <class Scalar>
Vector<Scalar> excursion_masses(const FiniteSystem<Scalar>& sys, const EventSet& B,
                                const HittingProfile& profile) {
  Vector<Scalar> values = Vector<Scalar>::Zero(sys.size());
  for (Index omega : B.members()) {
    const Scalar& w = sys.weights()[omega];
    if (w == Scalar(0)) continue;  // infinity * 0 = 0
    const HitTime& t = profile[omega];
    if (!t)
      throw Error(ErrorCode::internal_inconsistency,
                  "point " + std::to_string(omega) +
                      " of positive mass never returns to B; the measure is not preserved");
    Index x = omega;
    for (Index n = 0; n < *t; ++n) {
      values[x] += w;
      x = step(sys, x, profile.direction);
    }
  }
  return values;
}

}  // namespace detail

template <class Scalar>
CycleMeasure<Scalar> cycle_measure(const FiniteSystem<Scalar>& sys, const EventSet& B,
                                   CycleKind kind) {
  switch (kind) {
    case CycleKind::mu: {
      auto profile = hitting_profile(sys, B, Direction::forward);
      return {kind, detail::excursion_masses(sys, B, profile)};
    }
    case CycleKind::mu_tilde: {
      sys.require_invertible("mu_tilde_B");
      auto profile = hitting_profile(sys, B, Direction::backward);
      return {kind, detail::excursion_masses(sys, B, profile)};
    }
    case CycleKind::nu: {
      auto profile = hitting_profile(sys, B, Direction::forward);
      Vector<Scalar> values = Vector<Scalar>::Zero(sys.size());
      for (Index a : profile.finite_set.members()) values[a] = sys.weights()[a];
      return {kind, values};
    }
  }
  throw Error(ErrorCode::structural, "unknown cycle measure kind");
}

/// Pointwise theta^{T_B}: omega -> theta^{T_B(omega)} omega on {T_B < infinity},
/// identity elsewhere. Backward direction gives (theta^{-1})^{T~_B}.
inline std::vector<Index> first_hit_images(const std::vector<Index>& step_map,
                                           const HittingProfile& profile) {
  std::vector<Index> images(step_map.size());
  for (std::size_t i = 0; i < step_map.size(); ++i) {
    Index x = static_cast<Index>(i);
    if (const auto& t = profile.times[i])
      for (Index n = 0; n < *t; ++n) x = step_map[static_cast<std::size_t>(x)];
    images[i] = x;
  }
  return images;
}

template <class Scalar>
std::vector<Index> first_hit_images(const FiniteSystem<Scalar>& sys,
                                    const HittingProfile& profile) {
  return first_hit_images(profile.direction == Direction::forward ? sys.map() : sys.inverse_map(),
                          profile);
}

/// First-return map of B, extended by the identity off its domain.
template <class Scalar>
struct InducedMap {
  FiniteSystem<Scalar> system;  // a permutation of the whole point set
  EventSet domain;              // B intersected with {T_B < infinity}
};

/// The induced map theta^{T_B} restricted to B, returned as a bijection of the
/// point set (identity outside B and on points of B that never return). The
/// `domain` flag marks where the first-return map is actually in force.
template <class Scalar>
InducedMap<Scalar> induced_map(const FiniteSystem<Scalar>& sys, const EventSet& B,
                               Direction dir = Direction::forward) {
  sys.require_invertible("induced_map");
  const auto profile = hitting_profile(sys, B, dir);
  const auto images = first_hit_images(sys, profile);
  EventSet domain = B & profile.finite_set;
  std::vector<Index> map(static_cast<std::size_t>(sys.size()));
  for (Index i = 0; i < sys.size(); ++i)
    map[static_cast<std::size_t>(i)] = domain.contains(i) ? images[static_cast<std::size_t>(i)] : i;
  return {FiniteSystem<Scalar>(sys.points(), std::move(map), sys.weights(), true), domain};
}

}  // namespace cycleflow
