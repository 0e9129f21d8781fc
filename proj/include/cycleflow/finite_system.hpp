#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "cycleflow/error.hpp"
#include "cycleflow/event_set.hpp"
#include "cycleflow/scalar.hpp"

namespace cycleflow {

/// A finite point set with a self-map and point masses.
///
/// The sigma-algebra is the full power set, so a measure is the weight
/// vector. Construction checks structure only (sizes, index ranges,
/// nonnegative finite weights, bijectivity when flagged invertible);
/// invariance of the weights is a separate question answered by
/// check_preserving().
template <class Scalar>
class FiniteSystem {
public:
  FiniteSystem(std::vector<std::string> points, std::vector<Index> map, Vector<Scalar> weights,
               bool invertible)
      : points_(std::move(points)), map_(std::move(map)), weights_(std::move(weights)),
        invertible_(invertible) {
    const Index m = static_cast<Index>(map_.size());
    if (points_.empty()) {
      points_.reserve(map_.size());
      for (Index i = 0; i < m; ++i) points_.push_back(std::to_string(i));
    }
    if (static_cast<Index>(points_.size()) != m)
      throw Error(ErrorCode::structural, "points and map have different lengths");
    if (weights_.size() != m)
      throw Error(ErrorCode::structural, "weights and map have different lengths");
    for (Index i = 0; i < m; ++i) {
      const Index target = map_[static_cast<std::size_t>(i)];
      if (target < 0 || target >= m)
        throw Error(ErrorCode::structural, "map[" + std::to_string(i) + "] = " +
                                               std::to_string(target) + " is out of range");
      if (!ScalarTraits<Scalar>::is_finite(weights_[i]) || weights_[i] < Scalar(0))
        throw Error(ErrorCode::structural,
                    "weights[" + std::to_string(i) + "] must be a finite nonnegative number");
    }
    if (invertible_) {
      inverse_.assign(map_.size(), -1);
      for (Index i = 0; i < m; ++i) {
        auto& slot = inverse_[static_cast<std::size_t>(map_[static_cast<std::size_t>(i)])];
        if (slot != -1)
          throw Error(ErrorCode::structural, "map flagged invertible is not a bijection");
        slot = i;
      }
    }
  }

  Index size() const { return static_cast<Index>(map_.size()); }
  const std::vector<std::string>& points() const { return points_; }
  const std::vector<Index>& map() const { return map_; }
  const Vector<Scalar>& weights() const { return weights_; }
  bool invertible() const { return invertible_; }

  /// theta(i)
  Index apply(Index i) const { return map_[static_cast<std::size_t>(i)]; }

  /// theta^{-1}(i); requires an invertible system.
  Index apply_inverse(Index i) const {
    require_invertible("inverse map");
    return inverse_[static_cast<std::size_t>(i)];
  }

  const std::vector<Index>& inverse_map() const {
    require_invertible("inverse map");
    return inverse_;
  }

  void require_invertible(const char* what) const {
    if (!invertible_)
      throw Error(ErrorCode::unsupported_operation,
                  std::string(what) + " requires an invertible system");
  }

  Scalar mass(const EventSet& set) const {
    Scalar total(0);
    for (Index i : set.members()) total += weights_[i];
    return total;
  }

  Scalar total_mass() const { return weights_.sum(); }

  EventSet all() const { return EventSet::all(size()); }

  /// theta^{-1}(set)
  EventSet preimage(const EventSet& set) const {
    EventSet out(size());
    for (Index i = 0; i < size(); ++i)
      if (set.contains(apply(i))) out.insert(i);
    return out;
  }

  /// theta(set)
  EventSet image(const EventSet& set) const {
    EventSet out(size());
    for (Index i : set.members()) out.insert(apply(i));
    return out;
  }

  /// Same map, weights divided by the total mass.
  FiniteSystem normalized() const {
    const Scalar total = total_mass();
    if (!(total > Scalar(0)))
      throw Error(ErrorCode::precondition, "cannot normalize a system of zero mass");
    return FiniteSystem(points_, map_, Vector<Scalar>(weights_ / total), invertible_);
  }

private:
  std::vector<std::string> points_;
  std::vector<Index> map_;
  std::vector<Index> inverse_;
  Vector<Scalar> weights_;
  bool invertible_;
};

inline bool is_permutation(const std::vector<Index>& map) {
  std::vector<bool> seen(map.size(), false);
  for (Index target : map) {
    if (target < 0 || target >= static_cast<Index>(map.size())) return false;
    if (seen[static_cast<std::size_t>(target)]) return false;
    seen[static_cast<std::size_t>(target)] = true;
  }
  return true;
}

/// System with default point names; invertibility detected from the map.
template <class Scalar>
FiniteSystem<Scalar> make_system(std::vector<Index> map, Vector<Scalar> weights) {
  const bool invertible = is_permutation(map);
  return FiniteSystem<Scalar>({}, std::move(map), std::move(weights), invertible);
}

template <class Scalar>
struct PreservationCheck {
  bool preserving;
  Scalar max_violation;
};

/// mu(theta^{-1}{x}) == mu({x}) for every point x, within `tolerance`.
template <class Scalar>
PreservationCheck<Scalar> check_preserving(
    const FiniteSystem<Scalar>& sys,
    const Scalar& tolerance = ScalarTraits<Scalar>::default_tolerance()) {
  Vector<Scalar> preimage_mass = Vector<Scalar>::Zero(sys.size());
  for (Index i = 0; i < sys.size(); ++i) preimage_mass[sys.apply(i)] += sys.weights()[i];
  Scalar worst(0);
  for (Index i = 0; i < sys.size(); ++i) {
    Scalar gap = abs_value<Scalar>(preimage_mass[i] - sys.weights()[i]);
    if (gap > worst) worst = gap;
  }
  return {worst <= tolerance, worst};
}

}  // namespace cycleflow
