#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>

namespace cycleflow {

using Index = Eigen::Index;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Exact arbitrary-precision rational used for the exact-arithmetic mode.
using Rational = boost::multiprecision::cpp_rational;

/// An element of {1, 2, ...} or +infinity; std::nullopt stands for +infinity.
using HitTime = std::optional<Index>;

/// A count in {0, 1, ...} or +infinity (std::nullopt).
using Count = std::optional<Index>;

template <class Scalar>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static double default_tolerance() { return 1e-12; }
  static double to_double(double x) { return x; }
  static bool is_finite(double x) { return std::isfinite(x); }
  static double abs(double x) { return std::abs(x); }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static Rational default_tolerance() { return Rational(0); }
  static double to_double(const Rational& x) { return x.convert_to<double>(); }
  static bool is_finite(const Rational&) { return true; }
  static Rational abs(const Rational& x) { return x < 0 ? Rational(-x) : x; }
};

template <class Scalar>
double to_double(const Scalar& x) {
  return ScalarTraits<Scalar>::to_double(x);
}

template <class Scalar>
Scalar abs_value(const Scalar& x) {
  return ScalarTraits<Scalar>::abs(x);
}

}  // namespace cycleflow
