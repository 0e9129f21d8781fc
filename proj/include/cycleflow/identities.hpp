#pragma once

#include <optional>
#include <utility>

#include "cycleflow/cycle_measure.hpp"

namespace cycleflow {

/// Two measures expected to agree on every event A; residual(A) = |lhs(A) - rhs(A)|.
template <class Scalar>
struct MeasurePair {
  Vector<Scalar> lhs;
  Vector<Scalar> rhs;

  Scalar residual(const EventSet& A) const {
    return abs_value<Scalar>(measure_of(lhs, A) - measure_of(rhs, A));
  }
};

/// Everything that depends on the base set B alone, computed once so that
/// the identities can be evaluated against many events A.
template <class Scalar>
class CycleAnalysis {
public:
  CycleAnalysis(const FiniteSystem<Scalar>& sys, EventSet B)
      : sys_(&sys), base_(std::move(B)), forward_(hitting_profile(sys, base_, Direction::forward)) {
    mu_ = detail::excursion_masses(sys, base_, forward_);
    nu_ = restrict_to(forward_.finite_set);
    if (sys.invertible()) {
      backward_ = hitting_profile(sys, base_, Direction::backward);
      mu_tilde_ = detail::excursion_masses(sys, base_, *backward_);
    }
  }

  const FiniteSystem<Scalar>& system() const { return *sys_; }
  const EventSet& base() const { return base_; }
  const HittingProfile& forward() const { return forward_; }
  const HittingProfile& backward() const {
    sys_->require_invertible("backward hitting profile");
    return *backward_;
  }

  CycleMeasure<Scalar> measure(CycleKind kind) const {
    switch (kind) {
      case CycleKind::mu: return {kind, mu_};
      case CycleKind::mu_tilde:
        sys_->require_invertible("mu_tilde_B");
        return {kind, *mu_tilde_};
      case CycleKind::nu: return {kind, nu_};
    }
    throw Error(ErrorCode::structural, "unknown cycle measure kind");
  }

  /// mu_B(A) = mu(A, T~_B < infinity)
  MeasurePair<Scalar> master() const {
    sys_->require_invertible("master formula");
    return {mu_, restrict_to(backward_->finite_set)};
  }

  /// mu~_B(A) = mu(A, T_B < infinity)
  MeasurePair<Scalar> master_dual() const {
    sys_->require_invertible("master formula");
    return {*mu_tilde_, nu_};
  }

  /// mu(B, theta^{-T_B} A) = mu(A, B), with the first hit taken along `dir`.
  MeasurePair<Scalar> strong_invariance(Direction dir) const {
    sys_->require_invertible("strong invariance");
    const HittingProfile& profile = dir == Direction::forward ? forward_ : *backward_;
    const auto images = first_hit_images(*sys_, profile);
    Vector<Scalar> pushed = Vector<Scalar>::Zero(sys_->size());
    for (Index omega : base_.members()) pushed[images[static_cast<std::size_t>(omega)]] += sys_->weights()[omega];
    return {pushed, restrict_to(base_)};
  }

  /// mu_B(theta^{-1} A) = mu_B(A) and the same for mu~_B; for nu_B the image
  /// form nu_B(theta A) = nu_B(A).
  MeasurePair<Scalar> invariance(CycleKind kind) const {
    sys_->require_invertible("invariance of cycle measures");
    const Index m = sys_->size();
    if (kind == CycleKind::nu) {
      Vector<Scalar> image_side(m);
      for (Index a = 0; a < m; ++a) image_side[a] = nu_[sys_->apply(a)];
      return {image_side, nu_};
    }
    const Vector<Scalar>& values = kind == CycleKind::mu ? mu_ : *mu_tilde_;
    Vector<Scalar> preimage_side = Vector<Scalar>::Zero(m);
    for (Index w = 0; w < m; ++w) preimage_side[sys_->apply(w)] += values[w];
    return {preimage_side, values};
  }

  /// mu_B(A) = P(A, Psi cap B != empty) where Psi(omega) = {theta^{-1} omega,
  /// theta^{-2} omega, ...} is enumerated explicitly.
  MeasurePair<Scalar> precapacity() const {
    sys_->require_invertible("pre-capacity identity");
    const Index m = sys_->size();
    Vector<Scalar> hit = Vector<Scalar>::Zero(m);
    for (Index omega = 0; omega < m; ++omega) {
      EventSet psi(m);
      Index x = omega;
      for (Index n = 0; n < m; ++n) {
        x = sys_->apply_inverse(x);
        psi.insert(x);
      }
      if (!(psi & base_).empty()) hit[omega] = sys_->weights()[omega];
    }
    return {mu_, hit};
  }

  /// int_B T dmu along `dir`, with infinity * 0 = 0.
  Scalar integrated_return_time(Direction dir) const {
    const HittingProfile& profile = dir == Direction::forward ? forward_ : backward();
    Scalar total(0);
    for (Index omega : base_.members()) {
      const Scalar& w = sys_->weights()[omega];
      if (w == Scalar(0)) continue;
      if (!profile[omega])
        throw Error(ErrorCode::internal_inconsistency,
                    "infinite return time on a point of positive mass");
      total += w * Scalar(*profile[omega]);
    }
    return total;
  }

private:
  Vector<Scalar> restrict_to(const EventSet& set) const {
    Vector<Scalar> out = Vector<Scalar>::Zero(sys_->size());
    for (Index i : set.members()) out[i] = sys_->weights()[i];
    return out;
  }

  const FiniteSystem<Scalar>* sys_;
  EventSet base_;
  HittingProfile forward_;
  std::optional<HittingProfile> backward_;
  Vector<Scalar> mu_;
  Vector<Scalar> nu_;
  std::optional<Vector<Scalar>> mu_tilde_;
};

template <class Scalar>
struct MasterResidual {
  Scalar primal;  // |mu_B(A) - mu(A, T~_B < inf)|
  Scalar dual;    // |mu~_B(A) - mu(A, T_B < inf)|
};

template <class Scalar>
MasterResidual<Scalar> master_formula_residual(const FiniteSystem<Scalar>& sys, const EventSet& A,
                                               const EventSet& B) {
  sys.require_invertible("master formula");
  CycleAnalysis<Scalar> analysis(sys, B);
  return {analysis.master().residual(A), analysis.master_dual().residual(A)};
}

template <class Scalar>
Scalar strong_invariance_residual(const FiniteSystem<Scalar>& sys, const EventSet& A,
                                  const EventSet& B) {
  sys.require_invertible("strong invariance");
  CycleAnalysis<Scalar> analysis(sys, B);
  Scalar fwd = analysis.strong_invariance(Direction::forward).residual(A);
  Scalar bwd = analysis.strong_invariance(Direction::backward).residual(A);
  return fwd > bwd ? fwd : bwd;
}

template <class Scalar>
Scalar pushforward_invariance_residual(const FiniteSystem<Scalar>& sys, const EventSet& B,
                                       const EventSet& A, CycleKind kind) {
  sys.require_invertible("invariance of cycle measures");
  return CycleAnalysis<Scalar>(sys, B).invariance(kind).residual(A);
}

template <class Scalar>
Scalar precapacity_check(const FiniteSystem<Scalar>& sys, const EventSet& A, const EventSet& B) {
  sys.require_invertible("pre-capacity identity");
  return CycleAnalysis<Scalar>(sys, B).precapacity().residual(A);
}

template <class Scalar>
struct KacCheck {
  Scalar conditional_return;       // E(T_B | B)
  Scalar conditional_mass;         // P(B | T~_B < inf)
  Scalar residual;                 // |E(T_B | B) P(B | T~_B < inf) - 1|
  Scalar unconditional_residual;   // |E(T_B 1_B) - P(T~_B < inf)|
  Scalar dual_residual;            // same with T_B and T~_B swapped
  Scalar dual_unconditional_residual;
};

namespace detail {

template <class Scalar>
KacCheck<Scalar> kac_from_analysis(const CycleAnalysis<Scalar>& analysis) {
  const auto& sys = analysis.system();
  const EventSet& B = analysis.base();
  const Scalar base_mass = sys.mass(B);
  const HittingProfile& fwd = analysis.forward();
  const HittingProfile& bwd = analysis.backward();
  const Scalar back_finite = sys.mass(bwd.finite_set);
  const Scalar fwd_finite = sys.mass(fwd.finite_set);
  const Scalar e_fwd = analysis.integrated_return_time(Direction::forward);
  const Scalar e_bwd = analysis.integrated_return_time(Direction::backward);

  KacCheck<Scalar> out;
  out.conditional_return = e_fwd / base_mass;
  out.conditional_mass = sys.mass(B & bwd.finite_set) / back_finite;
  out.residual = abs_value<Scalar>(out.conditional_return * out.conditional_mass - Scalar(1));
  out.unconditional_residual = abs_value<Scalar>(e_fwd - back_finite);
  const Scalar dual_return = e_bwd / base_mass;
  const Scalar dual_mass = sys.mass(B & fwd.finite_set) / fwd_finite;
  out.dual_residual = abs_value<Scalar>(dual_return * dual_mass - Scalar(1));
  out.dual_unconditional_residual = abs_value<Scalar>(e_bwd - fwd_finite);
  return out;
}

template <class Scalar>
void require_probability(const FiniteSystem<Scalar>& sys, const Scalar& tolerance) {
  if (abs_value<Scalar>(sys.total_mass() - Scalar(1)) > tolerance)
    throw Error(ErrorCode::precondition, "Kac check requires total mass 1");
}

}  // namespace detail

template <class Scalar>
KacCheck<Scalar> kac_check(const FiniteSystem<Scalar>& sys, const EventSet& B,
                           const Scalar& tolerance = ScalarTraits<Scalar>::default_tolerance()) {
  sys.require_invertible("Kac check");
  detail::require_probability(sys, tolerance);
  if (!(sys.mass(B) > Scalar(0)))
    throw Error(ErrorCode::precondition, "Kac check requires mu(B) > 0");
  return detail::kac_from_analysis(CycleAnalysis<Scalar>(sys, B));
}

template <class Scalar>
struct Positivity {
  bool base;      // mu(B) > 0
  bool forward;   // mu(T_B < inf) > 0
  bool backward;  // mu(T~_B < inf) > 0
  Scalar base_mass;
  Scalar forward_mass;
  Scalar backward_mass;

  bool consistent() const {
    return base == forward && forward == backward && base_mass <= forward_mass &&
           base_mass <= backward_mass;
  }
};

template <class Scalar>
Positivity<Scalar> positivity_equivalence(const FiniteSystem<Scalar>& sys, const EventSet& B) {
  sys.require_invertible("positivity equivalence");
  const Scalar base_mass = sys.mass(B);
  const Scalar fwd = sys.mass(hitting_profile(sys, B, Direction::forward).finite_set);
  const Scalar bwd = sys.mass(hitting_profile(sys, B, Direction::backward).finite_set);
  return {base_mass > Scalar(0), fwd > Scalar(0), bwd > Scalar(0), base_mass, fwd, bwd};
}

template <class Scalar>
struct PoincareResidual {
  Scalar forward;                 // |mu(B) - mu(B, T_B < inf)|
  std::optional<Scalar> backward; // |mu(B) - mu(B, T~_B < inf)|, invertible only
};

template <class Scalar>
PoincareResidual<Scalar> poincare_residual(const FiniteSystem<Scalar>& sys, const EventSet& B) {
  const Scalar base_mass = sys.mass(B);
  PoincareResidual<Scalar> out{
      abs_value<Scalar>(base_mass - sys.mass(B & hitting_profile(sys, B, Direction::forward).finite_set)),
      std::nullopt};
  if (sys.invertible())
    out.backward = abs_value<Scalar>(
        base_mass - sys.mass(B & hitting_profile(sys, B, Direction::backward).finite_set));
  return out;
}

}  // namespace cycleflow
