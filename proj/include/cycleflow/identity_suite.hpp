#pragma once

#include <array>
#include <bit>
#include <string>
#include <thread>
#include <vector>

#include "cycleflow/identities.hpp"
#include "cycleflow/rng.hpp"

namespace cycleflow {

struct IdentitySuiteOptions {
  Index exhaustive_limit = 8;  // enumerate all (A, B) pairs when m <= this
  Index sample_pairs = 50;     // random pairs otherwise
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

template <class Scalar>
struct CheckMax {
  std::string name;
  Scalar max_residual{0};
  Index evaluations = 0;
};

template <class Scalar>
struct IdentitySuiteResult {
  bool exhaustive = false;
  bool invertible = false;
  Index base_sets = 0;
  Index pairs = 0;
  Scalar preservation_violation{0};
  std::vector<CheckMax<Scalar>> checks;

  const CheckMax<Scalar>& operator[](const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw Error(ErrorCode::precondition, "no check named " + name);
  }

  Scalar worst() const {
    Scalar w(0);
    for (const auto& c : checks)
      if (c.max_residual > w) w = c.max_residual;
    return w;
  }
};

namespace detail {

// Indices into the per-pair identity table.
inline constexpr std::array<const char*, 8> kPairChecks = {
    "master",         "master_dual",          "strong_invariance_forward", "strong_invariance_backward",
    "invariance_mu_B", "invariance_mu_tilde_B", "invariance_nu_B",           "precapacity"};

inline constexpr std::array<const char*, 9> kBaseChecks = {
    "poincare_forward",   "poincare_backward",      "kac_conditional",
    "kac_unconditional",  "kac_dual_conditional",   "kac_dual_unconditional",
    "positivity_equivalence", "occupation_total_forward", "occupation_total_backward"};

template <class Scalar>
struct Accumulator {
  std::vector<CheckMax<Scalar>> pair_checks;
  std::vector<CheckMax<Scalar>> base_checks;
  Index base_sets = 0;
  Index pairs = 0;

  Accumulator() {
    for (const char* n : kPairChecks) pair_checks.push_back({n, Scalar(0), 0});
    for (const char* n : kBaseChecks) base_checks.push_back({n, Scalar(0), 0});
  }

  static void update(CheckMax<Scalar>& c, const Scalar& r) {
    if (r > c.max_residual) c.max_residual = r;
    ++c.evaluations;
  }

  void merge(const Accumulator& other) {
    for (std::size_t i = 0; i < pair_checks.size(); ++i) {
      if (other.pair_checks[i].max_residual > pair_checks[i].max_residual)
        pair_checks[i].max_residual = other.pair_checks[i].max_residual;
      pair_checks[i].evaluations += other.pair_checks[i].evaluations;
    }
    for (std::size_t i = 0; i < base_checks.size(); ++i) {
      if (other.base_checks[i].max_residual > base_checks[i].max_residual)
        base_checks[i].max_residual = other.base_checks[i].max_residual;
      base_checks[i].evaluations += other.base_checks[i].evaluations;
    }
    base_sets += other.base_sets;
    pairs += other.pairs;
  }
};

template <class Scalar>
std::vector<MeasurePair<Scalar>> pair_identities(const CycleAnalysis<Scalar>& analysis) {
  return {analysis.master(),
          analysis.master_dual(),
          analysis.strong_invariance(Direction::forward),
          analysis.strong_invariance(Direction::backward),
          analysis.invariance(CycleKind::mu),
          analysis.invariance(CycleKind::mu_tilde),
          analysis.invariance(CycleKind::nu),
          analysis.precapacity()};
}

/// mu(A) for every A in {0,1}^m, one addition per subset.
template <class Scalar>
std::vector<Scalar> subset_table(const Vector<Scalar>& masses) {
  const std::size_t n = std::size_t{1} << masses.size();
  std::vector<Scalar> table(n, Scalar(0));
  for (std::size_t mask = 1; mask < n; ++mask)
    table[mask] = table[mask & (mask - 1)] + masses[std::countr_zero(mask)];
  return table;
}

/// Checks that depend on B only.
template <class Scalar>
void base_checks(const CycleAnalysis<Scalar>& analysis, Accumulator<Scalar>& acc) {
  const auto& sys = analysis.system();
  const EventSet& B = analysis.base();
  const Scalar base_mass = sys.mass(B);
  auto& c = acc.base_checks;
  Accumulator<Scalar>::update(
      c[0], abs_value<Scalar>(base_mass - sys.mass(B & analysis.forward().finite_set)));

  const EventSet everything = sys.all();
  Index mismatches_fwd = 0;
  for (Index w = 0; w < sys.size(); ++w)
    if (occupation_count(sys, everything, B, w, Direction::forward) != analysis.forward()[w]) ++mismatches_fwd;
  Accumulator<Scalar>::update(c[7], Scalar(mismatches_fwd));

  if (!sys.invertible()) return;
  Accumulator<Scalar>::update(
      c[1], abs_value<Scalar>(base_mass - sys.mass(B & analysis.backward().finite_set)));

  if (base_mass > Scalar(0)) {
    const auto kac = kac_from_analysis(analysis);
    Accumulator<Scalar>::update(c[2], kac.residual);
    Accumulator<Scalar>::update(c[3], kac.unconditional_residual);
    Accumulator<Scalar>::update(c[4], kac.dual_residual);
    Accumulator<Scalar>::update(c[5], kac.dual_unconditional_residual);
  }

  const Scalar fwd = sys.mass(analysis.forward().finite_set);
  const Scalar bwd = sys.mass(analysis.backward().finite_set);
  const Positivity<Scalar> pos{base_mass > Scalar(0), fwd > Scalar(0), bwd > Scalar(0), base_mass, fwd, bwd};
  Accumulator<Scalar>::update(c[6], Scalar(pos.consistent() ? 0 : 1));

  Index mismatches_bwd = 0;
  for (Index w = 0; w < sys.size(); ++w)
    if (occupation_count(sys, everything, B, w, Direction::backward) != analysis.backward()[w]) ++mismatches_bwd;
  Accumulator<Scalar>::update(c[8], Scalar(mismatches_bwd));
}

template <class Scalar>
void exhaustive_range(const FiniteSystem<Scalar>& sys, std::uint64_t begin, std::uint64_t end,
                      Accumulator<Scalar>& acc) {
  const Index m = sys.size();
  const std::uint64_t n_sets = std::uint64_t{1} << m;
  for (std::uint64_t b_mask = begin; b_mask < end; ++b_mask) {
    CycleAnalysis<Scalar> analysis(sys, EventSet::from_mask(m, b_mask));
    base_checks(analysis, acc);
    ++acc.base_sets;
    if (!sys.invertible()) continue;
    const auto identities = pair_identities(analysis);
    for (std::size_t k = 0; k < identities.size(); ++k) {
      const auto lhs = subset_table(identities[k].lhs);
      const auto rhs = subset_table(identities[k].rhs);
      auto& check = acc.pair_checks[k];
      for (std::uint64_t a_mask = 0; a_mask < n_sets; ++a_mask)
        Accumulator<Scalar>::update(check, abs_value<Scalar>(lhs[a_mask] - rhs[a_mask]));
    }
    acc.pairs += static_cast<Index>(n_sets);
  }
}

inline EventSet random_subset(Stream& rng, Index m) {
  EventSet s(m);
  std::uint64_t word = 0;
  for (Index i = 0; i < m; ++i) {
    if (i % 64 == 0) word = rng.bits();
    if ((word >> (i % 64)) & 1u) s.insert(i);
  }
  return s;
}

}  // namespace detail

/// Runs every finite-system identity over all (A, B) pairs when the system is
/// small enough, or over `sample_pairs` random pairs otherwise. The system is
/// normalized to a probability first (all identities are linear in mu).
/// Non-invertible systems get the forward-only checks.
template <class Scalar>
IdentitySuiteResult<Scalar> run_identity_suite(const FiniteSystem<Scalar>& input,
                                               const IdentitySuiteOptions& options = {}) {
  const FiniteSystem<Scalar> sys = input.total_mass() > Scalar(0) ? input.normalized() : input;
  const Index m = sys.size();
  IdentitySuiteResult<Scalar> result;
  result.invertible = sys.invertible();
  result.preservation_violation = check_preserving(sys).max_violation;
  result.exhaustive = m <= options.exhaustive_limit && m <= 20;

  detail::Accumulator<Scalar> total;
  if (result.exhaustive) {
    const std::uint64_t n_sets = std::uint64_t{1} << m;
    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(n_sets)));
    std::vector<detail::Accumulator<Scalar>> parts(workers);
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) {
      const std::uint64_t begin = n_sets * w / workers;
      const std::uint64_t end = n_sets * (w + 1) / workers;
      if (workers == 1)
        detail::exhaustive_range(sys, begin, end, parts[w]);
      else
        threads.emplace_back([&, w, begin, end] { detail::exhaustive_range(sys, begin, end, parts[w]); });
    }
    for (auto& t : threads) t.join();
    for (const auto& p : parts) total.merge(p);
  } else {
    Stream rng(options.seed, 0x1de7);
    for (Index k = 0; k < options.sample_pairs; ++k) {
      const EventSet B = detail::random_subset(rng, m);
      const EventSet A = detail::random_subset(rng, m);
      CycleAnalysis<Scalar> analysis(sys, B);
      detail::base_checks(analysis, total);
      ++total.base_sets;
      if (!sys.invertible()) continue;
      const auto identities = detail::pair_identities(analysis);
      for (std::size_t i = 0; i < identities.size(); ++i)
        detail::Accumulator<Scalar>::update(total.pair_checks[i], identities[i].residual(A));
      ++total.pairs;
    }
  }

  result.base_sets = total.base_sets;
  result.pairs = total.pairs;
  for (auto& c : total.base_checks)
    if (c.evaluations > 0) result.checks.push_back(c);
  for (auto& c : total.pair_checks)
    if (c.evaluations > 0) result.checks.push_back(c);
  return result;
}

}  // namespace cycleflow
