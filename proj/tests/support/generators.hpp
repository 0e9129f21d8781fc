#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "cycleflow/finite_system.hpp"
#include "cycleflow/markov.hpp"

namespace gen {

using cycleflow::FiniteSystem;
using cycleflow::Index;
using cycleflow::Rational;
using Rng = std::mt19937_64;

inline Index uniform_int(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::vector<Index> random_permutation(Rng& rng, Index m) {
  std::vector<Index> p(static_cast<std::size_t>(m));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Cycle label of each point of a functional graph; -1 for transient points.
inline std::vector<Index> periodic_cycles(const std::vector<Index>& map) {
  const auto m = static_cast<Index>(map.size());
  std::vector<Index> label(map.size(), -1);
  Index next = 0;
  for (Index s = 0; s < m; ++s) {
    // After m steps every orbit sits on its cycle.
    Index x = s;
    for (Index k = 0; k < m; ++k) x = map[static_cast<std::size_t>(x)];
    if (label[static_cast<std::size_t>(x)] != -1) continue;
    Index y = x;
    do {
      label[static_cast<std::size_t>(y)] = next;
      y = map[static_cast<std::size_t>(y)];
    } while (y != x);
    ++next;
  }
  return label;
}

/// Integer weight per cycle in [0, 9] (zero with probability `null_prob`),
/// zero on transient points.
inline std::vector<long> cycle_weights(Rng& rng, const std::vector<Index>& map, double null_prob) {
  const auto label = periodic_cycles(map);
  const Index cycles = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
  std::vector<long> per_cycle(static_cast<std::size_t>(cycles));
  for (auto& w : per_cycle) w = uniform(rng) < null_prob ? 0 : static_cast<long>(uniform_int(rng, 1, 9));
  if (std::all_of(per_cycle.begin(), per_cycle.end(), [](long w) { return w == 0; }) && cycles > 0)
    per_cycle[0] = 1;
  std::vector<long> w(map.size(), 0);
  for (std::size_t i = 0; i < map.size(); ++i)
    if (label[i] >= 0) w[i] = per_cycle[static_cast<std::size_t>(label[i])];
  return w;
}

template <class Scalar>
FiniteSystem<Scalar> from_integer_weights(std::vector<Index> map, const std::vector<long>& w, bool invertible) {
  long total = 0;
  for (long x : w) total += x;
  cycleflow::Vector<Scalar> weights(static_cast<Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    if constexpr (std::is_same_v<Scalar, Rational>)
      weights[static_cast<Index>(i)] = Rational(w[i], total);
    else
      weights[static_cast<Index>(i)] = static_cast<double>(w[i]) / static_cast<double>(total);
  }
  return FiniteSystem<Scalar>({}, std::move(map), std::move(weights), invertible);
}

/// Random permutation with random cycle-constant weights, normalized to 1.
template <class Scalar>
FiniteSystem<Scalar> random_permutation_system(Rng& rng, Index m, double null_prob = 0.2) {
  auto map = random_permutation(rng, m);
  const auto w = cycle_weights(rng, map, null_prob);
  return from_integer_weights<Scalar>(std::move(map), w, true);
}

/// Random self-map; invariant weights live on its periodic points.
template <class Scalar>
FiniteSystem<Scalar> random_endomorphism(Rng& rng, Index m) {
  std::vector<Index> map(static_cast<std::size_t>(m));
  for (auto& t : map) t = uniform_int(rng, 0, m - 1);
  const auto w = cycle_weights(rng, map, 0.2);
  return from_integer_weights<Scalar>(std::move(map), w, false);
}

/// Irreducible chain: a random Hamiltonian cycle plus random extra edges.
inline Eigen::MatrixXd random_irreducible(Rng& rng, Index n, double density = 0.3) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  const auto order = random_permutation(rng, n);
  for (Index k = 0; k < n; ++k)
    P(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>((k + 1) % n)]) = 0.05 + uniform(rng);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (uniform(rng) < density) P(i, j) += uniform(rng);
  for (Index i = 0; i < n; ++i) P.row(i) /= P.row(i).sum();
  return P;
}

struct ReducibleChain {
  Eigen::MatrixXd P;
  std::vector<std::vector<Index>> classes;  // recurrent classes, as placed
  std::vector<Index> transient;
};

/// Block-diagonal irreducible classes plus transient states feeding into them,
/// with states shuffled.
inline ReducibleChain random_reducible(Rng& rng, Index n_classes, Index max_class, Index n_transient) {
  std::vector<Index> sizes;
  Index n = n_transient;
  for (Index c = 0; c < n_classes; ++c) {
    sizes.push_back(uniform_int(rng, 1, max_class));
    n += sizes.back();
  }
  const auto perm = random_permutation(rng, n);
  ReducibleChain out;
  out.P = Eigen::MatrixXd::Zero(n, n);
  Index offset = 0;
  for (Index c = 0; c < n_classes; ++c) {
    const Eigen::MatrixXd block = random_irreducible(rng, sizes[static_cast<std::size_t>(c)]);
    std::vector<Index> members;
    for (Index i = 0; i < block.rows(); ++i) members.push_back(perm[static_cast<std::size_t>(offset + i)]);
    for (Index i = 0; i < block.rows(); ++i)
      for (Index j = 0; j < block.rows(); ++j)
        out.P(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>(j)]) = block(i, j);
    std::sort(members.begin(), members.end());
    out.classes.push_back(members);
    offset += block.rows();
  }
  for (Index t = 0; t < n_transient; ++t) {
    const Index s = perm[static_cast<std::size_t>(offset + t)];
    out.transient.push_back(s);
    // Leak into at least one recurrent state; other transient states allowed.
    out.P(s, perm[static_cast<std::size_t>(uniform_int(rng, 0, offset - 1))]) = 0.1 + uniform(rng);
    for (Index k = 0; k < n; ++k)
      if (uniform(rng) < 0.3) out.P(s, perm[static_cast<std::size_t>(k)]) += uniform(rng);
  }
  for (Index i = 0; i < n; ++i) out.P.row(i) /= out.P.row(i).sum();
  std::sort(out.transient.begin(), out.transient.end());
  return out;
}

}  // namespace gen
