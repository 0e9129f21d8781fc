#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cycleflow/regen.hpp"
#include "cycleflow/scalar.hpp"

namespace cycleflow::markov {

/// Row-stochastic transition matrix on a finite state set.
class StochasticMatrix {
public:
  /// Rows must be nonnegative and sum to 1 within `tolerance`.
  explicit StochasticMatrix(Eigen::MatrixXd rows, std::vector<std::string> states = {},
                            double tolerance = 1e-12);

  /// Validates row sums within `tolerance`, then divides every row by its sum.
  static StochasticMatrix renormalized(Eigen::MatrixXd rows, std::vector<std::string> states = {},
                                       double tolerance = 1e-9);

  Index size() const { return rows_.rows(); }
  const Eigen::MatrixXd& matrix() const { return rows_; }
  double operator()(Index i, Index j) const { return rows_(i, j); }
  const std::vector<std::string>& states() const { return states_; }

  /// Index of a state given by name, or by decimal index when no name matches.
  Index index_of(const std::string& state) const;

private:
  Eigen::MatrixXd rows_;
  std::vector<std::string> states_;
};

enum class ClassKind { recurrent, transient };

/// Communicating classes of the positive-probability digraph.
struct ClassStructure {
  std::vector<std::vector<Index>> classes;  // each sorted ascending
  std::vector<ClassKind> kinds;
  std::vector<Index> class_of;              // state -> class id
  std::vector<Index> order;                 // class ids, sources before sinks

  std::vector<Index> recurrent_classes() const;
  bool is_recurrent_state(Index s) const {
    return kinds[static_cast<std::size_t>(class_of[static_cast<std::size_t>(s)])] == ClassKind::recurrent;
  }
};

ClassStructure class_structure(const StochasticMatrix& P);

/// Expected visits per b-cycle: nu[a] = E_b sum_{n < t_b} 1(X_n = a).
struct CycleOccupation {
  Index base = 0;
  Eigen::VectorXd nu;
  double mean_return = 0.0;  // E_b t_b = sum(nu)
};

/// Exact cycle occupation via the taboo linear system over b's class.
CycleOccupation cycle_occupation(const StochasticMatrix& P, Index b);

struct InvariantDistribution {
  Eigen::VectorXd pi;
};

/// pi^{(b)} = nu / E_b t_b, supported on the class of b.
InvariantDistribution cycle_stationary(const StochasticMatrix& P, Index b);

/// ||pi P - pi||_inf
double invariance_residual(const StochasticMatrix& P, const Eigen::VectorXd& pi);

/// ||pi^{(b)} - pi^{(c)}||_inf for b, c in one recurrent class.
double exchange_residual(const StochasticMatrix& P, Index b, Index c);

struct ConvexDecomposition {
  std::vector<Index> representatives;  // lowest-index state of each recurrent class
  Eigen::VectorXd weights;             // one per recurrent class
  double transient_mass = 0.0;
  double residual = 0.0;               // ||pi - sum_i w_i pi^{(b_i)}||_inf
};

/// Writes an invariant pi as a mixture of the per-class cycle distributions.
ConvexDecomposition convex_decomposition(const StochasticMatrix& P, const Eigen::VectorXd& pi,
                                         double tolerance = 1e-10);

struct SimulationOptions {
  unsigned workers = 1;
  Index step_budget = 10'000'000;
};

/// Simulates n_cycles i.i.d. b-to-b cycles (cycle i uses stream (seed, i))
/// and returns the ratio estimate.
RegenReport simulate_cycle_estimator(const StochasticMatrix& P, Index b, Index n_cycles,
                                     std::uint64_t seed, const SimulationOptions& options = {});

/// Exact path cap for the dense taboo solve.
inline constexpr Index kMaxExactClassSize = 2000;

}  // namespace cycleflow::markov
