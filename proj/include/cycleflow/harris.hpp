#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cycleflow/event_set.hpp"
#include "cycleflow/markov.hpp"
#include "cycleflow/regen.hpp"
#include "cycleflow/rng.hpp"

namespace cycleflow::harris {

using markov::StochasticMatrix;

/// Finite-state kernel K with minorization data: K^ell(x, .) >= epsilon * lambda(.)
/// for x in the regeneration set R.
///
/// Construction checks ranges only (lambda a probability vector, 0 < epsilon <= 1,
/// ell >= 1, R nonempty); minorization_residual() and harris_conditions()
/// report whether the data actually define a Harris chain.
class HarrisModel {
public:
  HarrisModel(StochasticMatrix kernel, EventSet regeneration_set, Eigen::VectorXd lambda,
              double epsilon, int ell);

  const StochasticMatrix& kernel() const { return kernel_; }
  const EventSet& regeneration_set() const { return R_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  double epsilon() const { return epsilon_; }
  int ell() const { return ell_; }
  Index size() const { return kernel_.size(); }
  bool in_regeneration_set(Index x) const { return R_.contains(x); }

  /// K^k for 0 <= k <= ell.
  const Eigen::MatrixXd& power(int k) const { return powers_.at(static_cast<std::size_t>(k)); }
  const Eigen::MatrixXd& k_ell() const { return powers_.back(); }

  /// Cumulative rows of K, for one-step sampling.
  std::span<const double> cumulative_row(Index x) const {
    return cumulative_[static_cast<std::size_t>(x)];
  }

private:
  StochasticMatrix kernel_;
  EventSet R_;
  Eigen::VectorXd lambda_;
  double epsilon_;
  int ell_;
  std::vector<Eigen::MatrixXd> powers_;
  std::vector<std::vector<double>> cumulative_;
};

struct MinorizationFit {
  double epsilon = 0.0;
  Eigen::VectorXd lambda;
};

/// lambda*(y) proportional to min_{x in R} K^ell(x, y); epsilon* is the total of those
/// minima (snapped to 1 when within 1e-12 of it).
MinorizationFit fit_minorization(const StochasticMatrix& K, const EventSet& R, int ell);

/// Largest epsilon with K^ell(x, .) >= epsilon * lambda on R, for a given lambda.
double max_epsilon(const StochasticMatrix& K, const EventSet& R, int ell, const Eigen::VectorXd& lambda);

/// min over x in R, all y, of K^ell(x, y) - epsilon * lambda(y); valid iff >= -1e-12.
double minorization_residual(const HarrisModel& model);

inline constexpr double kMinorizationTolerance = 1e-12;

/// (K^ell(x, .) - epsilon * lambda) / (1 - epsilon) for x in R and epsilon < 1.
/// Entries within tolerance below zero are clipped; larger negatives raise
/// invalid_model unless `allow_clipping` (then clipped and renormalized).
Eigen::VectorXd residual_kernel(const HarrisModel& model, Index x, bool allow_clipping = false);

/// max over x in R of |epsilon * lambda + (1 - epsilon) * residual(x) - K^ell(x, .)|.
double mixture_identity_residual(const HarrisModel& model);

struct HarrisConditions {
  Eigen::VectorXd hit_probability;  // P_x(t_R < inf), t_R = inf{n >= 1 : X_n in R}
  double hit_prob_min = 0.0;
  Eigen::VectorXd expected_hitting_time;  // E_x t_R, +inf where infinite
  double expected_lambda_return = 0.0;    // E_lambda t_R
  bool recurrent = false;                 // hit_prob_min >= 1 - 1e-10
  bool positive = false;                  // E_lambda t_R finite
};

HarrisConditions harris_conditions(const HarrisModel& model);

/// Law of (X_1, ..., X_{ell-1}) given X_0 = x and X_ell = y.
class BridgeLaw {
public:
  BridgeLaw(const HarrisModel& model, Index x, Index y);

  Index from() const { return x_; }
  Index to() const { return y_; }
  int intermediate_steps() const { return model_->ell() - 1; }

  /// Law of X_j given X_{j-1} = previous, 1 <= j <= ell - 1.
  Eigen::VectorXd step_distribution(Index previous, int j) const;

  /// Exact G(path | x, y) for a path of ell - 1 intermediate states.
  double probability(std::span<const Index> path) const;

  std::vector<Index> sample(Stream& rng) const;

  /// All intermediate paths of positive probability; exponential in ell.
  std::vector<std::pair<std::vector<Index>, double>> enumerate() const;

private:
  const HarrisModel* model_;
  Index x_;
  Index y_;
};

BridgeLaw bridge_distribution(const HarrisModel& model, Index x, Index y);

/// One ell-block (X_{n+1}, ..., X_{n+ell}) from X_n = x with mark zeta.
std::vector<Index> split_block(const HarrisModel& model, Index x, bool zeta, Stream& rng);

struct SplitState {
  Index x;
  bool zeta;
};

struct SplitChainRun {
  std::vector<SplitState> path;           // X_0 .. X_{t_n}, each with its mark
  std::vector<bool> block_start;          // whether time n starts an ell-block
  std::vector<Index> regeneration_times;  // t_1 < ... < t_n
  CycleSample cycles;
  Index steps = 0;
};

struct SplitSimulationOptions {
  Index step_budget = 10'000'000;
  unsigned workers = 1;
  bool record_path = true;
};

/// Split chain started from lambda, run over non-overlapping ell-blocks until
/// n_regens regenerations. Cycle k is driven by stream (seed, k); its closing
/// regeneration state is the start state drawn by stream (seed, k + 1).
SplitChainRun simulate_split_chain(const HarrisModel& model, Index n_regens, std::uint64_t seed,
                                   const SplitSimulationOptions& options = {});

/// Counts of X_{n+ell} given X_n over block starts n, one row per X_n.
Eigen::MatrixXd block_transition_counts(const HarrisModel& model, const SplitChainRun& run);

struct Variant {
  std::string label;
  HarrisModel model;
};

struct CrosscheckRow {
  std::string label;
  Eigen::VectorXd pi_hat;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd z;
  double max_abs_z = 0.0;
  double mean_cycle_length = 0.0;
  bool pass = false;
};

struct CrosscheckTable {
  std::vector<CrosscheckRow> rows;
  bool low_sample = false;
  std::optional<bool> pass;  // unset when low_sample
};

inline constexpr Index kLowSampleCycles = 1000;

/// Runs the regenerative estimator for every variant (all sharing one kernel)
/// and compares each against `pi_exact`; passes iff every |z| <= z_threshold.
CrosscheckTable uniqueness_crosscheck(const std::vector<Variant>& variants,
                                      const Eigen::VectorXd& pi_exact, Index n_cycles,
                                      std::uint64_t seed, const SplitSimulationOptions& options = {},
                                      double z_threshold = 4.0);

}  // namespace cycleflow::harris
