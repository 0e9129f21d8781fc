#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cycleflow/scalar.hpp"

namespace cycleflow {

/// Per-cycle occupation counts and lengths, stored sparsely (one run of
/// (state, count) entries per cycle).
class CycleSample {
public:
  explicit CycleSample(Index n_states = 0) : n_states_(n_states) {}

  Index n_states() const { return n_states_; }
  Index n_cycles() const { return static_cast<Index>(lengths_.size()); }
  Index total_length() const { return total_length_; }
  Index length(Index cycle) const { return lengths_[static_cast<std::size_t>(cycle)]; }
  const std::vector<Index>& lengths() const { return lengths_; }

  /// Records one cycle from the states it visits, X_{t_k}, ..., X_{t_{k+1}-1}.
  void append(std::span<const Index> path);
  void append(const CycleSample& other);

  /// Dense occupation vector of one cycle.
  Eigen::VectorXd occupation(Index cycle) const;

  template <class F>
  void for_each_visit(Index cycle, F&& f) const {
    const auto c = static_cast<std::size_t>(cycle);
    for (Index k = offsets_[c]; k < offsets_[c + 1]; ++k)
      f(states_[static_cast<std::size_t>(k)], counts_[static_cast<std::size_t>(k)]);
  }

private:
  Index n_states_;
  Index total_length_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> states_;
  std::vector<Index> counts_;
  std::vector<Index> lengths_;
};

/// Ratio estimate of a stationary law from i.i.d. regeneration cycles.
struct RegenReport {
  Index n_cycles = 0;
  CycleSample cycles;
  Eigen::VectorXd pi_hat;
  std::optional<Eigen::VectorXd> standard_errors;  // absent for a single cycle
  double mean_cycle_length = 0.0;
  Index total_length = 0;
};

/// pi_hat[a] = total visits to a / total length. Standard errors come from the
/// delta method on the i.i.d. pairs (occupation, length).
RegenReport regen_ratio_estimator(CycleSample cycles);

/// (pi_hat - pi_exact) / SE per state. A state with zero standard error gets
/// z = 0 when the estimate equals the exact value and +-inf otherwise.
Eigen::VectorXd z_scores(const RegenReport& report, const Eigen::VectorXd& pi_exact);

struct GoodnessOfFit {
  double statistic = 0.0;
  Index dof = 0;
  double p_value = 1.0;
  Index bins = 0;
};

/// Pearson chi-square test of observed counts against a probability vector.
/// Bins with expected count below `min_expected` are pooled; an observation in
/// a zero-probability bin gives p = 0.
GoodnessOfFit chi_square_gof(const Eigen::VectorXd& counts, const Eigen::VectorXd& probabilities,
                             double min_expected = 5.0);

}  // namespace cycleflow
