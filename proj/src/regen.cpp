#include "cycleflow/regen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

#include "cycleflow/error.hpp"

namespace cycleflow {

void CycleSample::append(std::span<const Index> path) {
  if (path.empty()) throw Error(ErrorCode::precondition, "a cycle has length at least 1");
  std::vector<Index> sorted(path.begin(), path.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= n_states_)
    throw Error(ErrorCode::structural, "cycle visits a state outside the state space");
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    states_.push_back(sorted[i]);
    counts_.push_back(static_cast<Index>(j - i));
    i = j;
  }
  offsets_.push_back(static_cast<Index>(states_.size()));
  lengths_.push_back(static_cast<Index>(path.size()));
  total_length_ += static_cast<Index>(path.size());
}

void CycleSample::append(const CycleSample& other) {
  if (other.n_states_ != n_states_)
    throw Error(ErrorCode::structural, "cycle samples over different state spaces");
  const Index shift = static_cast<Index>(states_.size());
  states_.insert(states_.end(), other.states_.begin(), other.states_.end());
  counts_.insert(counts_.end(), other.counts_.begin(), other.counts_.end());
  for (std::size_t c = 1; c < other.offsets_.size(); ++c) offsets_.push_back(other.offsets_[c] + shift);
  lengths_.insert(lengths_.end(), other.lengths_.begin(), other.lengths_.end());
  total_length_ += other.total_length_;
}

Eigen::VectorXd CycleSample::occupation(Index cycle) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_states_);
  for_each_visit(cycle, [&](Index s, Index n) { out[s] = static_cast<double>(n); });
  return out;
}

RegenReport regen_ratio_estimator(CycleSample cycles) {
  const Index n = cycles.n_cycles();
  if (n < 1) throw Error(ErrorCode::precondition, "the estimator needs at least one complete cycle");
  const Index S = cycles.n_states();

  // Integer-valued sums, exact in long double.
  std::vector<long double> sum_y(S, 0.0L), sum_yy(S, 0.0L), sum_yt(S, 0.0L);
  long double sum_t = 0.0L, sum_tt = 0.0L;
  for (Index c = 0; c < n; ++c) {
    const long double t = static_cast<long double>(cycles.length(c));
    sum_t += t;
    sum_tt += t * t;
    cycles.for_each_visit(c, [&](Index s, Index k) {
      const long double y = static_cast<long double>(k);
      sum_y[s] += y;
      sum_yy[s] += y * y;
      sum_yt[s] += y * t;
    });
  }

  RegenReport report;
  report.n_cycles = n;
  report.total_length = cycles.total_length();
  report.mean_cycle_length = static_cast<double>(sum_t / n);
  report.pi_hat.resize(S);
  for (Index s = 0; s < S; ++s) report.pi_hat[s] = static_cast<double>(sum_y[s] / sum_t);

  if (n >= 2) {
    const long double mean_t = sum_t / n;
    Eigen::VectorXd se(S);
    for (Index s = 0; s < S; ++s) {
      const long double p = sum_y[s] / sum_t;
      long double ss = sum_yy[s] - 2.0L * p * sum_yt[s] + p * p * sum_tt;
      if (ss < 0) ss = 0;
      const long double var = ss / (n - 1);
      se[s] = static_cast<double>(std::sqrt(var / n) / mean_t);
    }
    report.standard_errors = std::move(se);
  }
  report.cycles = std::move(cycles);
  return report;
}

Eigen::VectorXd z_scores(const RegenReport& report, const Eigen::VectorXd& pi_exact) {
  if (!report.standard_errors)
    throw Error(ErrorCode::precondition, "standard errors unavailable for a single cycle");
  if (pi_exact.size() != report.pi_hat.size())
    throw Error(ErrorCode::structural, "reference distribution has the wrong size");
  Eigen::VectorXd z(pi_exact.size());
  for (Index s = 0; s < z.size(); ++s) {
    const double diff = report.pi_hat[s] - pi_exact[s];
    const double se = (*report.standard_errors)[s];
    if (se > 0)
      z[s] = diff / se;
    else if (std::abs(diff) <= 1e-12)
      z[s] = 0.0;
    else
      z[s] = std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return z;
}

GoodnessOfFit chi_square_gof(const Eigen::VectorXd& counts, const Eigen::VectorXd& probabilities,
                             double min_expected) {
  if (counts.size() != probabilities.size())
    throw Error(ErrorCode::structural, "counts and probabilities differ in length");
  const double total = counts.sum();
  GoodnessOfFit out;
  if (total <= 0) return out;

  double stat = 0.0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  Index bins = 0;
  for (Index i = 0; i < counts.size(); ++i) {
    const double expected = probabilities[i] * total;
    if (probabilities[i] <= 0.0) {
      if (counts[i] > 0) {
        out.statistic = std::numeric_limits<double>::infinity();
        out.p_value = 0.0;
        out.bins = counts.size();
        return out;
      }
      continue;
    }
    if (expected < min_expected) {
      pooled_obs += counts[i];
      pooled_exp += expected;
      continue;
    }
    stat += (counts[i] - expected) * (counts[i] - expected) / expected;
    ++bins;
  }
  if (pooled_exp > 0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++bins;
  }
  out.statistic = stat;
  out.bins = bins;
  out.dof = bins - 1;
  if (out.dof >= 1) {
    boost::math::chi_squared dist(static_cast<double>(out.dof));
    out.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  }
  return out;
}

}  // namespace cycleflow
