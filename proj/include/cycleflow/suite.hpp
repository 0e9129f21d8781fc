#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cycleflow/io.hpp"
#include "cycleflow/report.hpp"

namespace cycleflow::suite {

struct RunConfig {
  double tolerance = 1e-12;         // exact identities
  double coarse_tolerance = 1e-10;  // exchange formula and decompositions
  Index exhaustive_limit = 8;
  Index sample_pairs = 50;
  std::uint64_t seed = 1;
  Index cycles = 100'000;
  double z_threshold = 4.0;
  double alpha = 0.01;  // chi-square gates
  report::Format output_format = report::Format::json;
  unsigned workers = 1;
  Index step_budget = 10'000'000;

  /// Raises precondition on a nonpositive tolerance or cycle count.
  void validate() const;
};

/// Every verification check that applies to the model's kind.
report::SuiteReport run_suite(const io::LoadedModel& model, const RunConfig& config);

/// Cycle-formula distribution from `base`; exact solve or simulated cycles.
report::SuiteReport stationary_report(const io::LoadedModel& model, const std::string& base, bool simulate,
                                      const RunConfig& config);

report::SuiteReport exchange_report(const io::LoadedModel& model, const std::string& b, const std::string& c,
                                    const RunConfig& config);

report::SuiteReport fit_minorization_report(const io::LoadedModel& model, const std::vector<std::string>& set,
                                            int ell, const RunConfig& config);

/// Split-chain simulation gates. A markov_chain file is run as the atom model
/// R = {lowest recurrent state}, ell = 1, epsilon = 1, lambda = K(r, .).
report::SuiteReport harris_report(const io::LoadedModel& model, const RunConfig& config);

}  // namespace cycleflow::suite
