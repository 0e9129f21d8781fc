#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cycleflow/error.hpp"
#include "cycleflow/io.hpp"
#include "cycleflow/report.hpp"
#include "cycleflow/suite.hpp"

namespace {

using namespace cycleflow;

constexpr const char* kFooter = R"(Exit codes:
   0  every check passed
   1  at least one check failed (the report is still written)
   2  command-line usage error
   3  model file is not valid JSON
   4  unknown model "kind"
   5  model violates an invariant (the message names the field)
   6  unreadable model file or unwritable report path
   7  operation precondition violated
   8  operation unsupported for this model
   9  simulation step budget exceeded
  10  internal inconsistency
  11  invalid Harris model (minorization, residual kernel)
  12  structural error (singular solve, index out of range)

The seed defaults to $CYCLEFLOW_SEED when --seed is absent, else 1.)";

struct Common {
  std::string file;
  std::string format = "json";
  std::string out = "-";
  bool timing = false;
  std::optional<std::uint64_t> seed;
  suite::RunConfig config;
};

void add_common(CLI::App& cmd, Common& c, bool simulation) {
  cmd.add_option("file", c.file, "Model file (JSON)")->required();
  cmd.add_option("--format", c.format, "Report format")
      ->check(CLI::IsMember({"json", "csv", "text"}))
      ->capture_default_str();
  cmd.add_option("--out", c.out, "Report path, - for stdout")->capture_default_str();
  cmd.add_option("--tolerance", c.config.tolerance, "Tolerance for exact identities")->capture_default_str();
  cmd.add_option("--coarse-tolerance", c.config.coarse_tolerance, "Tolerance for exchange and decomposition")
      ->capture_default_str();
  cmd.add_option("--seed", c.seed, "RNG seed");
  cmd.add_option("--workers", c.config.workers, "Worker threads")->capture_default_str();
  cmd.add_flag("--timing", c.timing, "Include wall-clock time in the report");
  if (simulation) {
    cmd.add_option("--cycles", c.config.cycles, "Regeneration cycles to simulate")->capture_default_str();
    cmd.add_option("--step-budget", c.config.step_budget, "Simulation step budget")->capture_default_str();
    cmd.add_option("--z-threshold", c.config.z_threshold, "Per-state |z| gate")->capture_default_str();
    cmd.add_option("--alpha", c.config.alpha, "Chi-square significance level")->capture_default_str();
  }
}

std::uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("CYCLEFLOW_SEED"); env && *env) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(env, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || env[used] != '\0') throw CLI::ValidationError("CYCLEFLOW_SEED", "not an unsigned integer");
    return v;
  }
  return 1;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cycleflow: cycle measures, cycle-formula stationary laws and regenerative splitting"};
  app.footer(kFooter);
  app.require_subcommand(1);

  Common common;
  auto* verify = app.add_subcommand("verify", "Run every check for the model's kind");
  add_common(*verify, common, true);
  verify->add_option("--exhaustive-limit", common.config.exhaustive_limit,
                     "Enumerate all subset pairs up to this many points")
      ->capture_default_str();
  verify->add_option("--sample-pairs", common.config.sample_pairs, "Random pairs for larger systems")
      ->capture_default_str();

  auto* stationary = app.add_subcommand("stationary", "Cycle-formula stationary law from a base state");
  add_common(*stationary, common, true);
  std::string base;
  std::string method = "exact";
  stationary->add_option("--base", base, "Base state (name or index)")->required();
  stationary->add_option("--method", method, "exact: taboo solve; cycles: simulated cycles")
      ->check(CLI::IsMember({"exact", "cycles"}))
      ->capture_default_str();

  auto* harris_cmd = app.add_subcommand("harris", "Split-chain simulation and regenerative estimate");
  add_common(*harris_cmd, common, true);

  auto* exchange = app.add_subcommand("exchange", "Compare cycle-formula laws from two base states");
  add_common(*exchange, common, false);
  std::string states;
  exchange->add_option("--states", states, "Two states b,c")->required();

  auto* fit = app.add_subcommand("fit-minorization", "Best minorization for a regeneration set");
  add_common(*fit, common, false);
  std::string set;
  int ell = 1;
  fit->add_option("--set", set, "Regeneration set i,j,...")->required();
  fit->add_option("--ell", ell, "Block length")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
    common.config.seed = resolve_seed(common);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    common.config.output_format = report::parse_format(common.format);
    const auto model = io::load_model(common.file);

    report::SuiteReport rep;
    if (verify->parsed()) {
      rep = suite::run_suite(model, common.config);
    } else if (stationary->parsed()) {
      rep = suite::stationary_report(model, base, method == "cycles", common.config);
    } else if (harris_cmd->parsed()) {
      rep = suite::harris_report(model, common.config);
    } else if (exchange->parsed()) {
      const auto pair = split_list(states);
      if (pair.size() != 2) {
        std::cerr << "error: --states needs exactly two states, e.g. --states 0,1\n";
        return 2;
      }
      rep = suite::exchange_report(model, pair[0], pair[1], common.config);
    } else {
      rep = suite::fit_minorization_report(model, split_list(set), ell, common.config);
    }

    if (common.timing)
      rep.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report::emit_report(rep, common.config.output_format, common.out, common.timing);
    return rep.passed() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  }
}
