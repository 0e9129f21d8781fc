#include "cycleflow/suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

#include "cycleflow/error.hpp"
#include "cycleflow/identity_suite.hpp"

namespace cycleflow::suite {

using report::make_check;
using report::Relation;
using report::SuiteReport;
using markov::StochasticMatrix;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRecurrenceTolerance = 1e-10;
constexpr Index kMaxBasesPerClass = 64;
constexpr Index kBasesForLargeClass = 16;
constexpr double kBridgeEnumerationLimit = 65536.0;

template <class F>
auto stage(std::string_view name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(name) + ": " + e.what());
  }
}

SuiteReport start(const io::LoadedModel& model, std::string command, const RunConfig& config) {
  SuiteReport r;
  r.command = std::move(command);
  r.model = model.info;
  r.seed = config.seed;
  return r;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

const StochasticMatrix& kernel_of(const io::LoadedModel& model) {
  if (const auto* P = std::get_if<StochasticMatrix>(&model.model)) return *P;
  if (const auto* H = std::get_if<harris::HarrisModel>(&model.model)) return H->kernel();
  throw Error(ErrorCode::unsupported_operation,
              "operation needs a markov_chain or harris_discrete model, got " + model.info.kind);
}

bool is_counting_check(const std::string& name) {
  return name == "positivity_equivalence" || name.rfind("occupation_total", 0) == 0;
}

template <class Scalar>
void finite_suite(const FiniteSystem<Scalar>& sys, const RunConfig& config, SuiteReport& r) {
  constexpr bool exact = ScalarTraits<Scalar>::exact;
  IdentitySuiteOptions options;
  options.exhaustive_limit = config.exhaustive_limit;
  options.sample_pairs = config.sample_pairs;
  options.seed = config.seed;
  options.workers = config.workers;
  const auto result = stage("identity suite", [&] { return run_identity_suite(sys, options); });

  const double tol = exact ? 0.0 : config.tolerance;
  r.add(make_check("preservation", to_double(result.preservation_violation), tol));
  for (const auto& c : result.checks)
    r.add(make_check(c.name, to_double(c.max_residual), is_counting_check(c.name) ? 0.0 : tol));

  r.values["base_sets"] = {static_cast<double>(result.base_sets)};
  r.values["pairs"] = {static_cast<double>(result.pairs)};
  r.notes["arithmetic"] = exact ? "rational" : "double";
  r.notes["enumeration"] = result.exhaustive ? "exhaustive" : "sampled";
  r.notes["invertible"] = result.invertible ? "true" : "false";
}

/// Base states used per recurrent class: all of them, or an evenly spread subset.
std::vector<Index> bases_of(const std::vector<Index>& members) {
  const auto k = static_cast<Index>(members.size());
  if (k <= kMaxBasesPerClass) return members;
  std::vector<Index> out;
  for (Index i = 0; i < kBasesForLargeClass; ++i)
    out.push_back(members[static_cast<std::size_t>(i * k / kBasesForLargeClass)]);
  return out;
}

void markov_suite(const StochasticMatrix& P, const RunConfig& config, SuiteReport& r) {
  const auto cs = stage("class structure", [&] { return markov::class_structure(P); });
  const auto recurrent = cs.recurrent_classes();

  double invariance = 0.0;
  double exchange = 0.0;
  double normalization = 0.0;
  std::vector<Eigen::VectorXd> per_class;
  for (std::size_t k = 0; k < recurrent.size(); ++k) {
    const auto& members = cs.classes[static_cast<std::size_t>(recurrent[k])];
    Eigen::VectorXd lo, hi;
    for (Index b : bases_of(members)) {
      const auto pi = stage("cycle formula", [&] { return markov::cycle_stationary(P, b).pi; });
      invariance = std::max(invariance, markov::invariance_residual(P, pi));
      normalization = std::max(normalization, std::abs(pi.sum() - 1.0));
      if (lo.size() == 0) {
        lo = hi = pi;
        per_class.push_back(pi);
      } else {
        lo = lo.cwiseMin(pi);
        hi = hi.cwiseMax(pi);
      }
    }
    exchange = std::max(exchange, (hi - lo).maxCoeff());
    const auto occ = markov::cycle_occupation(P, members.front());
    const std::string tag = "class_" + std::to_string(k);
    r.values["pi_" + tag] = to_vector(per_class.back());
    r.values["mean_return_" + tag] = {occ.mean_return};
  }
  r.add(make_check("invariance", invariance, config.tolerance));
  r.add(make_check("normalization", normalization, config.tolerance));
  r.add(make_check("exchange", exchange, config.coarse_tolerance));

  // Equal-weight mixture of the class distributions must decompose back.
  const auto n_rec = static_cast<Index>(per_class.size());
  Eigen::VectorXd mix = Eigen::VectorXd::Zero(P.size());
  for (const auto& pi : per_class) mix += pi / static_cast<double>(n_rec);
  const auto dec = stage("convex decomposition",
                         [&] { return markov::convex_decomposition(P, mix, config.coarse_tolerance); });
  const Eigen::VectorXd expected = Eigen::VectorXd::Constant(n_rec, 1.0 / static_cast<double>(n_rec));
  r.add(make_check("decomposition_residual", dec.residual, config.coarse_tolerance));
  r.add(make_check("decomposition_weights", max_abs(dec.weights - expected), config.coarse_tolerance));

  r.values["recurrent_classes"] = {static_cast<double>(n_rec)};
  r.values["transient_states"] = {static_cast<double>(
      std::count_if(cs.class_of.begin(), cs.class_of.end(), [&](Index c) {
        return cs.kinds[static_cast<std::size_t>(c)] == markov::ClassKind::transient;
      }))};
}

harris::HarrisModel atom_model(const StochasticMatrix& P) {
  const auto cs = markov::class_structure(P);
  const auto recurrent = cs.recurrent_classes();
  const Index r = cs.classes[static_cast<std::size_t>(recurrent.front())].front();
  EventSet R(P.size());
  R.insert(r);
  return harris::HarrisModel(P, R, P.matrix().row(r).transpose(), 1.0, 1);
}

/// Largest |sum - 1| over the bridge laws of every (x in R, y) with K^ell(x, y) > 0.
double bridge_mass_residual(const harris::HarrisModel& model) {
  const Index n = model.size();
  const int ell = model.ell();
  const bool enumerate = std::pow(static_cast<double>(n), ell - 1) <= kBridgeEnumerationLimit;
  double worst = 0.0;
  for (Index x : model.regeneration_set().members()) {
    for (Index y = 0; y < n; ++y) {
      if (!(model.k_ell()(x, y) > 0.0)) continue;
      const harris::BridgeLaw G(model, x, y);
      if (ell == 1) continue;
      if (enumerate) {
        double total = 0.0;
        for (const auto& [path, p] : G.enumerate()) total += p;
        worst = std::max(worst, std::abs(total - 1.0));
        continue;
      }
      // Each sequential step is a probability vector iff the path law is.
      for (int j = 1; j < ell; ++j)
        for (Index prev = 0; prev < n; ++prev)
          if (model.power(ell - j + 1)(prev, y) > 0.0)
            worst = std::max(worst, std::abs(G.step_distribution(prev, j).sum() - 1.0));
    }
  }
  return worst;
}

void harris_suite(const harris::HarrisModel& model, const std::optional<harris::MinorizationFit>& fitted,
                  const RunConfig& config, SuiteReport& r) {
  const auto cond = stage("harris conditions", [&] { return harris::harris_conditions(model); });
  r.add(make_check("minorization", harris::minorization_residual(model), -harris::kMinorizationTolerance,
                   Relation::at_least));
  r.add(make_check("hit_probability_min", cond.hit_prob_min, 1.0 - kRecurrenceTolerance, Relation::at_least));
  r.add(make_check("expected_lambda_return", cond.expected_lambda_return, kInf, Relation::below));
  r.add(make_check("mixture_identity", stage("mixture identity", [&] {
                     return harris::mixture_identity_residual(model);
                   }),
                   config.tolerance));
  r.add(make_check("bridge_mass", stage("bridge law", [&] { return bridge_mass_residual(model); }),
                   config.tolerance));

  r.values["epsilon"] = {model.epsilon()};
  r.values["lambda"] = to_vector(model.lambda());
  r.values["ell"] = {static_cast<double>(model.ell())};
  r.values["regeneration_set"] = {};
  for (Index x : model.regeneration_set().members()) r.values["regeneration_set"].push_back(static_cast<double>(x));
  r.values["hit_probability"] = to_vector(cond.hit_probability);
  r.values["expected_hitting_time"] = to_vector(cond.expected_hitting_time);
  if (fitted) {
    r.notes["minorization"] = "fitted";
    r.values["fitted_epsilon"] = {fitted->epsilon};
    r.values["fitted_lambda"] = to_vector(fitted->lambda);
  }

  // The chain started from lambda must regenerate almost surely.
  if (model.lambda().dot(cond.hit_probability) < 1.0 - kRecurrenceTolerance) {
    r.notes["simulation"] = "skipped: regeneration set not reached almost surely from lambda";
    return;
  }

  const auto& P = model.kernel();
  const auto cs = markov::class_structure(P);
  std::vector<Index> rec_in_R;
  for (Index x : model.regeneration_set().members())
    if (cs.is_recurrent_state(x)) rec_in_R.push_back(x);
  std::optional<Eigen::VectorXd> pi_exact;
  bool single_class = !rec_in_R.empty();
  for (Index x : rec_in_R) single_class = single_class && cs.class_of[x] == cs.class_of[rec_in_R.front()];
  if (single_class) pi_exact = stage("exact stationary law", [&] {
      return markov::cycle_stationary(P, rec_in_R.front()).pi;
    });
  else
    r.notes["pi_exact"] = "unavailable: regeneration set meets several recurrent classes";

  harris::SplitSimulationOptions sim;
  sim.step_budget = config.step_budget;
  sim.workers = config.workers;
  sim.record_path = true;
  const auto run = stage("split chain", [&] { return harris::simulate_split_chain(model, config.cycles, config.seed, sim); });
  const auto est = regen_ratio_estimator(run.cycles);

  r.values["n_cycles"] = {static_cast<double>(est.n_cycles)};
  r.values["steps"] = {static_cast<double>(run.steps)};
  r.values["mean_cycle_length"] = {est.mean_cycle_length};
  r.values["pi_hat"] = to_vector(est.pi_hat);
  if (est.standard_errors) r.values["standard_errors"] = to_vector(*est.standard_errors);

  if (config.cycles < harris::kLowSampleCycles) {
    r.notes["low_sample"] = "fewer than " + std::to_string(harris::kLowSampleCycles) +
                            " cycles; statistical gates not evaluated";
    return;
  }

  if (pi_exact) {
    const Eigen::VectorXd z = z_scores(est, *pi_exact);
    r.values["pi_exact"] = to_vector(*pi_exact);
    r.values["z"] = to_vector(z);
    r.add(make_check("max_abs_z", max_abs(z), config.z_threshold));
  }

  Eigen::VectorXd at_regen = Eigen::VectorXd::Zero(model.size());
  for (Index t : run.regeneration_times) at_regen[run.path[static_cast<std::size_t>(t)].x] += 1.0;
  const auto gof = chi_square_gof(at_regen, model.lambda());
  r.add(make_check("regeneration_state_p", gof.p_value, config.alpha, Relation::at_least));

  // One test per starting state with observations, Bonferroni-corrected.
  const Eigen::MatrixXd counts = harris::block_transition_counts(model, run);
  double min_p = 1.0;
  Index rows = 0;
  for (Index x = 0; x < model.size(); ++x) {
    if (!(counts.row(x).sum() > 0.0)) continue;
    ++rows;
    min_p = std::min(min_p, chi_square_gof(counts.row(x).transpose(), model.k_ell().row(x).transpose()).p_value);
  }
  r.add(make_check("block_marginal_min_p", min_p, config.alpha / static_cast<double>(std::max<Index>(rows, 1)),
                   Relation::at_least));
}

}  // namespace

void RunConfig::validate() const {
  if (!(tolerance > 0.0)) throw Error(ErrorCode::precondition, "tolerance must be positive");
  if (!(coarse_tolerance > 0.0)) throw Error(ErrorCode::precondition, "coarse tolerance must be positive");
  if (cycles < 1) throw Error(ErrorCode::precondition, "cycles must be at least 1");
  if (workers < 1) throw Error(ErrorCode::precondition, "workers must be at least 1");
  if (exhaustive_limit < 0 || sample_pairs < 0) throw Error(ErrorCode::precondition, "negative pair budget");
  if (step_budget < 1) throw Error(ErrorCode::precondition, "step budget must be at least 1");
}

SuiteReport run_suite(const io::LoadedModel& model, const RunConfig& config) {
  config.validate();
  SuiteReport r = start(model, "verify", config);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, StochasticMatrix>)
          markov_suite(m, config, r);
        else if constexpr (std::is_same_v<M, harris::HarrisModel>)
          harris_suite(m, model.fitted, config, r);
        else
          finite_suite(m, config, r);
      },
      model.model);
  return r;
}

SuiteReport stationary_report(const io::LoadedModel& model, const std::string& base, bool simulate,
                              const RunConfig& config) {
  config.validate();
  const auto& P = kernel_of(model);
  const Index b = P.index_of(base);
  SuiteReport r = start(model, "stationary", config);
  r.values["base"] = {static_cast<double>(b)};
  r.notes["method"] = simulate ? "cycles" : "exact";

  if (!simulate) {
    const auto occ = stage("cycle formula", [&] { return markov::cycle_occupation(P, b); });
    const Eigen::VectorXd pi = occ.nu / occ.mean_return;
    r.values["pi"] = to_vector(pi);
    r.values["nu"] = to_vector(occ.nu);
    r.values["mean_return"] = {occ.mean_return};
    r.add(make_check("invariance", markov::invariance_residual(P, pi), config.tolerance));
    r.add(make_check("normalization", std::abs(pi.sum() - 1.0), config.tolerance));
    return r;
  }

  markov::SimulationOptions sim{config.workers, config.step_budget};
  const auto est = stage("cycle simulation",
                         [&] { return markov::simulate_cycle_estimator(P, b, config.cycles, config.seed, sim); });
  r.values["n_cycles"] = {static_cast<double>(est.n_cycles)};
  r.values["pi_hat"] = to_vector(est.pi_hat);
  r.values["mean_cycle_length"] = {est.mean_cycle_length};
  if (est.standard_errors) r.values["standard_errors"] = to_vector(*est.standard_errors);
  if (config.cycles < harris::kLowSampleCycles) {
    r.notes["low_sample"] = "fewer than " + std::to_string(harris::kLowSampleCycles) +
                            " cycles; statistical gates not evaluated";
    return r;
  }
  const auto pi = stage("cycle formula", [&] { return markov::cycle_stationary(P, b).pi; });
  const Eigen::VectorXd z = z_scores(est, pi);
  r.values["pi_exact"] = to_vector(pi);
  r.values["z"] = to_vector(z);
  r.add(make_check("max_abs_z", max_abs(z), config.z_threshold));
  return r;
}

SuiteReport exchange_report(const io::LoadedModel& model, const std::string& b, const std::string& c,
                            const RunConfig& config) {
  config.validate();
  const auto& P = kernel_of(model);
  const Index ib = P.index_of(b);
  const Index ic = P.index_of(c);
  SuiteReport r = start(model, "exchange", config);
  const double residual = stage("exchange formula", [&] { return markov::exchange_residual(P, ib, ic); });
  r.values["states"] = {static_cast<double>(ib), static_cast<double>(ic)};
  r.values["pi_b"] = to_vector(markov::cycle_stationary(P, ib).pi);
  r.values["pi_c"] = to_vector(markov::cycle_stationary(P, ic).pi);
  r.add(make_check("exchange", residual, config.coarse_tolerance));
  return r;
}

SuiteReport fit_minorization_report(const io::LoadedModel& model, const std::vector<std::string>& set, int ell,
                                    const RunConfig& config) {
  config.validate();
  const auto& P = kernel_of(model);
  EventSet R(P.size());
  for (const auto& s : set) R.insert(P.index_of(s));
  if (R.empty()) throw Error(ErrorCode::precondition, "regeneration set must be nonempty");
  SuiteReport r = start(model, "fit-minorization", config);
  const auto fit = stage("fit minorization", [&] { return harris::fit_minorization(P, R, ell); });
  const harris::HarrisModel fitted(P, R, fit.lambda, fit.epsilon, ell);
  r.values["epsilon"] = {fit.epsilon};
  r.values["lambda"] = to_vector(fit.lambda);
  r.values["ell"] = {static_cast<double>(ell)};
  for (Index x : R.members()) r.values["regeneration_set"].push_back(static_cast<double>(x));
  r.add(make_check("minorization", harris::minorization_residual(fitted), -harris::kMinorizationTolerance,
                   Relation::at_least));
  r.add(make_check("maximality", std::abs(harris::max_epsilon(P, R, ell, fit.lambda) - fit.epsilon),
                   config.tolerance));
  r.add(make_check("mixture_identity", harris::mixture_identity_residual(fitted), config.tolerance));
  return r;
}

SuiteReport harris_report(const io::LoadedModel& model, const RunConfig& config) {
  config.validate();
  SuiteReport r = start(model, "harris", config);
  if (const auto* H = std::get_if<harris::HarrisModel>(&model.model)) {
    harris_suite(*H, model.fitted, config, r);
  } else if (const auto* P = std::get_if<StochasticMatrix>(&model.model)) {
    r.notes["model"] = "atom at the lowest recurrent state";
    harris_suite(stage("atom model", [&] { return atom_model(*P); }), std::nullopt, config, r);
  } else {
    throw Error(ErrorCode::unsupported_operation, "harris needs a markov_chain or harris_discrete model");
  }
  return r;
}

}  // namespace cycleflow::suite
