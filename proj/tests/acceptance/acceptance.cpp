// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cycleflow/finite_system.hpp"
#include "cycleflow/harris.hpp"
#include "cycleflow/identities.hpp"
#include "cycleflow/identity_suite.hpp"
#include "cycleflow/io.hpp"
#include "cycleflow/markov.hpp"
#include "cycleflow/regen.hpp"
#include "cycleflow/report.hpp"
#include "cycleflow/suite.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace cycleflow;
using namespace cycleflow::markov;
using namespace cycleflow::harris;

namespace {

// Tolerances and budgets, fixed here.
constexpr double kIdentityTol = 1e-12;
constexpr double kInvarianceTol = 1e-12;
constexpr double kExchangeTol = 1e-10;
constexpr double kOracleTol = 1e-10;
constexpr double kClosedFormTol = 1e-12;
constexpr double kDecompositionTol = 1e-10;
constexpr double kFitTol = 1e-12;
constexpr double kMixtureTol = 1e-12;
constexpr double kZGate = 4.0;
constexpr double kChiSquareLevel = 0.01;
constexpr double kCoherenceSe = 3.0;
constexpr Index kHarrisCycles = 100000;
constexpr std::uint64_t kSeed = 20240601;
constexpr double kExhaustiveSeconds = 60.0;
constexpr double kMarkovSeconds = 30.0;
constexpr double kHarrisSeconds = 120.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

double inf_norm(const Eigen::VectorXd& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

template <class Scalar>
Vector<Scalar> weights_of(std::initializer_list<std::pair<long, long>> fractions) {
  Vector<Scalar> w(static_cast<Index>(fractions.size()));
  Index i = 0;
  for (auto [p, q] : fractions) {
    if constexpr (std::is_same_v<Scalar, Rational>)
      w[i++] = Rational(p, q);
    else
      w[i++] = static_cast<double>(p) / static_cast<double>(q);
  }
  return w;
}

template <class Scalar>
FiniteSystem<Scalar> rot4() {
  return FiniteSystem<Scalar>({}, {1, 2, 3, 0}, weights_of<Scalar>({{1, 4}, {1, 4}, {1, 4}, {1, 4}}), true);
}

template <class Scalar>
FiniteSystem<Scalar> two2() {
  return FiniteSystem<Scalar>({}, {1, 0, 3, 2}, weights_of<Scalar>({{3, 10}, {3, 10}, {1, 5}, {1, 5}}), true);
}

Eigen::MatrixXd h3_matrix() {
  Eigen::MatrixXd K(3, 3);
  K << 0.5, 0.5, 0.0, 0.2, 0.5, 0.3, 0.1, 0.4, 0.5;
  return K;
}

Eigen::MatrixXd mc2_matrix() {
  Eigen::MatrixXd P(2, 2);
  P << 2.0 / 3.0, 1.0 / 3.0, 0.25, 0.75;
  return P;
}

// Exhaustive pair suite on every system; each must cover all 4^m pairs.
template <class Scalar>
void exhaustive_on(const std::vector<FiniteSystem<Scalar>>& systems, double tol, Outcome& out, double& worst) {
  for (std::size_t k = 0; k < systems.size(); ++k) {
    const auto& sys = systems[k];
    const auto res = run_identity_suite(sys);
    const auto m = static_cast<std::uint64_t>(sys.size());
    out.require(res.exhaustive && res.pairs == static_cast<Index>(std::uint64_t{1} << (2 * m)),
                "system " + std::to_string(k) + " not enumerated exhaustively");
    out.require(res.checks.size() == 17, "system " + std::to_string(k) + " ran " +
                                             std::to_string(res.checks.size()) + " checks");
    const double w = to_double(res.worst());
    worst = std::max(worst, w);
    if constexpr (std::is_same_v<Scalar, Rational>)
      out.require(res.worst() == Rational(0), "rational residual " + fmt(w) + " on system " + std::to_string(k));
    else
      out.require(w <= tol, "residual " + fmt(w) + " on system " + std::to_string(k));
  }
}

Outcome exhaustive_identities() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  gen::Rng rng(kSeed);
  std::vector<FiniteSystem<double>> dbl{rot4<double>(), two2<double>()};
  std::vector<FiniteSystem<Rational>> rat{rot4<Rational>(), two2<Rational>()};
  for (int k = 0; k < 22; ++k) {
    const Index m = 1 + k % 8;
    auto map = gen::random_permutation(rng, m);
    const auto w = gen::cycle_weights(rng, map, 0.2);
    dbl.push_back(gen::from_integer_weights<double>(map, w, true));
    rat.push_back(gen::from_integer_weights<Rational>(map, w, true));
  }
  double worst = 0, worst_rat = 0;
  exhaustive_on(dbl, kIdentityTol, out, worst);
  exhaustive_on(rat, 0.0, out, worst_rat);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(secs < kExhaustiveSeconds, "took " + fmt(secs) + " s");
  out.note(std::to_string(dbl.size()) + " systems x 2 arithmetics, worst double residual " + fmt(worst) +
           ", rational " + fmt(worst_rat) + ", " + fmt(secs) + " s");
  return out;
}

Outcome endomorphism_poincare() {
  Outcome out;
  std::vector<FiniteSystem<double>> systems{
      FiniteSystem<double>({}, {1, 0, 0}, v({0.5, 0.5, 0.0}), false)};
  gen::Rng rng(kSeed + 1);
  for (int k = 0; k < 50; ++k) systems.push_back(gen::random_endomorphism<double>(rng, gen::uniform_int(rng, 1, 32)));
  double worst = 0;
  Index sets = 0;
  for (const auto& sys : systems) {
    out.require(check_preserving(sys).preserving, "generated system not preserving");
    const Index m = sys.size();
    // Every B for small m, 64 random ones otherwise.
    const bool all = m <= 10;
    const Index count = all ? (Index{1} << m) : 64;
    for (Index k = 0; k < count; ++k) {
      const auto mask = all ? static_cast<std::uint64_t>(k) : (rng() & ((std::uint64_t{1} << m) - 1));
      const double r = poincare_residual(sys, EventSet::from_mask(m, mask)).forward;
      worst = std::max(worst, r);
      ++sets;
    }
  }
  out.require(worst <= kIdentityTol, "forward residual " + fmt(worst));

  // Image invariance of nu_B fails without injectivity.
  const FiniteSystem<double> endo2({}, {0, 0}, v({1.0, 0.0}), false);
  const auto nu = cycle_measure(endo2, EventSet::of(2, {0}), CycleKind::nu);
  const EventSet A = EventSet::of(2, {1});
  out.require(nu(endo2.image(A)) == 1.0 && nu(A) == 0.0, "two-point counterexample: nu(image A) = " +
                                                              fmt(nu(endo2.image(A))) + ", nu(A) = " + fmt(nu(A)));
  out.note(std::to_string(systems.size()) + " systems, " + std::to_string(sets) + " base sets, worst " + fmt(worst) +
           "; counterexample 1 != 0");
  return out;
}

Outcome markov_uniqueness() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  gen::Rng rng(kSeed + 2);
  double inv = 0, exch = 0, eig = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = gen::uniform_int(rng, 2, 30);
    const StochasticMatrix P(gen::random_irreducible(rng, n, gen::uniform(rng) * 0.6));
    const Eigen::VectorXd oracle_pi = oracle::left_eigenvector(P.matrix());
    std::vector<Eigen::VectorXd> pis;
    for (Index b = 0; b < n; ++b) {
      pis.push_back(cycle_stationary(P, b).pi);
      inv = std::max(inv, invariance_residual(P, pis.back()));
      eig = std::max(eig, inf_norm(pis.back() - oracle_pi));
    }
    for (Index b = 0; b < n; ++b)
      for (Index c = b + 1; c < n; ++c) exch = std::max(exch, inf_norm(pis[b] - pis[c]));
  }
  out.require(inv <= kInvarianceTol, "invariance " + fmt(inv));
  out.require(exch <= kExchangeTol, "exchange " + fmt(exch));
  out.require(eig <= kOracleTol, "eigenvector oracle " + fmt(eig));

  const StochasticMatrix mc2(mc2_matrix());
  const auto o = cycle_occupation(mc2, 0);
  const double pi_err = inf_norm(o.nu / o.mean_return - v({3.0 / 7.0, 4.0 / 7.0}));
  const double ret_err = std::abs(o.mean_return - 7.0 / 3.0);
  out.require(pi_err <= kClosedFormTol, "two-state law off by " + fmt(pi_err));
  out.require(ret_err <= kClosedFormTol, "two-state mean return off by " + fmt(ret_err));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(secs < kMarkovSeconds, "took " + fmt(secs) + " s");
  out.note("invariance " + fmt(inv) + ", exchange " + fmt(exch) + ", oracle " + fmt(eig) + ", closed form " +
           fmt(std::max(pi_err, ret_err)) + ", " + fmt(secs) + " s");
  return out;
}

Outcome reducible_decomposition() {
  Outcome out;
  gen::Rng rng(kSeed + 3);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto chain = gen::random_reducible(rng, gen::uniform_int(rng, 2, 4), 8, gen::uniform_int(rng, 0, 6));
    const StochasticMatrix P(chain.P);
    Eigen::VectorXd w(static_cast<Index>(chain.classes.size()));
    for (Index k = 0; k < w.size(); ++k) w[k] = 0.05 + gen::uniform(rng);
    w /= w.sum();
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(chain.P.rows());
    for (std::size_t k = 0; k < chain.classes.size(); ++k)
      pi += w[static_cast<Index>(k)] * cycle_stationary(P, chain.classes[k].front()).pi;
    const auto d = convex_decomposition(P, pi);
    out.require(d.representatives.size() == chain.classes.size(), "class count mismatch in trial " +
                                                                      std::to_string(trial));
    worst = std::max(worst, d.residual);
  }
  out.require(worst <= kDecompositionTol, "residual " + fmt(worst));
  out.note("20 chains, worst residual " + fmt(worst));
  return out;
}

Outcome harris_splitting() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const StochasticMatrix K(h3_matrix());
  const Eigen::VectorXd k2 = (h3_matrix() * h3_matrix()).row(0).transpose();
  const Eigen::VectorXd pi_oracle = oracle::left_eigenvector(h3_matrix());

  // Fitted minorizations against their closed forms.
  struct Fit {
    EventSet R;
    int ell;
    double epsilon;
    Eigen::VectorXd lambda;
  };
  const std::vector<Fit> fits{{EventSet::of(3, {0}), 1, 1.0, v({0.5, 0.5, 0.0})},
                              {EventSet::of(3, {0, 1}), 1, 0.7, v({2.0 / 7.0, 5.0 / 7.0, 0.0})},
                              {EventSet::of(3, {0}), 2, 1.0, v({0.35, 0.5, 0.15})}};
  double fit_err = 0;
  for (const auto& f : fits) {
    const auto got = fit_minorization(K, f.R, f.ell);
    fit_err = std::max({fit_err, std::abs(got.epsilon - f.epsilon), inf_norm(got.lambda - f.lambda)});
  }
  out.require(fit_err <= kFitTol, "fit error " + fmt(fit_err));

  const std::vector<HarrisModel> variants{HarrisModel(K, EventSet::of(3, {0}), v({0.5, 0.5, 0.0}), 1.0, 1),
                                          HarrisModel(K, EventSet::of(3, {0, 1}), v({2.0 / 7.0, 5.0 / 7.0, 0.0}), 0.7, 1),
                                          HarrisModel(K, EventSet::of(3, {0}), k2, 0.5, 2)};
  double mix = 0, zmax = 0, pmin = 1;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& m = variants[i];
    mix = std::max(mix, mixture_identity_residual(m));
    const auto run = simulate_split_chain(m, kHarrisCycles, kSeed + i);
    const auto est = regen_ratio_estimator(run.cycles);
    zmax = std::max(zmax, inf_norm(z_scores(est, pi_oracle)));
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
    for (Index t : run.regeneration_times) counts[run.path[static_cast<std::size_t>(t)].x] += 1;
    pmin = std::min(pmin, chi_square_gof(counts, m.lambda()).p_value);
  }
  out.require(mix <= kMixtureTol, "mixture identity " + fmt(mix));
  out.require(zmax <= kZGate, "max |z| " + fmt(zmax));
  out.require(pmin >= kChiSquareLevel, "regeneration-state chi-square p " + fmt(pmin));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(secs < kHarrisSeconds, "took " + fmt(secs) + " s");
  out.note("fit " + fmt(fit_err) + ", mixture " + fmt(mix) + ", max |z| " + fmt(zmax) + ", min p " + fmt(pmin) +
           ", " + fmt(secs) + " s");
  return out;
}

Outcome cross_module_coherence() {
  Outcome out;
  gen::Rng rng(kSeed + 4);
  std::vector<Eigen::MatrixXd> chains{mc2_matrix(), h3_matrix()};
  for (int k = 0; k < 3; ++k) chains.push_back(gen::random_irreducible(rng, gen::uniform_int(rng, 3, 8)));
  double worst = 0;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const StochasticMatrix P(chains[i]);
    const Index r = 0;
    const Eigen::VectorXd exact = cycle_stationary(P, r).pi;
    const HarrisModel atom(P, EventSet::of(P.size(), {r}), chains[i].row(r).transpose(), 1.0, 1);
    SplitSimulationOptions opts;
    opts.record_path = false;
    const auto est = regen_ratio_estimator(simulate_split_chain(atom, kHarrisCycles, kSeed + 100 + i, opts).cycles);
    worst = std::max(worst, inf_norm(z_scores(est, exact)));
  }
  out.require(worst <= kCoherenceSe, "max |z| " + fmt(worst));
  out.note(std::to_string(chains.size()) + " chains, max |pi_hat - pi| / SE = " + fmt(worst));
  return out;
}

Outcome determinism() {
  Outcome out;
  const std::vector<std::string> models{
      R"({"kind": "finite_system", "points": [0, 1, 2, 3], "map": [1, 2, 3, 0], "invertible": true,
          "weights": [0.25, 0.25, 0.25, 0.25]})",
      R"({"kind": "markov_chain", "states": ["s0", "s1"], "P": [[0.6666666666666666, 0.3333333333333333], [0.25, 0.75]]})",
      R"({"kind": "harris_discrete", "states": [0, 1, 2], "K": [[0.5, 0.5, 0.0], [0.2, 0.5, 0.3], [0.1, 0.4, 0.5]],
          "R": [0], "ell": 2, "epsilon": 0.5, "lambda": [0.35, 0.5, 0.15]})"};
  for (const auto& text : models) {
    const auto model = io::parse_model(text);
    suite::RunConfig one;
    one.seed = kSeed;
    one.cycles = 20000;
    suite::RunConfig many = one;
    many.workers = 4;
    const auto a = report::to_json(suite::run_suite(model, one));
    const auto b = report::to_json(suite::run_suite(io::parse_model(text), one));
    const auto c = report::to_json(suite::run_suite(model, many));
    out.require(a == b, model.info.kind + " differs between runs");
    out.require(a == c, model.info.kind + " differs across worker counts");
  }
  out.note("3 model kinds, repeated runs and 1 vs 4 workers");
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"exhaustive_identity_suite", exhaustive_identities},
      {"endomorphism_poincare", endomorphism_poincare},
      {"markov_uniqueness", markov_uniqueness},
      {"reducible_decomposition", reducible_decomposition},
      {"harris_splitting", harris_splitting},
      {"cross_module_coherence", cross_module_coherence},
      {"determinism", determinism},
  };
  bool all = true;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
