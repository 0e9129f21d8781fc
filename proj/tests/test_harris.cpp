#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <map>

#include "cycleflow/error.hpp"
#include "cycleflow/harris.hpp"

#include "support/oracles.hpp"

using namespace cycleflow;
using namespace cycleflow::harris;

namespace {

Eigen::MatrixXd h3_matrix() {
  Eigen::MatrixXd K(3, 3);
  K << 0.5, 0.5, 0.0, 0.2, 0.5, 0.3, 0.1, 0.4, 0.5;
  return K;
}

StochasticMatrix h3() { return StochasticMatrix(h3_matrix()); }

Eigen::VectorXd v(std::initializer_list<double> xs) {
  Eigen::VectorXd out(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

EventSet R3(std::initializer_list<Index> xs) { return EventSet::of(3, xs); }

HarrisModel variant_atom() { return HarrisModel(h3(), R3({0}), v({0.5, 0.5, 0.0}), 1.0, 1); }
HarrisModel variant_pair() { return HarrisModel(h3(), R3({0, 1}), v({2.0 / 7.0, 5.0 / 7.0, 0.0}), 0.7, 1); }
HarrisModel variant_two_step() {
  const Eigen::VectorXd k2 = (h3_matrix() * h3_matrix()).row(0).transpose();
  return HarrisModel(h3(), R3({0}), k2, 0.5, 2);
}

Eigen::VectorXd h3_exact() { return v({13.0 / 53.0, 25.0 / 53.0, 15.0 / 53.0}); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::io;
}

double inf_norm(const Eigen::VectorXd& x) { return x.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("stationary law of H3 from two independent oracles") {
  CHECK(inf_norm(oracle::left_eigenvector(h3_matrix()) - h3_exact()) <= 1e-12);
  CHECK(inf_norm(oracle::stationary_solve(h3_matrix()) - h3_exact()) <= 1e-12);
}

TEST_CASE("model construction checks ranges") {
  CHECK(code_of([] { HarrisModel(h3(), R3({0}), v({0.5, 0.5, 0}), 0.0, 1); }) == ErrorCode::invalid_model);
  CHECK(code_of([] { HarrisModel(h3(), R3({0}), v({0.5, 0.5, 0}), 1.5, 1); }) == ErrorCode::invalid_model);
  CHECK(code_of([] { HarrisModel(h3(), R3({0}), v({0.5, 0.5, 0}), 1.0, 0); }) == ErrorCode::invalid_model);
  CHECK(code_of([] { HarrisModel(h3(), R3({0}), v({0.5, 0.6, 0}), 1.0, 1); }) == ErrorCode::invalid_model);
  CHECK(code_of([] { HarrisModel(h3(), R3({0}), v({1.5, -0.5, 0}), 1.0, 1); }) == ErrorCode::invalid_model);
  CHECK(code_of([] { HarrisModel(h3(), R3({}), v({0.5, 0.5, 0}), 1.0, 1); }) == ErrorCode::precondition);
  const auto m = variant_two_step();
  CHECK(m.k_ell().isApprox(h3_matrix() * h3_matrix()));
  CHECK(m.power(0).isIdentity());
}

TEST_CASE("fitted minorization") {
  const auto a = fit_minorization(h3(), R3({0}), 1);
  CHECK(a.epsilon == 1.0);
  CHECK(inf_norm(a.lambda - v({0.5, 0.5, 0.0})) <= 1e-12);

  const auto b = fit_minorization(h3(), R3({0, 1}), 1);
  CHECK(std::abs(b.epsilon - 0.7) <= 1e-12);
  CHECK(inf_norm(b.lambda - v({2.0 / 7.0, 5.0 / 7.0, 0.0})) <= 1e-12);

  const auto c = fit_minorization(h3(), R3({0}), 2);
  CHECK(std::abs(c.epsilon - 1.0) <= 1e-12);
  CHECK(inf_norm(c.lambda - v({0.35, 0.5, 0.15})) <= 1e-12);

  // The fitted epsilon is the largest feasible one for its lambda.
  CHECK(std::abs(max_epsilon(h3(), R3({0, 1}), 1, b.lambda) - b.epsilon) <= 1e-12);

  Eigen::MatrixXd flip(2, 2);
  flip << 0, 1, 1, 0;
  CHECK(code_of([&] { fit_minorization(StochasticMatrix(flip), EventSet::all(2), 1); }) == ErrorCode::invalid_model);
}

TEST_CASE("minorization residual") {
  CHECK(minorization_residual(variant_atom()) == 0.0);
  CHECK(std::abs(minorization_residual(variant_pair())) <= 1e-12);
  const HarrisModel too_big(h3(), R3({0, 1}), v({2.0 / 7.0, 5.0 / 7.0, 0.0}), 0.8, 1);
  // Binding entry: K(0, 1) - 0.8 * 5/7 = 0.5 - 4/7.
  CHECK(std::abs(minorization_residual(too_big) - (-1.0 / 14.0)) <= 1e-12);
  CHECK(minorization_residual(too_big) < -kMinorizationTolerance);
}

TEST_CASE("Harris conditions") {
  const auto c = harris_conditions(variant_atom());
  CHECK(c.hit_prob_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.recurrent);
  CHECK(c.positive);
  // E_x t_R by a direct linear solve: h = 1 + K h off R, t_R >= 1 everywhere.
  const Eigen::MatrixXd K = h3_matrix();
  Eigen::Matrix2d A;
  A << 1 - K(1, 1), -K(1, 2), -K(2, 1), 1 - K(2, 2);
  const Eigen::Vector2d h = A.lu().solve(Eigen::Vector2d::Ones());
  CHECK(std::abs(c.expected_hitting_time[1] - h[0]) <= 1e-12);
  CHECK(std::abs(c.expected_hitting_time[2] - h[1]) <= 1e-12);
  CHECK(std::abs(c.expected_hitting_time[0] - (1 + K(0, 1) * h[0] + K(0, 2) * h[1])) <= 1e-12);
  CHECK(std::abs(c.expected_lambda_return - (0.5 * c.expected_hitting_time[0] + 0.5 * c.expected_hitting_time[1])) <= 1e-12);
  // Kac on the atom: E_0 t_0 = 1 / pi(0).
  CHECK(std::abs(c.expected_hitting_time[0] - 53.0 / 13.0) <= 1e-12);

  Eigen::MatrixXd blocky = Eigen::MatrixXd::Zero(4, 4);
  blocky << 0.5, 0.5, 0, 0, 0.5, 0.5, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0;
  const HarrisModel split(StochasticMatrix(blocky), EventSet::of(4, {0}), v({0.5, 0.5, 0, 0}), 1.0, 1);
  const auto s = harris_conditions(split);
  CHECK(s.hit_prob_min < 1.0);
  CHECK_FALSE(s.recurrent);
  CHECK(s.hit_probability[2] == 0.0);
  CHECK(std::isinf(s.expected_hitting_time[3]));
  CHECK(s.positive);

  const HarrisModel everything(h3(), EventSet::all(3), v({1.0 / 3, 1.0 / 3, 1.0 / 3}), 0.1, 1);
  const auto e = harris_conditions(everything);
  CHECK(e.hit_prob_min == 1.0);
  CHECK(e.expected_lambda_return == 1.0);
}

TEST_CASE("bridge law") {
  const auto one = variant_atom();
  const auto g1 = bridge_distribution(one, 0, 1);
  CHECK(g1.intermediate_steps() == 0);
  const auto paths = g1.enumerate();
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].first.empty());
  CHECK(paths[0].second == 1.0);
  CHECK(code_of([&] { bridge_distribution(one, 0, 2); }) == ErrorCode::precondition);

  const auto two = variant_two_step();
  const auto to2 = bridge_distribution(two, 0, 2).enumerate();
  REQUIRE(to2.size() == 1);
  CHECK(to2[0].first == std::vector<Index>{1});
  CHECK(std::abs(to2[0].second - 1.0) <= 1e-12);

  const auto g = bridge_distribution(two, 0, 0);
  CHECK(inf_norm(g.step_distribution(0, 1) - v({0.25 / 0.35, 0.10 / 0.35, 0.0})) <= 1e-12);
  const std::vector<Index> p0{0}, p1{1};
  CHECK(std::abs(g.probability(p0) - 0.25 / 0.35) <= 1e-12);
  CHECK(std::abs(g.probability(p1) - 0.10 / 0.35) <= 1e-12);
}

TEST_CASE("bridge masses sum to one for longer blocks") {
  for (int ell = 1; ell <= 5; ++ell) {
    const auto fit = fit_minorization(h3(), R3({0, 2}), ell);
    const HarrisModel m(h3(), R3({0, 2}), fit.lambda, fit.epsilon, ell);
    for (Index x : {0, 2})
      for (Index y = 0; y < 3; ++y) {
        if (!(m.k_ell()(x, y) > 0)) continue;
        double total = 0;
        for (const auto& [path, p] : bridge_distribution(m, x, y).enumerate()) total += p;
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
  }
}

TEST_CASE("bridge sampler matches the enumerated law") {
  const HarrisModel m(h3(), R3({0}), fit_minorization(h3(), R3({0}), 3).lambda, 1.0, 3);
  const auto g = bridge_distribution(m, 0, 0);
  const auto law = g.enumerate();
  std::map<std::vector<Index>, Index> slot;
  Eigen::VectorXd probs(static_cast<Index>(law.size()));
  for (std::size_t k = 0; k < law.size(); ++k) {
    slot[law[k].first] = static_cast<Index>(k);
    probs[static_cast<Index>(k)] = law[k].second;
  }
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(probs.size());
  Stream rng(9, 0);
  for (int i = 0; i < 20000; ++i) counts[slot.at(g.sample(rng))] += 1;
  CHECK(chi_square_gof(counts, probs).p_value >= 1e-3);
}

TEST_CASE("residual kernel and mixture identity") {
  const auto two = variant_two_step();
  // Residual of a proportional lambda is K^2 itself.
  CHECK(inf_norm(residual_kernel(two, 0) - two.k_ell().row(0).transpose()) <= 1e-12);
  const auto pair = variant_pair();
  CHECK(inf_norm(residual_kernel(pair, 0) - v({1, 0, 0})) <= 1e-12);
  CHECK(inf_norm(residual_kernel(pair, 1) - v({0, 0, 1})) <= 1e-12);
  for (const auto& m : {variant_atom(), variant_pair(), variant_two_step()})
    CHECK(mixture_identity_residual(m) <= 1e-12);

  const HarrisModel too_big(h3(), R3({0, 1}), v({2.0 / 7.0, 5.0 / 7.0, 0.0}), 0.8, 1);
  CHECK(code_of([&] { residual_kernel(too_big, 0); }) == ErrorCode::invalid_model);
  const auto clipped = residual_kernel(too_big, 0, true);
  CHECK(clipped.minCoeff() >= 0.0);
  CHECK(std::abs(clipped.sum() - 1.0) <= 1e-12);
  CHECK(code_of([&] { residual_kernel(variant_atom(), 0); }) == ErrorCode::precondition);
  CHECK(code_of([&] { residual_kernel(pair, 2); }) == ErrorCode::precondition);
}

TEST_CASE("split block branches") {
  Stream rng(3, 1);
  const auto atom = variant_atom();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 20000; ++i) {
    const auto b = split_block(atom, 0, true, rng);
    REQUIRE(b.size() == 1);
    counts[b[0]] += 1;
  }
  CHECK(counts[2] == 0.0);
  CHECK(chi_square_gof(counts, v({0.5, 0.5, 0.0})).p_value >= 1e-3);

  const auto two = variant_two_step();
  counts.setZero();
  for (int i = 0; i < 20000; ++i) {
    const auto b = split_block(two, 0, false, rng);
    REQUIRE(b.size() == 2);
    counts[b[1]] += 1;
  }
  CHECK(chi_square_gof(counts, two.k_ell().row(0).transpose()).p_value >= 1e-3);

  // Outside R: two ordinary steps.
  Eigen::MatrixXd pairs = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 30000; ++i) {
    const auto b = split_block(two, 2, true, rng);
    pairs(b[0], b[1]) += 1;
  }
  const Eigen::MatrixXd K = h3_matrix();
  Eigen::VectorXd flat(9), probs(9);
  for (Index a = 0; a < 3; ++a)
    for (Index c = 0; c < 3; ++c) {
      flat[3 * a + c] = pairs(a, c);
      probs[3 * a + c] = K(2, a) * K(a, c);
    }
  CHECK(chi_square_gof(flat, probs).p_value >= 1e-3);

  CHECK(code_of([&] { split_block(atom, 0, false, rng); }) == ErrorCode::precondition);
}

TEST_CASE("split chain on the atom regenerates one step after each visit") {
  const auto run = simulate_split_chain(variant_atom(), 2000, 11);
  CHECK(run.regeneration_times.size() == 2000);
  std::vector<Index> expected;
  for (std::size_t t = 0; t + 1 < run.path.size(); ++t)
    if (run.path[t].x == 0) expected.push_back(static_cast<Index>(t + 1));
  CHECK(expected == run.regeneration_times);
  CHECK(run.cycles.n_cycles() == 2000);
  CHECK(run.cycles.total_length() == run.regeneration_times.back());
  CHECK(run.cycles.length(0) == run.regeneration_times.front());
}

TEST_CASE("deterministic alternation") {
  Eigen::MatrixXd flip(2, 2);
  flip << 0, 1, 1, 0;
  const HarrisModel m(StochasticMatrix(flip), EventSet::of(2, {0}), v({0, 1}), 1.0, 1);
  const auto run = simulate_split_chain(m, 50, 2);
  for (Index k = 0; k < run.cycles.n_cycles(); ++k) CHECK(run.cycles.length(k) == 2);
  const auto est = regen_ratio_estimator(run.cycles);
  CHECK(est.pi_hat == v({0.5, 0.5}));
  CHECK(est.mean_cycle_length == 2.0);
  // X_0 ~ lambda = delta_1.
  CHECK(run.path.front().x == 1);
}

TEST_CASE("split chain is reproducible and worker-independent") {
  const auto m = variant_two_step();
  const auto a = simulate_split_chain(m, 3000, 5);
  const auto b = simulate_split_chain(m, 3000, 5);
  SplitSimulationOptions par;
  par.workers = 4;
  const auto c = simulate_split_chain(m, 3000, 5, par);
  CHECK(a.regeneration_times == b.regeneration_times);
  CHECK(a.regeneration_times == c.regeneration_times);
  REQUIRE(a.path.size() == c.path.size());
  bool same = true;
  for (std::size_t i = 0; i < a.path.size(); ++i)
    same = same && a.path[i].x == c.path[i].x && a.path[i].zeta == c.path[i].zeta;
  CHECK(same);
  CHECK(regen_ratio_estimator(a.cycles).pi_hat == regen_ratio_estimator(c.cycles).pi_hat);
  CHECK(simulate_split_chain(m, 3000, 6).regeneration_times != a.regeneration_times);
}

TEST_CASE("regeneration rules on the two-step variant") {
  const auto m = variant_two_step();
  const auto run = simulate_split_chain(m, 5000, 7);
  // Regeneration at n + ell exactly when block start n is in R with mark 1.
  std::vector<Index> expected;
  for (std::size_t n = 0; n + 1 < run.path.size(); ++n)
    if (run.block_start[n] && run.path[n].x == 0 && run.path[n].zeta) expected.push_back(static_cast<Index>(n + 2));
  CHECK(expected == run.regeneration_times);
  // Block starts are 0, ell, 2 ell, ... in every cycle.
  for (Index t : run.regeneration_times) CHECK(run.block_start[static_cast<std::size_t>(t)]);

  // X_t at regeneration follows lambda.
  Eigen::VectorXd at = Eigen::VectorXd::Zero(3);
  for (Index t : run.regeneration_times) at[run.path[static_cast<std::size_t>(t)].x] += 1;
  CHECK(chi_square_gof(at, m.lambda()).p_value >= 0.01);

  // Marks are Bernoulli(epsilon).
  double ones = 0;
  for (const auto& s : run.path) ones += s.zeta ? 1 : 0;
  const double n = static_cast<double>(run.path.size());
  CHECK(std::abs(ones / n - 0.5) <= 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("block transitions follow K^ell") {
  for (const auto& m : {variant_atom(), variant_pair(), variant_two_step()}) {
    const auto run = simulate_split_chain(m, 20000, 13);
    const Eigen::MatrixXd counts = block_transition_counts(m, run);
    for (Index x = 0; x < 3; ++x) {
      if (counts.row(x).sum() == 0) continue;
      CHECK(chi_square_gof(counts.row(x).transpose(), m.k_ell().row(x).transpose()).p_value >= 0.01 / 3);
    }
  }
}

TEST_CASE("step budget") {
  SplitSimulationOptions tight;
  tight.step_budget = 20;
  CHECK(code_of([&] { simulate_split_chain(variant_atom(), 1000, 1, tight); }) == ErrorCode::budget_exceeded);
  CHECK(code_of([&] { simulate_split_chain(variant_atom(), 0, 1); }) == ErrorCode::precondition);
}

TEST_CASE("regenerative estimates agree with the exact law") {
  for (const auto& m : {variant_atom(), variant_two_step()}) {
    const auto run = simulate_split_chain(m, 100000, 1, {10'000'000, 1, false});
    const auto est = regen_ratio_estimator(run.cycles);
    CHECK(std::abs(est.pi_hat.sum() - 1.0) <= 1e-12);
    CHECK(est.pi_hat.minCoeff() >= 0.0);
    const Eigen::VectorXd diff = est.pi_hat - h3_exact();
    for (Index a = 0; a < 3; ++a) CHECK(std::abs(diff[a]) <= 3.0 * (*est.standard_errors)[a]);
  }
}

TEST_CASE("uniqueness cross-check") {
  const std::vector<Variant> variants{{"atom", variant_atom()}, {"pair", variant_pair()}, {"two-step", variant_two_step()}};
  const auto table = uniqueness_crosscheck(variants, h3_exact(), 100000, 1);
  REQUIRE(table.pass.has_value());
  CHECK(*table.pass);
  CHECK_FALSE(table.low_sample);
  CHECK(table.rows.size() == 3);
  for (const auto& row : table.rows) CHECK(row.max_abs_z <= 4.0);

  const auto small = uniqueness_crosscheck(variants, h3_exact(), 10, 1);
  CHECK(small.low_sample);
  CHECK_FALSE(small.pass.has_value());

  Eigen::MatrixXd other = h3_matrix();
  other.row(2) << 0.2, 0.3, 0.5;
  const std::vector<Variant> mixed{{"atom", variant_atom()},
                                   {"other", HarrisModel(StochasticMatrix(other), R3({0}), v({0.5, 0.5, 0}), 1.0, 1)}};
  CHECK(code_of([&] { uniqueness_crosscheck(mixed, h3_exact(), 1000, 1); }) == ErrorCode::precondition);
}
