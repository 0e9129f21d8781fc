#include "cycleflow/harris.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/LU>

#include "cycleflow/error.hpp"

namespace cycleflow::harris {

namespace {

std::vector<Eigen::MatrixXd> matrix_powers(const Eigen::MatrixXd& K, int ell) {
  std::vector<Eigen::MatrixXd> powers;
  powers.push_back(Eigen::MatrixXd::Identity(K.rows(), K.cols()));
  for (int k = 1; k <= ell; ++k) powers.push_back(powers.back() * K);
  return powers;
}

void require_set(const StochasticMatrix& K, const EventSet& R) {
  if (R.universe() != K.size())
    throw Error(ErrorCode::structural, "regeneration set universe does not match the kernel");
  if (R.empty()) throw Error(ErrorCode::precondition, "regeneration set must be nonempty");
}

}  // namespace

HarrisModel::HarrisModel(StochasticMatrix kernel, EventSet regeneration_set, Eigen::VectorXd lambda,
                         double epsilon, int ell)
    : kernel_(std::move(kernel)), R_(std::move(regeneration_set)), lambda_(std::move(lambda)),
      epsilon_(epsilon), ell_(ell) {
  require_set(kernel_, R_);
  if (ell_ < 1) throw Error(ErrorCode::invalid_model, "ell must be at least 1");
  if (!(epsilon_ > 0.0 && epsilon_ <= 1.0))
    throw Error(ErrorCode::invalid_model, "epsilon must lie in (0, 1]");
  if (lambda_.size() != kernel_.size())
    throw Error(ErrorCode::invalid_model, "lambda has the wrong length");
  if (!lambda_.allFinite() || (lambda_.array() < 0.0).any())
    throw Error(ErrorCode::invalid_model, "lambda must be nonnegative");
  if (std::abs(lambda_.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::invalid_model, "lambda must sum to 1");
  lambda_ /= lambda_.sum();
  powers_ = matrix_powers(kernel_.matrix(), ell_);
  cumulative_.resize(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < size(); ++j) cumulative_[static_cast<std::size_t>(i)].push_back(acc += kernel_(i, j));
  }
}

MinorizationFit fit_minorization(const StochasticMatrix& K, const EventSet& R, int ell) {
  require_set(K, R);
  if (ell < 1) throw Error(ErrorCode::precondition, "ell must be at least 1");
  const Eigen::MatrixXd Kl = matrix_powers(K.matrix(), ell).back();
  Eigen::VectorXd minima = Eigen::VectorXd::Constant(K.size(), std::numeric_limits<double>::infinity());
  for (Index x : R.members()) minima = minima.cwiseMin(Kl.row(x).transpose());
  const double total = minima.sum();
  if (!(total > 0.0))
    throw Error(ErrorCode::invalid_model,
                "infeasible minorization: no common mass across the regeneration set at this ell");
  MinorizationFit fit;
  fit.lambda = minima / total;
  fit.epsilon = total >= 1.0 - 1e-12 ? 1.0 : total;
  return fit;
}

double max_epsilon(const StochasticMatrix& K, const EventSet& R, int ell, const Eigen::VectorXd& lambda) {
  require_set(K, R);
  const Eigen::MatrixXd Kl = matrix_powers(K.matrix(), ell).back();
  double eps = 1.0;
  for (Index x : R.members())
    for (Index y = 0; y < K.size(); ++y)
      if (lambda[y] > 0.0) eps = std::min(eps, Kl(x, y) / lambda[y]);
  return eps;
}

double minorization_residual(const HarrisModel& model) {
  double worst = std::numeric_limits<double>::infinity();
  for (Index x : model.regeneration_set().members())
    for (Index y = 0; y < model.size(); ++y)
      worst = std::min(worst, model.k_ell()(x, y) - model.epsilon() * model.lambda()[y]);
  return worst;
}

Eigen::VectorXd residual_kernel(const HarrisModel& model, Index x, bool allow_clipping) {
  if (!model.in_regeneration_set(x))
    throw Error(ErrorCode::precondition, "residual kernel is defined on the regeneration set only");
  if (model.epsilon() >= 1.0)
    throw Error(ErrorCode::precondition, "residual kernel undefined when epsilon = 1");
  Eigen::VectorXd r = model.k_ell().row(x).transpose() - model.epsilon() * model.lambda();
  for (Index y = 0; y < r.size(); ++y) {
    if (r[y] >= 0.0) continue;
    if (r[y] < -kMinorizationTolerance && !allow_clipping)
      throw Error(ErrorCode::invalid_model, "residual kernel negative at (" + std::to_string(x) + ", " +
                                                std::to_string(y) + "): minorization fails");
    r[y] = 0.0;
  }
  if (allow_clipping) return r / r.sum();
  return r / (1.0 - model.epsilon());
}

double mixture_identity_residual(const HarrisModel& model) {
  double worst = 0.0;
  for (Index x : model.regeneration_set().members()) {
    Eigen::VectorXd mix = model.epsilon() * model.lambda();
    if (model.epsilon() < 1.0) mix += (1.0 - model.epsilon()) * residual_kernel(model, x);
    worst = std::max(worst, (mix - model.k_ell().row(x).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

HarrisConditions harris_conditions(const HarrisModel& model) {
  const Index n = model.size();
  const auto& K = model.kernel().matrix();
  const EventSet& R = model.regeneration_set();

  // States outside R that can reach R; the rest hit R with probability 0.
  std::vector<bool> reaches(static_cast<std::size_t>(n), false);
  for (Index x : R.members()) reaches[static_cast<std::size_t>(x)] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (Index i = 0; i < n; ++i) {
      if (reaches[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < n; ++j)
        if (K(i, j) > 0.0 && reaches[static_cast<std::size_t>(j)]) {
          reaches[static_cast<std::size_t>(i)] = true;
          changed = true;
          break;
        }
    }
  }
  std::vector<Index> live;
  for (Index i = 0; i < n; ++i)
    if (!R.contains(i) && reaches[static_cast<std::size_t>(i)]) live.push_back(i);

  auto solve = [&](const std::vector<Index>& states, const Eigen::VectorXd& rhs) {
    const Index k = static_cast<Index>(states.size());
    Eigen::MatrixXd A(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b)
        A(a, b) = (a == b ? 1.0 : 0.0) - K(states[static_cast<std::size_t>(a)], states[static_cast<std::size_t>(b)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw Error(ErrorCode::structural, "singular hitting system");
    return Eigen::VectorXd(lu.solve(rhs));
  };

  // h = P_x(reach R in >= 0 steps) off R
  Eigen::VectorXd reach = Eigen::VectorXd::Zero(n);
  for (Index x : R.members()) reach[x] = 1.0;
  if (!live.empty()) {
    Eigen::VectorXd rhs(static_cast<Index>(live.size()));
    for (std::size_t a = 0; a < live.size(); ++a) {
      double s = 0.0;
      for (Index y : R.members()) s += K(live[a], y);
      rhs[static_cast<Index>(a)] = s;
    }
    const Eigen::VectorXd h = solve(live, rhs);
    for (std::size_t a = 0; a < live.size(); ++a) reach[live[a]] = h[static_cast<Index>(a)];
  }

  HarrisConditions out;
  out.hit_probability = K * reach;  // first step, then reach R in >= 0 steps
  out.hit_prob_min = out.hit_probability.minCoeff();
  out.recurrent = out.hit_prob_min >= 1.0 - 1e-10;

  // E_y t'_R (>= 0 steps) is finite only where R is reached almost surely.
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd to_go = Eigen::VectorXd::Constant(n, inf);
  for (Index x : R.members()) to_go[x] = 0.0;
  std::vector<Index> sure;
  for (Index i : live)
    if (reach[i] >= 1.0 - 1e-10) sure.push_back(i);
  if (!sure.empty()) {
    const Eigen::VectorXd m = solve(sure, Eigen::VectorXd::Ones(static_cast<Index>(sure.size())));
    for (std::size_t a = 0; a < sure.size(); ++a) to_go[sure[a]] = m[static_cast<Index>(a)];
  }
  out.expected_hitting_time.resize(n);
  for (Index x = 0; x < n; ++x) {
    double e = 1.0;
    for (Index y = 0; y < n; ++y)
      if (K(x, y) > 0.0) e += K(x, y) * to_go[y];
    out.expected_hitting_time[x] = e;
  }
  out.expected_lambda_return = 0.0;
  for (Index x = 0; x < n; ++x)
    if (model.lambda()[x] > 0.0) out.expected_lambda_return += model.lambda()[x] * out.expected_hitting_time[x];
  out.positive = std::isfinite(out.expected_lambda_return);
  return out;
}

BridgeLaw::BridgeLaw(const HarrisModel& model, Index x, Index y) : model_(&model), x_(x), y_(y) {
  if (x < 0 || x >= model.size() || y < 0 || y >= model.size())
    throw Error(ErrorCode::structural, "bridge endpoints out of range");
  if (!(model.k_ell()(x, y) > 0.0))
    throw Error(ErrorCode::precondition, "bridge undefined: K^ell(x, y) = 0");
}

Eigen::VectorXd BridgeLaw::step_distribution(Index previous, int j) const {
  const int ell = model_->ell();
  if (j < 1 || j > ell - 1) throw Error(ErrorCode::precondition, "bridge step index out of range");
  const double denom = model_->power(ell - j + 1)(previous, y_);
  if (!(denom > 0.0)) throw Error(ErrorCode::precondition, "bridge conditioned on a null event");
  const auto& K = model_->kernel().matrix();
  return K.row(previous).transpose().cwiseProduct(model_->power(ell - j).col(y_)) / denom;
}

double BridgeLaw::probability(std::span<const Index> path) const {
  if (static_cast<int>(path.size()) != intermediate_steps())
    throw Error(ErrorCode::precondition, "bridge path has the wrong length");
  const auto& K = model_->kernel().matrix();
  double p = 1.0;
  Index prev = x_;
  for (Index s : path) {
    p *= K(prev, s);
    prev = s;
  }
  p *= K(prev, y_);
  return p / model_->k_ell()(x_, y_);
}

std::vector<Index> BridgeLaw::sample(Stream& rng) const {
  std::vector<Index> path;
  Index prev = x_;
  for (int j = 1; j < model_->ell(); ++j) {
    prev = rng.categorical(step_distribution(prev, j));
    path.push_back(prev);
  }
  return path;
}

std::vector<std::pair<std::vector<Index>, double>> BridgeLaw::enumerate() const {
  std::vector<std::pair<std::vector<Index>, double>> out;
  std::vector<Index> path;
  const auto& K = model_->kernel().matrix();
  auto recurse = [&](auto&& self, Index prev, int j) -> void {
    if (j == model_->ell()) {
      const double p = probability(path);
      if (p > 0.0) out.emplace_back(path, p);
      return;
    }
    for (Index s = 0; s < model_->size(); ++s) {
      if (!(K(prev, s) > 0.0)) continue;
      path.push_back(s);
      self(self, s, j + 1);
      path.pop_back();
    }
  };
  recurse(recurse, x_, 1);
  return out;
}

BridgeLaw bridge_distribution(const HarrisModel& model, Index x, Index y) { return BridgeLaw(model, x, y); }

namespace {

Index one_step(const HarrisModel& model, Index x, Stream& rng) {
  return rng.from_cumulative(model.cumulative_row(x));
}

std::vector<Index> bridged_block(const HarrisModel& model, Index x, Index end, Stream& rng) {
  std::vector<Index> block = BridgeLaw(model, x, end).sample(rng);
  block.push_back(end);
  return block;
}

}  // namespace

std::vector<Index> split_block(const HarrisModel& model, Index x, bool zeta, Stream& rng) {
  if (x < 0 || x >= model.size()) throw Error(ErrorCode::structural, "state out of range");
  if (model.in_regeneration_set(x)) {
    if (zeta) return bridged_block(model, x, rng.categorical(model.lambda()), rng);
    return bridged_block(model, x, rng.categorical(residual_kernel(model, x)), rng);
  }
  std::vector<Index> block;
  for (int k = 0; k < model.ell(); ++k) block.push_back(x = one_step(model, x, rng));
  return block;
}

namespace {

struct CycleTrace {
  std::vector<SplitState> path;
  std::vector<bool> block_start;
};

/// Start state of cycle c: first draw of stream (seed, c).
Index cycle_start(const HarrisModel& model, std::uint64_t seed, Index c, Stream* out = nullptr) {
  Stream rng(seed, static_cast<std::uint64_t>(c));
  const Index x = rng.categorical(model.lambda());
  if (out) *out = rng;
  return x;
}

/// Runs cycle c; returns false when it needs more than `budget` steps.
bool run_cycle(const HarrisModel& model, const std::vector<Eigen::VectorXd>& residuals,
               std::uint64_t seed, Index c, Index budget, CycleTrace& trace) {
  Stream rng(0, 0);
  Index x = cycle_start(model, seed, c, &rng);
  const double eps = model.epsilon();
  const int ell = model.ell();
  trace.path.clear();
  trace.block_start.clear();
  while (true) {
    const bool zeta = rng.bernoulli(eps);
    trace.path.push_back({x, zeta});
    trace.block_start.push_back(true);
    std::vector<Index> block;
    bool regenerates = false;
    if (model.in_regeneration_set(x)) {
      if (zeta) {
        block = bridged_block(model, x, cycle_start(model, seed, c + 1), rng);
        regenerates = true;
      } else {
        block = bridged_block(model, x, rng.categorical(residuals[static_cast<std::size_t>(x)]), rng);
      }
    } else {
      Index y = x;
      for (int k = 0; k < ell; ++k) block.push_back(y = one_step(model, y, rng));
    }
    for (int k = 0; k + 1 < ell; ++k) {
      trace.path.push_back({block[static_cast<std::size_t>(k)], rng.bernoulli(eps)});
      trace.block_start.push_back(false);
    }
    if (regenerates) return true;
    if (static_cast<Index>(trace.path.size()) > budget) return false;
    x = block.back();
  }
}

}  // namespace

SplitChainRun simulate_split_chain(const HarrisModel& model, Index n_regens, std::uint64_t seed,
                                   const SplitSimulationOptions& options) {
  if (n_regens < 1) throw Error(ErrorCode::precondition, "n_regens must be at least 1");
  const Index n = model.size();
  std::vector<Eigen::VectorXd> residuals(static_cast<std::size_t>(n));
  if (model.epsilon() < 1.0)
    for (Index x : model.regeneration_set().members()) residuals[static_cast<std::size_t>(x)] = residual_kernel(model, x);

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(n_regens)));
  struct Part {
    CycleSample cycles;
    std::vector<CycleTrace> traces;
  };
  std::vector<Part> parts(workers, Part{CycleSample(n), {}});
  std::atomic<Index> steps_used{0};
  std::atomic<bool> over_budget{false};

  auto work = [&](unsigned w) {
    const Index begin = n_regens * w / workers;
    const Index end = n_regens * (w + 1) / workers;
    CycleTrace trace;
    std::vector<Index> states;
    for (Index c = begin; c < end && !over_budget; ++c) {
      if (!run_cycle(model, residuals, seed, c, options.step_budget, trace)) {
        over_budget = true;
        return;
      }
      const Index len = static_cast<Index>(trace.path.size());
      if (steps_used.fetch_add(len) + len > options.step_budget) {
        over_budget = true;
        return;
      }
      states.clear();
      for (const auto& s : trace.path) states.push_back(s.x);
      parts[w].cycles.append(states);
      if (options.record_path) parts[w].traces.push_back(trace);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  if (over_budget)
    throw Error(ErrorCode::budget_exceeded, "no regeneration within the step budget of " +
                                                std::to_string(options.step_budget) + " steps");

  SplitChainRun run;
  run.cycles = CycleSample(n);
  Index time = 0;
  for (auto& part : parts) {
    run.cycles.append(part.cycles);
    for (auto& trace : part.traces) {
      run.path.insert(run.path.end(), trace.path.begin(), trace.path.end());
      run.block_start.insert(run.block_start.end(), trace.block_start.begin(), trace.block_start.end());
    }
  }
  for (Index len : run.cycles.lengths()) run.regeneration_times.push_back(time += len);
  run.steps = time;
  if (options.record_path) {
    // Closing state X_{t_n}, with the mark cycle n would draw first.
    Stream rng(0, 0);
    const Index last = cycle_start(model, seed, n_regens, &rng);
    run.path.push_back({last, rng.bernoulli(model.epsilon())});
    run.block_start.push_back(true);
  }
  return run;
}

Eigen::MatrixXd block_transition_counts(const HarrisModel& model, const SplitChainRun& run) {
  const Index n = model.size();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  const std::size_t ell = static_cast<std::size_t>(model.ell());
  for (std::size_t t = 0; t + ell < run.path.size(); ++t)
    if (run.block_start[t]) counts(run.path[t].x, run.path[t + ell].x) += 1.0;
  return counts;
}

CrosscheckTable uniqueness_crosscheck(const std::vector<Variant>& variants, const Eigen::VectorXd& pi_exact,
                                      Index n_cycles, std::uint64_t seed,
                                      const SplitSimulationOptions& options, double z_threshold) {
  if (variants.empty()) throw Error(ErrorCode::precondition, "no variants given");
  const Eigen::MatrixXd& K = variants.front().model.kernel().matrix();
  for (const auto& v : variants)
    if (v.model.kernel().matrix() != K)
      throw Error(ErrorCode::precondition, "variants must share one kernel");

  CrosscheckTable table;
  table.low_sample = n_cycles < kLowSampleCycles;
  SplitSimulationOptions sim = options;
  sim.record_path = false;
  bool all = true;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto run = simulate_split_chain(variants[i].model, n_cycles, mix64(seed + i), sim);
    const RegenReport report = regen_ratio_estimator(run.cycles);
    CrosscheckRow row;
    row.label = variants[i].label;
    row.pi_hat = report.pi_hat;
    row.mean_cycle_length = report.mean_cycle_length;
    if (report.standard_errors) {
      row.standard_errors = *report.standard_errors;
      row.z = z_scores(report, pi_exact);
      row.max_abs_z = row.z.cwiseAbs().maxCoeff();
      row.pass = row.max_abs_z <= z_threshold;
    }
    all = all && row.pass;
    table.rows.push_back(std::move(row));
  }
  if (!table.low_sample) table.pass = all;
  return table;
}

}  // namespace cycleflow::harris
