#include "cycleflow/markov.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include <Eigen/LU>

#include "cycleflow/error.hpp"
#include "cycleflow/rng.hpp"

namespace cycleflow::markov {

namespace {

void validate_entries(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0 || rows.rows() != rows.cols())
    throw Error(ErrorCode::structural, "transition matrix must be square and nonempty");
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index j = 0; j < rows.cols(); ++j)
      if (!std::isfinite(rows(i, j)) || rows(i, j) < 0.0)
        throw Error(ErrorCode::structural, "P[" + std::to_string(i) + "][" + std::to_string(j) +
                                               "] must be a finite nonnegative number");
}

void check_row_sums(const Eigen::MatrixXd& rows, double tolerance) {
  for (Index i = 0; i < rows.rows(); ++i) {
    const double s = rows.row(i).sum();
    if (std::abs(s - 1.0) > tolerance)
      throw Error(ErrorCode::structural,
                  "row " + std::to_string(i) + " sums to " + std::to_string(s) + ", not 1");
  }
}

std::vector<std::string> default_names(std::vector<std::string> states, Index n) {
  if (states.empty())
    for (Index i = 0; i < n; ++i) states.push_back(std::to_string(i));
  if (static_cast<Index>(states.size()) != n)
    throw Error(ErrorCode::structural, "state list and matrix differ in size");
  return states;
}

void require_state(const StochasticMatrix& P, Index s) {
  if (s < 0 || s >= P.size())
    throw Error(ErrorCode::structural, "state index " + std::to_string(s) + " out of range");
}

}  // namespace

StochasticMatrix::StochasticMatrix(Eigen::MatrixXd rows, std::vector<std::string> states,
                                   double tolerance)
    : rows_(std::move(rows)) {
  validate_entries(rows_);
  check_row_sums(rows_, tolerance);
  states_ = default_names(std::move(states), rows_.rows());
}

StochasticMatrix StochasticMatrix::renormalized(Eigen::MatrixXd rows, std::vector<std::string> states,
                                                double tolerance) {
  validate_entries(rows);
  check_row_sums(rows, tolerance);
  for (Index i = 0; i < rows.rows(); ++i) rows.row(i) /= rows.row(i).sum();
  return StochasticMatrix(std::move(rows), std::move(states), 1e-12);
}

Index StochasticMatrix::index_of(const std::string& state) const {
  auto it = std::find(states_.begin(), states_.end(), state);
  if (it != states_.end()) return static_cast<Index>(it - states_.begin());
  try {
    std::size_t used = 0;
    const long long i = std::stoll(state, &used);
    if (used == state.size() && i >= 0 && i < size()) return static_cast<Index>(i);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::precondition, "unknown state '" + state + "'");
}

std::vector<Index> ClassStructure::recurrent_classes() const {
  std::vector<Index> out;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (kinds[c] == ClassKind::recurrent) out.push_back(static_cast<Index>(c));
  return out;
}

ClassStructure class_structure(const StochasticMatrix& P) {
  const Index n = P.size();
  std::vector<std::vector<Index>> succ(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (P(i, j) > 0.0) succ[static_cast<std::size_t>(i)].push_back(j);

  // Iterative Tarjan; components come out sinks first.
  std::vector<Index> index(n, -1), low(n, 0), stack;
  std::vector<bool> on_stack(n, false);
  std::vector<std::vector<Index>> components;
  Index counter = 0;
  struct Frame { Index v; std::size_t next; };
  for (Index root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto& out = succ[static_cast<std::size_t>(f.v)];
      if (f.next < out.size()) {
        const Index w = out[f.next++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const Index v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<Index> comp;
        Index w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
    }
  }

  // Number classes by lowest member for determinism.
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  ClassStructure cs;
  cs.class_of.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < components.size(); ++c)
    for (Index s : components[c]) cs.class_of[static_cast<std::size_t>(s)] = static_cast<Index>(c);
  cs.classes = std::move(components);
  const std::size_t k = cs.classes.size();

  std::vector<std::vector<Index>> dag(k);
  std::vector<Index> indegree(k, 0);
  cs.kinds.assign(k, ClassKind::recurrent);
  for (Index i = 0; i < n; ++i)
    for (Index j : succ[static_cast<std::size_t>(i)]) {
      const Index ci = cs.class_of[static_cast<std::size_t>(i)];
      const Index cj = cs.class_of[static_cast<std::size_t>(j)];
      if (ci == cj) continue;
      cs.kinds[static_cast<std::size_t>(ci)] = ClassKind::transient;
      dag[static_cast<std::size_t>(ci)].push_back(cj);
      ++indegree[static_cast<std::size_t>(cj)];
    }

  // Kahn's algorithm, smallest class id first.
  std::vector<Index> ready;
  for (std::size_t c = 0; c < k; ++c)
    if (indegree[c] == 0) ready.push_back(static_cast<Index>(c));
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    const Index c = *it;
    ready.erase(it);
    cs.order.push_back(c);
    for (Index d : dag[static_cast<std::size_t>(c)])
      if (--indegree[static_cast<std::size_t>(d)] == 0) ready.push_back(d);
  }
  return cs;
}

CycleOccupation cycle_occupation(const StochasticMatrix& P, Index b) {
  require_state(P, b);
  const ClassStructure cs = class_structure(P);
  if (!cs.is_recurrent_state(b))
    throw Error(ErrorCode::precondition, "state " + std::to_string(b) +
                                             " is transient: expected return time infinite or "
                                             "cycle leaves class");
  const auto& cls = cs.classes[static_cast<std::size_t>(cs.class_of[static_cast<std::size_t>(b)])];
  if (static_cast<Index>(cls.size()) > kMaxExactClassSize)
    throw Error(ErrorCode::precondition, "class too large for the exact dense solve");

  std::vector<Index> others;
  for (Index s : cls)
    if (s != b) others.push_back(s);
  const Index k = static_cast<Index>(others.size());

  CycleOccupation out;
  out.base = b;
  out.nu = Eigen::VectorXd::Zero(P.size());
  out.nu[b] = 1.0;
  if (k > 0) {
    // nu_T (I - Q) = P(b, T) with T the class minus b; solve the transpose.
    Eigen::MatrixXd system(k, k);
    Eigen::VectorXd rhs(k);
    for (Index i = 0; i < k; ++i) {
      rhs[i] = P(b, others[static_cast<std::size_t>(i)]);
      for (Index j = 0; j < k; ++j)
        system(i, j) = (i == j ? 1.0 : 0.0) -
                       P(others[static_cast<std::size_t>(j)], others[static_cast<std::size_t>(i)]);
    }
    const Eigen::VectorXd x = system.partialPivLu().solve(rhs);
    for (Index i = 0; i < k; ++i) out.nu[others[static_cast<std::size_t>(i)]] = x[i];
  }
  out.mean_return = out.nu.sum();
  return out;
}

InvariantDistribution cycle_stationary(const StochasticMatrix& P, Index b) {
  const CycleOccupation occ = cycle_occupation(P, b);
  return {occ.nu / occ.mean_return};
}

double invariance_residual(const StochasticMatrix& P, const Eigen::VectorXd& pi) {
  if (pi.size() != P.size()) throw Error(ErrorCode::structural, "distribution has the wrong size");
  return (pi.transpose() * P.matrix() - pi.transpose()).cwiseAbs().maxCoeff();
}

double exchange_residual(const StochasticMatrix& P, Index b, Index c) {
  require_state(P, b);
  require_state(P, c);
  const ClassStructure cs = class_structure(P);
  if (cs.class_of[static_cast<std::size_t>(b)] != cs.class_of[static_cast<std::size_t>(c)])
    throw Error(ErrorCode::precondition, "exchange formula needs b and c in the same class");
  return (cycle_stationary(P, b).pi - cycle_stationary(P, c).pi).cwiseAbs().maxCoeff();
}

ConvexDecomposition convex_decomposition(const StochasticMatrix& P, const Eigen::VectorXd& pi,
                                         double tolerance) {
  if (pi.size() != P.size()) throw Error(ErrorCode::structural, "distribution has the wrong size");
  if ((pi.array() < -tolerance).any())
    throw Error(ErrorCode::precondition, "distribution has negative entries");
  if (invariance_residual(P, pi) > tolerance)
    throw Error(ErrorCode::precondition, "distribution is not invariant");
  const ClassStructure cs = class_structure(P);

  ConvexDecomposition out;
  for (std::size_t c = 0; c < cs.classes.size(); ++c)
    if (cs.kinds[c] == ClassKind::transient)
      for (Index s : cs.classes[c]) out.transient_mass += pi[s];
  if (out.transient_mass > tolerance)
    throw Error(ErrorCode::precondition, "invariant distribution places mass on transient states");

  const auto recurrent = cs.recurrent_classes();
  out.weights = Eigen::VectorXd::Zero(static_cast<Index>(recurrent.size()));
  Eigen::VectorXd mixture = Eigen::VectorXd::Zero(P.size());
  for (std::size_t i = 0; i < recurrent.size(); ++i) {
    const auto& cls = cs.classes[static_cast<std::size_t>(recurrent[i])];
    double w = 0.0;
    for (Index s : cls) w += pi[s];
    out.weights[static_cast<Index>(i)] = w;
    out.representatives.push_back(cls.front());
    mixture += w * cycle_stationary(P, cls.front()).pi;
  }
  out.residual = (pi - mixture).cwiseAbs().maxCoeff();
  return out;
}

RegenReport simulate_cycle_estimator(const StochasticMatrix& P, Index b, Index n_cycles,
                                     std::uint64_t seed, const SimulationOptions& options) {
  require_state(P, b);
  if (n_cycles < 1) throw Error(ErrorCode::precondition, "n_cycles must be at least 1");
  if (!class_structure(P).is_recurrent_state(b))
    throw Error(ErrorCode::precondition, "base state is transient");

  const Index n = P.size();
  std::vector<std::vector<double>> cumulative(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& row = cumulative[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) row.push_back(acc += P(i, j));
  }

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(n_cycles)));
  std::vector<CycleSample> parts(workers, CycleSample(n));
  std::atomic<Index> steps_used{0};
  std::atomic<bool> over_budget{false};

  auto run = [&](unsigned w) {
    const Index begin = n_cycles * w / workers;
    const Index end = n_cycles * (w + 1) / workers;
    std::vector<Index> path;
    for (Index c = begin; c < end && !over_budget; ++c) {
      Stream rng(seed, static_cast<std::uint64_t>(c));
      path.clear();
      Index x = b;
      do {
        path.push_back(x);
        x = rng.from_cumulative(cumulative[static_cast<std::size_t>(x)]);
        if (static_cast<Index>(path.size()) > options.step_budget) {
          over_budget = true;
          return;
        }
      } while (x != b);
      if (steps_used.fetch_add(static_cast<Index>(path.size())) + static_cast<Index>(path.size()) >
          options.step_budget) {
        over_budget = true;
        return;
      }
      parts[w].append(path);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  if (over_budget)
    throw Error(ErrorCode::budget_exceeded, "cycle simulation exceeded the step budget");

  CycleSample all(n);
  for (const auto& p : parts) all.append(p);
  return regen_ratio_estimator(std::move(all));
}

}  // namespace cycleflow::markov
