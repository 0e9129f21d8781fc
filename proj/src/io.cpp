#include "cycleflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cycleflow/error.hpp"

namespace cycleflow::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& field, const std::string& what) {
  throw LoadError(code, field, what);
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  fail(ErrorCode::invariant_violation, field, what);
}

const json& member(const json& doc, const char* key) {
  if (!doc.contains(key)) invalid(std::string("/") + key, "required field missing");
  return doc.at(key);
}

double number_at(const json& v, const std::string& field) {
  if (!v.is_number()) invalid(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) invalid(field, "expected a finite number");
  return x;
}

long long integer_at(const json& v, const std::string& field) {
  if (!v.is_number_integer()) invalid(field, "expected an integer");
  return v.get<long long>();
}

const json& array_at(const json& v, const std::string& field) {
  if (!v.is_array()) invalid(field, "expected an array");
  return v;
}

std::vector<std::string> labels(const json& v, const std::string& field) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < array_at(v, field).size(); ++i) {
    const json& e = v[i];
    out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
  }
  return out;
}

/// Square matrix with rows summing to 1 within 1e-9, renormalized.
markov::StochasticMatrix stochastic_matrix(const json& rows, const std::string& field,
                                           std::vector<std::string> states) {
  const std::size_t n = array_at(rows, field).size();
  if (n == 0) invalid(field, "matrix is empty");
  if (!states.empty() && states.size() != n)
    invalid(field, "matrix has " + std::to_string(n) + " rows but there are " +
                       std::to_string(states.size()) + " states");
  Eigen::MatrixXd P(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::string row_field = field + "/" + std::to_string(i);
    const json& row = array_at(rows[i], row_field);
    if (row.size() != n) invalid(row_field, "row length differs from the number of rows");
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = number_at(row[j], row_field + "/" + std::to_string(j));
      if (p < 0.0) invalid(row_field + "/" + std::to_string(j), "negative transition probability");
      P(static_cast<Index>(i), static_cast<Index>(j)) = p;
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "row " << i << " sums to " << sum << ", expected 1";
      invalid(row_field, msg.str());
    }
  }
  return markov::StochasticMatrix::renormalized(std::move(P), std::move(states), 1e-9);
}

template <class Scalar>
FiniteSystem<Scalar> build_system(std::vector<std::string> points, std::vector<Index> map,
                                  Vector<Scalar> weights, bool invertible) {
  try {
    FiniteSystem<Scalar> sys(std::move(points), std::move(map), std::move(weights), invertible);
    const auto check = check_preserving(sys);
    if (!check.preserving)
      invalid("/weights", "weights are not invariant under the map (max violation " +
                              report::format_double(to_double(check.max_violation)) + ")");
    return sys;
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    invalid("/map", e.what());
  }
}

LoadedModel load_finite_system(const json& doc, report::ModelInfo info) {
  const json& map_json = array_at(member(doc, "map"), "/map");
  const std::size_t m = map_json.size();
  std::vector<std::string> points = labels(member(doc, "points"), "/points");
  if (points.size() != m) invalid("/points", "points and map differ in length");
  std::vector<Index> map;
  for (std::size_t i = 0; i < m; ++i) {
    const long long t = integer_at(map_json[i], "/map/" + std::to_string(i));
    if (t < 0 || t >= static_cast<long long>(m))
      invalid("/map/" + std::to_string(i), "map entry out of range");
    map.push_back(static_cast<Index>(t));
  }
  const json& inv = member(doc, "invertible");
  if (!inv.is_boolean()) invalid("/invertible", "expected a boolean");
  const bool invertible = inv.get<bool>();
  if (invertible && !is_permutation(map)) invalid("/map", "map flagged invertible is not a bijection");

  const json& w = member(doc, "weights");
  if (w.is_object()) {
    const json& num = array_at(member(w, "num"), "/weights/num");
    const json& den = array_at(member(w, "den"), "/weights/den");
    if (num.size() != m || den.size() != m) invalid("/weights", "weights length must equal points length");
    Vector<Rational> weights(static_cast<Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      const long long p = integer_at(num[i], "/weights/num/" + std::to_string(i));
      const long long q = integer_at(den[i], "/weights/den/" + std::to_string(i));
      if (q <= 0) invalid("/weights/den/" + std::to_string(i), "denominator must be positive");
      if (p < 0) invalid("/weights/num/" + std::to_string(i), "weight must be nonnegative");
      weights[static_cast<Index>(i)] = Rational(p, q);
    }
    return {info, build_system<Rational>(std::move(points), std::move(map), std::move(weights), invertible), {}};
  }
  const json& arr = array_at(w, "/weights");
  if (arr.size() != m) invalid("/weights", "weights length must equal points length");
  Vector<double> weights(static_cast<Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double x = number_at(arr[i], "/weights/" + std::to_string(i));
    if (x < 0) invalid("/weights/" + std::to_string(i), "weight must be nonnegative");
    weights[static_cast<Index>(i)] = x;
  }
  return {info, build_system<double>(std::move(points), std::move(map), std::move(weights), invertible), {}};
}

LoadedModel load_chain(const json& doc, report::ModelInfo info) {
  auto states = labels(member(doc, "states"), "/states");
  return {info, stochastic_matrix(member(doc, "P"), "/P", std::move(states)), {}};
}

LoadedModel load_harris(const json& doc, report::ModelInfo info) {
  auto states = labels(member(doc, "states"), "/states");
  auto K = stochastic_matrix(member(doc, "K"), "/K", std::move(states));
  const Index n = K.size();

  const json& r_json = array_at(member(doc, "R"), "/R");
  EventSet R(n);
  for (std::size_t k = 0; k < r_json.size(); ++k) {
    const long long x = integer_at(r_json[k], "/R/" + std::to_string(k));
    if (x < 0 || x >= n) invalid("/R/" + std::to_string(k), "state index out of range");
    R.insert(static_cast<Index>(x));
  }
  if (R.empty()) invalid("/R", "regeneration set must be nonempty");
  const long long ell = integer_at(member(doc, "ell"), "/ell");
  if (ell < 1) invalid("/ell", "ell must be at least 1");

  std::optional<double> epsilon;
  std::optional<Eigen::VectorXd> lambda;
  if (doc.contains("epsilon") && !doc.at("epsilon").is_null()) epsilon = number_at(doc.at("epsilon"), "/epsilon");
  if (doc.contains("lambda") && !doc.at("lambda").is_null()) {
    const json& l = array_at(doc.at("lambda"), "/lambda");
    if (static_cast<Index>(l.size()) != n) invalid("/lambda", "lambda length must equal the number of states");
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = number_at(l[static_cast<std::size_t>(i)], "/lambda/" + std::to_string(i));
    lambda = v;
  }

  std::optional<harris::MinorizationFit> fitted;
  try {
    if (!lambda) {
      auto fit = harris::fit_minorization(K, R, static_cast<int>(ell));
      lambda = fit.lambda;
      if (!epsilon) epsilon = fit.epsilon;
      fitted = fit;
    } else if (!epsilon) {
      epsilon = harris::max_epsilon(K, R, static_cast<int>(ell), *lambda);
      fitted = harris::MinorizationFit{*epsilon, *lambda};
    }
  } catch (const Error& e) {
    invalid("/R", e.what());
  }

  try {
    harris::HarrisModel model(std::move(K), R, *lambda, *epsilon, static_cast<int>(ell));
    if (harris::minorization_residual(model) < -harris::kMinorizationTolerance)
      invalid("/epsilon", "minorization K^ell(x,.) >= epsilon lambda fails on R (residual " +
                              report::format_double(harris::minorization_residual(model)) + ")");
    const auto cond = harris::harris_conditions(model);
    if (!cond.recurrent)
      invalid("/R", "regeneration set is not reached almost surely from every state (min hitting probability " +
                        report::format_double(cond.hit_prob_min) + ")");
    return {info, std::move(model), fitted};
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    invalid("/epsilon", e.what());
  }
}

}  // namespace

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LoadedModel parse_model(std::string_view text, std::string name) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse, "", e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::parse, "", "top-level JSON value must be an object");
  if (!doc.contains("kind") || !doc.at("kind").is_string())
    fail(ErrorCode::unknown_kind, "/kind", "missing model kind");
  const std::string kind = doc.at("kind").get<std::string>();

  report::ModelInfo info{kind, std::move(name), content_hash(text)};
  try {
    if (kind == "finite_system") return load_finite_system(doc, info);
    if (kind == "markov_chain") return load_chain(doc, info);
    if (kind == "harris_discrete") return load_harris(doc, info);
  } catch (const LoadError&) {
    throw;
  } catch (const json::exception& e) {
    invalid("", e.what());
  } catch (const Error& e) {
    invalid("", e.what());
  }
  fail(ErrorCode::unknown_kind, "/kind", "unknown model kind '" + kind + "'");
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "", "cannot read model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), path.stem().string());
}

}  // namespace cycleflow::io
