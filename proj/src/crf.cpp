#include "acklab/crf.hpp"

#include <cmath>

namespace acklab::crf {

namespace {

std::size_t path_count(Eigen::Index k, Eigen::Index n) {
  std::size_t total = 1;
  for (Eigen::Index t = 0; t < n; ++t) {
    total *= static_cast<std::size_t>(k);
    if (total > 1000000)
      throw Error("crf: brute force over " + std::to_string(k) + "^" + std::to_string(n) +
                  " paths exceeds the 10^6 limit");
  }
  return total;
}

// Calls f(tags) for every path in lexicographic order.
template <typename F>
void for_each_path(Eigen::Index k, Eigen::Index n, F&& f) {
  path_count(k, n);
  std::vector<int> tags(static_cast<std::size_t>(n), 0);
  while (true) {
    f(tags);
    Eigen::Index pos = n - 1;
    while (pos >= 0 && tags[static_cast<std::size_t>(pos)] == k - 1) tags[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) return;
    ++tags[static_cast<std::size_t>(pos)];
  }
}

}  // namespace

Marginals marginals(const Matrix& e, const Matrix& tr) {
  const Eigen::Index n = e.rows(), k = e.cols();
  check_shapes(tr, k);
  const Eigen::Index S = start_index(k), E = stop_index(k);
  Marginals m;
  m.unary = Matrix::Zero(n, k);
  m.pairwise = Matrix::Zero(k + 2, k + 2);
  if (n == 0) {
    m.log_z = tr(S, E);
    m.pairwise(S, E) = 1.0;
    return m;
  }
  const auto tags = tr.topLeftCorner(k, k);
  Matrix alpha(n, k), beta(n, k);
  alpha.row(0) = tr.row(S).head(k) + e.row(0);
  for (Eigen::Index t = 1; t < n; ++t)
    for (Eigen::Index j = 0; j < k; ++j)
      alpha(t, j) = detail::logsumexp(alpha.row(t - 1).transpose() + tags.col(j)) + e(t, j);
  beta.row(n - 1) = tr.col(E).head(k).transpose();
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const RowVector ahead = e.row(t + 1) + beta.row(t + 1);
    for (Eigen::Index i = 0; i < k; ++i) beta(t, i) = detail::logsumexp(tags.row(i) + ahead);
  }
  m.log_z = detail::logsumexp((alpha.row(n - 1) + beta.row(n - 1)).transpose());
  m.unary = (alpha + beta).array() - m.log_z;
  m.unary = m.unary.array().exp();
  for (Eigen::Index t = 1; t < n; ++t)
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        m.pairwise(i, j) += std::exp(alpha(t - 1, i) + tags(i, j) + e(t, j) + beta(t, j) - m.log_z);
  m.pairwise.row(S).head(k) = m.unary.row(0);
  m.pairwise.col(E).head(k) = m.unary.row(n - 1).transpose();
  return m;
}

double brute_force_partition(const Matrix& emissions, const Matrix& transitions) {
  const Eigen::Index n = emissions.rows(), k = emissions.cols();
  check_shapes(transitions, k);
  std::vector<double> scores;
  scores.reserve(path_count(k, n));
  for_each_path(k, n, [&](const std::vector<int>& tags) { scores.push_back(path_score(emissions, transitions, tags)); });
  return detail::logsumexp(Eigen::Map<const Vector>(scores.data(), static_cast<Eigen::Index>(scores.size())));
}

Decoded brute_force_best(const Matrix& emissions, const Matrix& transitions) {
  const Eigen::Index n = emissions.rows(), k = emissions.cols();
  check_shapes(transitions, k);
  Decoded best;
  bool first = true;
  for_each_path(k, n, [&](const std::vector<int>& tags) {
    const double s = path_score(emissions, transitions, tags);
    if (first || s > best.score) {
      best.score = s;
      best.tags = tags;
      first = false;
    }
  });
  return best;
}

Var nll(const Var& emissions, const Var& transitions, const std::vector<int>& gold) {
  const Matrix& e = emissions.value();
  const Matrix& tr = transitions.value();
  const Eigen::Index k = e.cols();
  check_shapes(tr, k);
  const double gold_score = path_score(e, tr, gold);
  Marginals m = marginals(e, tr);
  Matrix out(1, 1);
  out(0, 0) = m.log_z - gold_score;

  Matrix de = std::move(m.unary);
  Matrix dt = std::move(m.pairwise);
  const Eigen::Index n = e.rows();
  if (n == 0) {
    dt(start_index(k), stop_index(k)) -= 1.0;
  } else {
    dt(start_index(k), gold.front()) -= 1.0;
    dt(gold.back(), stop_index(k)) -= 1.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      de(t, gold[static_cast<std::size_t>(t)]) -= 1.0;
      if (t > 0) dt(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1.0;
    }
  }
  return emissions.tape().record(std::move(out), {emissions, transitions},
                                 [emissions, transitions, de = std::move(de), dt = std::move(dt)](
                                     const Matrix&, const Matrix& g, Tape& tape) {
                                   if (emissions.requires_grad()) tape.accumulate(emissions, de * g(0, 0));
                                   if (transitions.requires_grad()) tape.accumulate(transitions, dt * g(0, 0));
                                 });
}

}  // namespace acklab::crf
