#pragma once

// Linear-chain CRF over k tags.
//
// The transition matrix has k+2 rows and columns: tags 0..k-1, then START (k)
// and STOP (k+1). Entry (i, j) scores moving from i to j. Only START->tag,
// tag->tag and tag->STOP entries are read; the START column and STOP row are
// never used and are reported as -inf by masked_transitions().

#include "acklab/tensor.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace acklab::crf {

inline Eigen::Index start_index(Eigen::Index k) { return k; }
inline Eigen::Index stop_index(Eigen::Index k) { return k + 1; }

template <typename Derived>
void check_shapes(const Eigen::MatrixBase<Derived>& transitions, Eigen::Index k) {
  if (transitions.rows() != k + 2 || transitions.cols() != k + 2)
    throw ShapeError("crf: transitions must be [" + std::to_string(k + 2) + "x" + std::to_string(k + 2) + "], got [" +
                     std::to_string(transitions.rows()) + "x" + std::to_string(transitions.cols()) + "]");
}

// Copy with the unused START column and STOP row set to -inf.
template <typename Derived>
Matrix masked_transitions(const Eigen::MatrixBase<Derived>& transitions) {
  const Eigen::Index k = transitions.rows() - 2;
  Matrix out = transitions;
  out.col(start_index(k)).setConstant(-std::numeric_limits<double>::infinity());
  out.row(stop_index(k)).setConstant(-std::numeric_limits<double>::infinity());
  return out;
}

namespace detail {
template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}
}  // namespace detail

// Forward-algorithm log partition function. Emissions are [n x k].
template <typename DerivedE, typename DerivedT>
double log_partition(const Eigen::MatrixBase<DerivedE>& emissions, const Eigen::MatrixBase<DerivedT>& transitions) {
  const Eigen::Index n = emissions.rows(), k = emissions.cols();
  check_shapes(transitions, k);
  const auto tags = transitions.topLeftCorner(k, k);
  if (n == 0) return transitions(start_index(k), stop_index(k));
  RowVector alpha = transitions.row(start_index(k)).head(k) + emissions.row(0);
  RowVector next(k);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) next(j) = detail::logsumexp(alpha.transpose() + tags.col(j)) + emissions(t, j);
    alpha.swap(next);
  }
  return detail::logsumexp(alpha.transpose() + transitions.col(stop_index(k)).head(k));
}

template <typename DerivedE, typename DerivedT>
double path_score(const Eigen::MatrixBase<DerivedE>& emissions, const Eigen::MatrixBase<DerivedT>& transitions,
                  const std::vector<int>& tags) {
  const Eigen::Index n = emissions.rows(), k = emissions.cols();
  check_shapes(transitions, k);
  if (static_cast<Eigen::Index>(tags.size()) != n)
    throw ShapeError("crf: " + std::to_string(tags.size()) + " tags for " + std::to_string(n) + " positions");
  if (n == 0) return transitions(start_index(k), stop_index(k));
  for (int t : tags)
    if (t < 0 || t >= k) throw Error("crf: tag " + std::to_string(t) + " outside inventory of " + std::to_string(k));
  double s = transitions(start_index(k), tags[0]);
  for (Eigen::Index t = 0; t < n; ++t) {
    s += emissions(t, tags[static_cast<std::size_t>(t)]);
    if (t > 0) s += transitions(tags[static_cast<std::size_t>(t - 1)], tags[static_cast<std::size_t>(t)]);
  }
  return s + transitions(tags.back(), stop_index(k));
}

struct Decoded {
  std::vector<int> tags;
  double score = 0.0;
};

// Max-scoring path. Ties go to the lowest tag index at every backpointer and
// at the final position.
template <typename DerivedE, typename DerivedT>
Decoded viterbi(const Eigen::MatrixBase<DerivedE>& emissions, const Eigen::MatrixBase<DerivedT>& transitions) {
  const Eigen::Index n = emissions.rows(), k = emissions.cols();
  check_shapes(transitions, k);
  if (n == 0) return {{}, transitions(start_index(k), stop_index(k))};
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(n, k);
  RowVector delta = transitions.row(start_index(k)).head(k) + emissions.row(0);
  RowVector next(k);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::Index best = 0;
      double best_score = delta(0) + transitions(0, j);
      for (Eigen::Index i = 1; i < k; ++i) {
        const double s = delta(i) + transitions(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      next(j) = best_score + emissions(t, j);
      back(t, j) = static_cast<int>(best);
    }
    delta.swap(next);
  }
  Eigen::Index last = 0;
  double best_score = delta(0) + transitions(0, stop_index(k));
  for (Eigen::Index j = 1; j < k; ++j) {
    const double s = delta(j) + transitions(j, stop_index(k));
    if (s > best_score) {
      best_score = s;
      last = j;
    }
  }
  Decoded out;
  out.score = best_score;
  out.tags.resize(static_cast<std::size_t>(n));
  out.tags.back() = static_cast<int>(last);
  for (Eigen::Index t = n - 1; t > 0; --t)
    out.tags[static_cast<std::size_t>(t - 1)] = back(t, out.tags[static_cast<std::size_t>(t)]);
  return out;
}

// Per-position tag marginals [n x k] and expected transition counts
// [(k+2) x (k+2)] by forward-backward in log space.
struct Marginals {
  double log_z = 0.0;
  Matrix unary;
  Matrix pairwise;
};
Marginals marginals(const Matrix& emissions, const Matrix& transitions);

// Exhaustive references over all k^n paths; throw Error when k^n > 10^6.
double brute_force_partition(const Matrix& emissions, const Matrix& transitions);
Decoded brute_force_best(const Matrix& emissions, const Matrix& transitions);

// Negative log-likelihood of `gold` as a tape primitive, differentiable in
// both emissions and transitions. Throws Error for tags outside the inventory.
Var nll(const Var& emissions, const Var& transitions, const std::vector<int>& gold);

}  // namespace acklab::crf
