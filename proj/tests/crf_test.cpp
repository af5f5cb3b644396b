#include "acklab/crf.hpp"
#include "acklab/grad_check.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace acklab;
using acklab::testing::random_matrix;
using acklab::testing::uniform_int;

namespace {

// Enumerates every tag path directly from the score definition.
struct Enumerated {
  double log_z = 0.0;
  double best = -INFINITY;
  std::vector<int> best_path;
  int best_count = 0;
};

Enumerated enumerate(const Matrix& e, const Matrix& t) {
  const int n = static_cast<int>(e.rows()), k = static_cast<int>(e.cols());
  const int start = k, stop = k + 1;
  std::vector<double> scores;
  std::vector<int> path(n, 0);
  Enumerated out;
  while (true) {
    double s = n == 0 ? t(start, stop) : t(start, path[0]) + t(path[n - 1], stop);
    for (int i = 0; i < n; ++i) {
      s += e(i, path[i]);
      if (i > 0) s += t(path[i - 1], path[i]);
    }
    scores.push_back(s);
    if (s > out.best + 1e-12) {
      out.best = s;
      out.best_path = path;
      out.best_count = 1;
    } else if (std::abs(s - out.best) <= 1e-12) {
      ++out.best_count;
    }
    int i = n - 1;
    while (i >= 0 && path[i] == k - 1) path[i--] = 0;
    if (i < 0) break;
    ++path[i];
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - m);
  out.log_z = m + std::log(acc);
  return out;
}

Matrix fixed_emissions() {
  Matrix e(3, 2);
  e << 0.5, -1.0, 1.5, 0.2, -0.3, 0.7;
  return e;
}

Matrix fixed_transitions() {
  Matrix t = Matrix::Zero(4, 4);
  t(0, 0) = 0.1;
  t(0, 1) = -0.4;
  t(1, 0) = 0.3;
  t(1, 1) = 0.2;
  t(2, 0) = 0.25;
  t(2, 1) = -0.5;
  t(0, 3) = 0.05;
  t(1, 3) = -0.15;
  return t;
}

}  // namespace

TEST_CASE("two positions, two tags, zero scores: log Z = ln 4") {
  CHECK(crf::log_partition(Matrix::Zero(2, 2), Matrix::Zero(4, 4)) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("single position reduces to logsumexp of the emissions") {
  Matrix e(1, 3);
  e << 0.3, -1.2, 2.0;
  const double expected = std::log(std::exp(0.3) + std::exp(-1.2) + std::exp(2.0));
  CHECK(crf::log_partition(e, Matrix::Zero(5, 5)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fixed instance against frozen enumeration values") {
  const Matrix e = fixed_emissions(), t = fixed_transitions();
  CHECK(std::abs(crf::log_partition(e, t) - 3.4171919569084444) < 1e-12);
  const crf::Decoded d = crf::viterbi(e, t);
  CHECK(d.tags == std::vector<int>{0, 0, 1});
  CHECK(std::abs(d.score - 2.5) < 1e-12);
  CHECK(std::abs(crf::path_score(e, t, {0, 0, 1}) - 2.5) < 1e-12);
}

TEST_CASE("viterbi examples") {
  Matrix e(2, 2);
  e << 1, 0, 0, 1;
  const crf::Decoded d = crf::viterbi(e, Matrix::Zero(4, 4));
  CHECK(d.tags == std::vector<int>{0, 1});
  CHECK(d.score == doctest::Approx(2.0));
  CHECK(crf::viterbi(Matrix::Zero(2, 2), Matrix::Zero(4, 4)).tags == std::vector<int>{0, 0});
  CHECK(crf::viterbi(Matrix::Zero(3, 4), Matrix::Zero(6, 6)).tags == std::vector<int>{0, 0, 0});
}

TEST_CASE("empty sequence") {
  Matrix t = Matrix::Zero(4, 4);
  t(2, 3) = 0.7;
  CHECK(crf::log_partition(Matrix::Zero(0, 2), t) == doctest::Approx(0.7));
  CHECK(crf::viterbi(Matrix::Zero(0, 2), t).tags.empty());
}

TEST_CASE("shape and inventory errors") {
  CHECK_THROWS_AS(crf::log_partition(Matrix::Zero(2, 2), Matrix::Zero(3, 3)), ShapeError);
  CHECK_THROWS_AS(crf::path_score(Matrix::Zero(2, 2), Matrix::Zero(4, 4), {0, 2}), Error);
  CHECK_THROWS_AS(crf::brute_force_partition(Matrix::Zero(21, 2), Matrix::Zero(4, 4)), Error);
}

TEST_CASE("random instances agree with enumeration") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = uniform_int(rng, 1, 5), k = uniform_int(rng, 1, 4);
    const Matrix e = random_matrix(rng, n, k), t = random_matrix(rng, k + 2, k + 2);
    const Enumerated ref = enumerate(e, t);
    CHECK(std::abs(crf::log_partition(e, t) - ref.log_z) < 1e-8);
    CHECK(std::abs(crf::brute_force_partition(e, t) - ref.log_z) < 1e-8);
    const crf::Decoded d = crf::viterbi(e, t);
    CHECK(std::abs(d.score - ref.best) < 1e-9);
    CHECK(std::abs(crf::path_score(e, t, d.tags) - d.score) < 1e-9);
    if (ref.best_count == 1) CHECK(d.tags == ref.best_path);
  }
}

TEST_CASE("marginals sum to one and match enumeration") {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = uniform_int(rng, 1, 4), k = uniform_int(rng, 1, 3);
    const Matrix e = random_matrix(rng, n, k), t = random_matrix(rng, k + 2, k + 2);
    const crf::Marginals m = crf::marginals(e, t);
    for (int i = 0; i < n; ++i) CHECK(m.unary.row(i).sum() == doctest::Approx(1.0));
    // P(y_0 = 0) by enumeration of the remaining positions.
    const double lz = enumerate(e, t).log_z;
    double p0 = 0.0;
    std::vector<int> path(n, 0);
    while (true) {
      if (path[0] == 0) p0 += std::exp(crf::path_score(e, t, path) - lz);
      int i = n - 1;
      while (i >= 0 && path[i] == k - 1) path[i--] = 0;
      if (i < 0) break;
      ++path[i];
    }
    CHECK(m.unary(0, 0) == doctest::Approx(p0).epsilon(1e-9));
  }
}

TEST_CASE("nll examples and non-negativity") {
  auto loss = [](const Matrix& e, const Matrix& t, const std::vector<int>& gold) {
    Tape tape;
    return crf::nll(tape.constant(e), tape.constant(t), gold).scalar();
  };
  std::mt19937_64 rng(103);
  const Matrix e1 = random_matrix(rng, 4, 1);
  CHECK(std::abs(loss(e1, random_matrix(rng, 3, 3), {0, 0, 0, 0})) < 1e-12);
  CHECK(loss(Matrix::Zero(2, 2), Matrix::Zero(4, 4), {1, 0}) == doctest::Approx(std::log(4.0)));
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 5), k = uniform_int(rng, 2, 4);
    std::vector<int> gold(n);
    for (int& g : gold) g = uniform_int(rng, 0, k - 1);
    CHECK(loss(random_matrix(rng, n, k), random_matrix(rng, k + 2, k + 2), gold) >= -1e-9);
  }
  Tape tape;
  CHECK_THROWS_AS(crf::nll(tape.constant(Matrix::Zero(2, 2)), tape.constant(Matrix::Zero(4, 4)), {0, 5}), Error);
}

TEST_CASE("nll gradient on a three-token sentence") {
  std::mt19937_64 rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = uniform_int(rng, 2, 4);
    ParameterSet ps;
    Parameter& e = ps.add("e", random_matrix(rng, 3, k));
    Parameter& t = ps.add("t", random_matrix(rng, k + 2, k + 2));
    std::vector<int> gold{uniform_int(rng, 0, k - 1), uniform_int(rng, 0, k - 1), uniform_int(rng, 0, k - 1)};
    std::vector<Parameter*> params{&e, &t};
    const double err = grad_check([&](Tape& tape) { return crf::nll(tape.param(e), tape.param(t), gold); }, params);
    CHECK(err < 1e-4);
  }
}
