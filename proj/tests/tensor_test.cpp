#include "acklab/grad_check.hpp"
#include "acklab/optimizer.hpp"
#include "acklab/tensor.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace acklab;
using acklab::testing::random_matrix;

namespace {

// Central differences of a scalar function of one matrix, written without the tape.
Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x, double eps = 1e-4) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + eps;
    const double up = f(x);
    x.data()[i] = keep - eps;
    const double down = f(x);
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * eps);
  }
  return g;
}

double rel_error(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data()[i] - b.data()[i]);
    worst = std::max(worst, d / std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-8}));
  }
  return worst;
}

}  // namespace

TEST_CASE("logsumexp of two zeros is ln 2") {
  Tape t;
  Var x = t.constant(Matrix::Zero(1, 2));
  CHECK(logsumexp(x).scalar() == doctest::Approx(0.693147).epsilon(1e-6));
}

TEST_CASE("matmul by identity returns the matrix") {
  std::mt19937_64 rng(3);
  const Matrix m = random_matrix(rng, 3, 4);
  Tape t;
  Var out = apply_primitive(Primitive::Matmul, std::vector<Var>{t.constant(Matrix::Identity(3, 3)), t.constant(m)});
  CHECK(out.value().isApprox(m, 0.0));
}

TEST_CASE("softmax of equal entries is uniform") {
  Tape t;
  Var s = softmax(t.constant(Matrix::Ones(1, 3)));
  for (int j = 0; j < 3; ++j) CHECK(s.value()(0, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("gradient of sum is ones") {
  Tape t;
  Var x = t.variable(Matrix::Constant(2, 2, 0.3));
  GradientMap g = t.backward(sum(x));
  CHECK(g.at(x.id()).isApprox(Matrix::Ones(2, 2)));
}

TEST_CASE("gradient of tanh at 0.5") {
  Tape t;
  Var x = t.variable(Matrix::Constant(1, 1, 0.5));
  GradientMap g = t.backward(tanh(x));
  // 1 - tanh(0.5)^2, frozen.
  CHECK(g.at(x.id())(0, 0) == doctest::Approx(0.786448).epsilon(1e-6));
  const Matrix fd = numeric_gradient([](const Matrix& m) { return std::tanh(m(0, 0)); }, Matrix::Constant(1, 1, 0.5));
  CHECK(std::abs(fd(0, 0) - g.at(x.id())(0, 0)) < 1e-8);
}

TEST_CASE("gradient of logsumexp is softmax") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix v = random_matrix(rng, 1, 5);
    Tape t;
    Var x = t.variable(v);
    GradientMap g = t.backward(logsumexp(x));
    const Matrix fd = numeric_gradient(
        [](const Matrix& m) {
          const double mx = m.maxCoeff();
          return mx + std::log((m.array() - mx).exp().sum());
        },
        v);
    CHECK(rel_error(g.at(x.id()), fd) < 1e-6);
    const Matrix e = (v.array() - v.maxCoeff()).exp();
    CHECK(g.at(x.id()).isApprox(e / e.sum(), 1e-12));
  }
}

TEST_CASE("logsumexp bounds") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = acklab::testing::uniform_int(rng, 1, 8);
    const Matrix v = random_matrix(rng, 1, n, -50, 50);
    Tape t;
    const double l = logsumexp(t.constant(v)).scalar();
    CHECK(l >= v.maxCoeff());
    CHECK(l <= v.maxCoeff() + std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST_CASE("every primitive matches central differences") {
  std::mt19937_64 rng(21);
  auto check = [&](Primitive kind, std::vector<std::pair<int, int>> shapes, PrimitiveArgs args = {}) {
    for (int trial = 0; trial < 100; ++trial) {
      ParameterSet ps;
      std::vector<Parameter*> params;
      for (std::size_t i = 0; i < shapes.size(); ++i)
        params.push_back(&ps.add("p" + std::to_string(i), random_matrix(rng, shapes[i].first, shapes[i].second)));
      // A fixed random projection turns any output into a scalar.
      const std::size_t seed = trial;
      LossFn loss = [&, seed](Tape& t) {
        std::vector<Var> in;
        for (Parameter* p : params) in.push_back(t.param(*p));
        Var out = apply_primitive(kind, in, args);
        std::mt19937_64 wr(seed);
        return sum(mul(out, t.constant(random_matrix(wr, out.rows(), out.cols()))));
      };
      const double err = grad_check(loss, params);
      if (err >= 1e-4) FAIL(primitive_name(kind) << " error " << err);
    }
  };
  check(Primitive::Matmul, {{2, 3}, {3, 4}});
  check(Primitive::Add, {{2, 3}, {2, 3}});
  check(Primitive::Mul, {{2, 3}, {2, 3}});
  check(Primitive::Concat, {{2, 3}, {2, 2}});
  check(Primitive::Tanh, {{3, 3}});
  check(Primitive::Sigmoid, {{3, 3}});
  check(Primitive::Softmax, {{2, 4}});
  check(Primitive::Logsumexp, {{1, 5}});
  PrimitiveArgs lk;
  lk.indices = {2, 0, 2, 1};
  check(Primitive::Lookup, {{3, 4}}, lk);
  PrimitiveArgs sl;
  sl.row = 1;
  sl.col = 1;
  sl.nrows = 2;
  sl.ncols = 2;
  check(Primitive::Slice, {{3, 4}}, sl);
}

TEST_CASE("composite ops match central differences") {
  std::mt19937_64 rng(31);
  ParameterSet ps;
  Parameter& x = ps.add("x", random_matrix(rng, 3, 4));
  Parameter& g = ps.add("g", random_matrix(rng, 1, 4));
  Parameter& b = ps.add("b", random_matrix(rng, 1, 4));
  std::vector<Parameter*> params{&x, &g, &b};
  const std::vector<int> targets{1, -1, 3};
  LossFn loss = [&](Tape& t) {
    Var h = layer_norm(t.param(x), t.param(g), t.param(b));
    h = gelu(add_row(h, t.param(b)));
    h = sub(h, scale(transpose(transpose(t.param(x))), 0.5));
    Var rows = concat_rows(std::vector<Var>{h, slice(h, 0, 0, 1, 4)});
    return add(cross_entropy(slice(rows, 0, 0, 3, 4), targets), sum(rows));
  };
  CHECK(grad_check(loss, params) < 1e-4);
}

TEST_CASE("grad_check on trivial functions") {
  ParameterSet ps;
  Parameter& x = ps.add("x", Matrix::Constant(1, 1, 3.0));
  std::vector<Parameter*> params{&x};
  GradCheckResult r = grad_check_detailed([&](Tape& t) {
    Var v = t.param(x);
    return scale(mul(v, v), 0.5);
  }, params);
  CHECK(r.max_relative_error < 1e-8);
  CHECK(x.grad(0, 0) == doctest::Approx(3.0));
  const double err = grad_check([&](Tape& t) { return t.constant(Matrix::Constant(1, 1, 2.0)); }, params);
  CHECK(err == 0.0);
}

TEST_CASE("tape errors") {
  Tape t;
  Var a = t.variable(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(add(a, t.constant(Matrix::Ones(2, 3))), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);
  Var l = sum(tanh(a));
  Var mid = tanh(a);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), Error);
  CHECK_THROWS_AS(mid.value(), Error);
}

TEST_CASE("sgd step") {
  ParameterSet ps;
  Parameter& p = ps.add("p", Matrix::Constant(1, 1, 1.0));
  p.grad(0, 0) = 2.0;
  OptimizerConfig cfg;
  cfg.clip_norm.reset();
  std::vector<Parameter*> params{&p};
  optimizer_step(params, cfg, make_scheduler(cfg));
  CHECK(p.value(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("plateau annealing halves the rate once patience is exceeded") {
  OptimizerConfig cfg = OptimizerConfig::crf_default();
  SchedulerState s = make_scheduler(cfg);
  CHECK(s.learning_rate == doctest::Approx(0.1));
  s = report_dev_score(cfg, s, 0.5);
  for (int i = 0; i < cfg.patience; ++i) s = report_dev_score(cfg, s, 0.4);
  CHECK(s.learning_rate == doctest::Approx(0.1));
  s = report_dev_score(cfg, s, 0.4);
  CHECK(s.learning_rate == doctest::Approx(0.05));
}

TEST_CASE("gradient clipping to unit norm") {
  ParameterSet ps;
  Parameter& p = ps.add("p", Matrix::Zero(1, 2));
  p.grad << 3.0, 4.0;
  OptimizerConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.clip_norm = 1.0;
  std::vector<Parameter*> params{&p};
  optimizer_step(params, cfg, make_scheduler(cfg));
  CHECK(p.value(0, 0) == doctest::Approx(-0.6));
  CHECK(p.value(0, 1) == doctest::Approx(-0.8));
}

TEST_CASE("adaptive moments is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(5);
    ParameterSet ps;
    Parameter& w = ps.add("w", xavier_uniform(4, 3, rng));
    const Matrix x = random_matrix(rng, 5, 4);
    OptimizerConfig cfg = OptimizerConfig::finetune_default();
    cfg.total_steps = 20;
    cfg.warmup_fraction = 0.1;
    SchedulerState s = make_scheduler(cfg);
    std::vector<Parameter*> params{&w};
    for (int step = 0; step < 20; ++step) {
      ps.zero_grad();
      Tape t;
      t.backward(sum(tanh(matmul(t.constant(x), t.param(w)))));
      s = optimizer_step(params, cfg, s);
    }
    return w.value;
  };
  const Matrix a = run();
  const Matrix b = run();
  CHECK(a == b);
}

TEST_CASE("warmup then linear decay") {
  OptimizerConfig cfg = OptimizerConfig::finetune_default();
  cfg.learning_rate = 1.0;
  cfg.total_steps = 10;
  cfg.warmup_fraction = 0.2;
  SchedulerState s = make_scheduler(cfg);
  std::vector<double> rates;
  for (std::size_t i = 0; i < 10; ++i) {
    s.step = i;
    rates.push_back(effective_learning_rate(cfg, s));
  }
  CHECK(rates[0] < rates[1]);
  CHECK(rates[1] == doctest::Approx(1.0));
  CHECK(rates[2] == doctest::Approx(1.0));
  for (std::size_t i = 3; i < rates.size(); ++i) CHECK(rates[i] < rates[i - 1]);
}
