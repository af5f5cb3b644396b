#pragma once

// Dense 2-D tensors with a reverse-mode gradient tape.
//
// Values live in Eigen::MatrixXd. A Tape records primitive applications in
// creation order, which is already a topological order, so backward() walks
// the node list once from the end. Trainable state lives in Parameter objects
// owned outside the tape; a fresh tape is built for every forward pass.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace acklab {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (files, corpora, decisions). The CLI maps it to exit 2.
class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

std::string shape_string(const Matrix& m);

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Owns parameters with stable addresses; insertion order is the canonical order
// for optimizers and checkpoints.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  void zero_grad();

  // Snapshot and restore of values only, used for best-dev checkpointing.
  std::vector<Matrix> values() const;
  void set_values(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool requires_grad() const;
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using GradientMap = std::unordered_map<int, Matrix>;

class Tape {
 public:
  // Receives the node's own value and the gradient flowing into it.
  using BackwardFn = std::function<void(const Matrix& out_value, const Matrix& out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf whose gradient is reported by backward() but not stored anywhere else.
  Var variable(Matrix value);
  // Leaf bound to a parameter; backward() adds into Parameter::grad.
  Var param(Parameter& p);

  // Appends a node. The closure is kept only when some input requires grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  // Called from backward closures.
  void accumulate(const Var& v, const Matrix& grad);

  GradientMap backward(const Var& loss);

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool leaf = false;
  };
  Var push(Node node);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Elementwise binary ops require equal shapes.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// m (r x c) + row (1 x c) broadcast over rows.
Var add_row(const Var& m, const Var& row);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);
Var transpose(const Var& a);
// Row-wise softmax.
Var softmax(const Var& a);
// logsumexp over all elements, 1x1 result.
Var logsumexp(const Var& a);
// Gathers rows of table.
Var lookup(const Var& table, std::span<const int> rows);
Var slice(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index nrows, Eigen::Index ncols);
Var sum(const Var& a);
// Row-wise layer normalisation with per-column gain and bias (1 x c each).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
// Sum over rows of -log softmax(logits)[row, target[row]]. Targets < 0 are skipped.
Var cross_entropy(const Var& logits, std::span<const int> targets);

enum class Primitive { Matmul, Add, Mul, Concat, Tanh, Sigmoid, Softmax, Logsumexp, Lookup, Slice };

struct PrimitiveArgs {
  std::vector<int> indices;                 // lookup
  Eigen::Index row = 0, col = 0, nrows = 0, ncols = 0;  // slice
};

const char* primitive_name(Primitive kind);
Var apply_primitive(Primitive kind, std::span<const Var> inputs, const PrimitiveArgs& args = {});

// Seeded xavier-uniform initialisation.
Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace acklab
