#include "acklab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acklab {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a.value(), b.value());
}

}  // namespace

// ---------------------------------------------------------------------------

Parameter& ParameterSet::add(std::string name, Matrix value) {
  if (index_.count(name)) throw Error("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return *params_[it->second];
}

bool ParameterSet::contains(const std::string& name) const { return index_.count(name) > 0; }

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<Matrix> ParameterSet::values() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::set_values(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw Error("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

// ---------------------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.leaf = true;
  n.requires_grad = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  if (consumed_) throw Error("tape already consumed by backward()");
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(const Var& v, const Matrix& grad) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = grad;
  } else {
    n.grad += grad;
  }
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_.at(id);
  if (consumed_ && n.value.size() == 0 && !n.leaf) throw Error("value released after backward()");
  return n.value;
}

GradientMap Tape::backward(const Var& loss) {
  if (consumed_) throw Error("backward() called twice on the same tape");
  if (nodes_.empty()) throw Error("backward() on an empty tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_string(loss.value()));

  GradientMap grads;
  if (nodes_[loss.id()].requires_grad) {
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(n.value, n.grad, *this);
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.leaf || !n.requires_grad) continue;
    Matrix g = n.grad.size() ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols());
    if (n.param) n.param->grad += g;
    grads.emplace(static_cast<int>(i), std::move(g));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    n.backward = nullptr;
    n.grad.resize(0, 0);
    if (!n.leaf && static_cast<int>(i) != loss.id()) n.value.resize(0, 0);
  }
  consumed_ = true;
  return grads;
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.value(), b.value());
  Tape& t = a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b](const Matrix&, const Matrix& g, Tape& tape) {
    if (a.requires_grad()) tape.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](const Matrix&, const Matrix& g, Tape& tape) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](const Matrix&, const Matrix& g, Tape& tape) {
    tape.accumulate(a, g);
    tape.accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Matrix&, const Matrix& g, Tape& tape) {
    if (a.requires_grad()) tape.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) tape.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double factor) {
  return a.tape().record(a.value() * factor, {a},
                         [a, factor](const Matrix&, const Matrix& g, Tape& tape) { tape.accumulate(a, g * factor); });
}

Var add_row(const Var& m, const Var& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) shape_mismatch("add_row", m.value(), row.value());
  Matrix out = m.value().rowwise() + row.value().row(0);
  return m.tape().record(std::move(out), {m, row}, [m, row](const Matrix&, const Matrix& g, Tape& tape) {
    tape.accumulate(m, g);
    if (row.requires_grad()) tape.accumulate(row, g.colwise().sum());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_mismatch("concat", parts[0].value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](const Matrix&, const Matrix& g, Tape& tape) {
    Eigen::Index c = 0;
    for (const Var& p : inputs) {
      if (p.requires_grad()) tape.accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) shape_mismatch("concat", parts[0].value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](const Matrix&, const Matrix& g, Tape& tape) {
    Eigen::Index r = 0;
    for (const Var& p : inputs) {
      if (p.requires_grad()) tape.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var tanh(const Var& a) {
  return a.tape().record(a.value().array().tanh().matrix(), {a},
                         [a](const Matrix& y, const Matrix& g, Tape& tape) {
                           tape.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
                         });
}

Var sigmoid(const Var& a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().record(std::move(y), {a}, [a](const Matrix& y, const Matrix& g, Tape& tape) {
    tape.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluK = 0.044715;
}  // namespace

Var gelu(const Var& a) {
  const auto x = a.value().array();
  Matrix y = (0.5 * x * (1.0 + (kGeluC * (x + kGeluK * x.cube())).tanh())).matrix();
  return a.tape().record(std::move(y), {a}, [a](const Matrix&, const Matrix& g, Tape& tape) {
    const auto x = a.value().array();
    const Eigen::ArrayXXd t = (kGeluC * (x + kGeluK * x.cube())).tanh();
    const Eigen::ArrayXXd d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluK * x.square());
    tape.accumulate(a, (g.array() * d).matrix());
  });
}

Var transpose(const Var& a) {
  return a.tape().record(a.value().transpose(), {a}, [a](const Matrix&, const Matrix& g, Tape& tape) {
    tape.accumulate(a, g.transpose());
  });
}

namespace {

Matrix softmax_rows(const Matrix& x) {
  Matrix y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp().matrix();
  Vector norm = y.rowwise().sum();
  return norm.asDiagonal().inverse() * y;
}

}  // namespace

Var softmax(const Var& a) {
  return a.tape().record(softmax_rows(a.value()), {a}, [a](const Matrix& y, const Matrix& g, Tape& tape) {
    Vector dot = g.cwiseProduct(y).rowwise().sum();
    tape.accumulate(a, y.cwiseProduct(g.colwise() - dot));
  });
}

Var logsumexp(const Var& a) {
  if (a.value().size() == 0) throw ShapeError("logsumexp: empty input");
  const double m = a.value().maxCoeff();
  const double lse = m + std::log((a.value().array() - m).exp().sum());
  Matrix out(1, 1);
  out(0, 0) = lse;
  return a.tape().record(std::move(out), {a}, [a](const Matrix& y, const Matrix& g, Tape& tape) {
    tape.accumulate(a, ((a.value().array() - y(0, 0)).exp() * g(0, 0)).matrix());
  });
}

Var lookup(const Var& table, std::span<const int> rows) {
  const Eigen::Index n = table.rows();
  Matrix out(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n)
      throw ShapeError("lookup: index " + std::to_string(rows[i]) + " out of range for table with " +
                       std::to_string(n) + " rows");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return table.tape().record(std::move(out), {table}, [table, idx](const Matrix&, const Matrix& g, Tape& tape) {
    Matrix d = Matrix::Zero(table.rows(), table.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    tape.accumulate(table, d);
  });
}

Var slice(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index nrows, Eigen::Index ncols) {
  if (row < 0 || col < 0 || nrows < 0 || ncols < 0 || row + nrows > a.rows() || col + ncols > a.cols()) {
    Matrix want(nrows < 0 ? 0 : nrows, ncols < 0 ? 0 : ncols);
    throw ShapeError("slice: block at (" + std::to_string(row) + "," + std::to_string(col) + ") of shape " +
                     shape_string(want) + " exceeds " + shape_string(a.value()));
  }
  return a.tape().record(a.value().block(row, col, nrows, ncols), {a},
                         [a, row, col](const Matrix&, const Matrix& g, Tape& tape) {
                           Matrix d = Matrix::Zero(a.rows(), a.cols());
                           d.block(row, col, g.rows(), g.cols()) = g;
                           tape.accumulate(a, d);
                         });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [a](const Matrix&, const Matrix& g, Tape& tape) {
    tape.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) shape_mismatch("layer_norm", x.value(), gain.value());
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_mismatch("layer_norm", x.value(), bias.value());
  const Matrix& v = x.value();
  const double c = static_cast<double>(v.cols());
  Vector mean = v.rowwise().sum() / c;
  Matrix centered = v.colwise() - mean;
  Vector inv_std = ((centered.array().square().rowwise().sum() / c) + eps).rsqrt().matrix();
  Matrix xhat = inv_std.asDiagonal() * centered;
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape().record(std::move(out), {x, gain, bias},
                         [x, gain, bias, xhat, inv_std](const Matrix&, const Matrix& g, Tape& tape) {
                           const double c = static_cast<double>(g.cols());
                           if (gain.requires_grad()) tape.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
                           if (bias.requires_grad()) tape.accumulate(bias, g.colwise().sum());
                           if (x.requires_grad()) {
                             Matrix dxhat = (g.array().rowwise() * gain.value().row(0).array()).matrix();
                             Vector m1 = dxhat.rowwise().sum() / c;
                             Vector m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / c;
                             Matrix dx = dxhat.colwise() - m1;
                             dx -= m2.asDiagonal() * xhat;
                             tape.accumulate(x, inv_std.asDiagonal() * dx);
                           }
                         });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_string(logits.value()));
  const Matrix& z = logits.value();
  Matrix probs = softmax_rows(z);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    if (t >= z.cols())
      throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range for " + std::to_string(z.cols()) +
                       " classes");
    const double m = z.row(r).maxCoeff();
    loss += m + std::log((z.row(r).array() - m).exp().sum()) - z(r, t);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> tg(targets.begin(), targets.end());
  return logits.tape().record(std::move(out), {logits},
                              [logits, probs, tg](const Matrix&, const Matrix& g, Tape& tape) {
                                Matrix d = probs;
                                for (Eigen::Index r = 0; r < d.rows(); ++r) {
                                  const int t = tg[static_cast<std::size_t>(r)];
                                  if (t < 0) {
                                    d.row(r).setZero();
                                  } else {
                                    d(r, t) -= 1.0;
                                  }
                                }
                                tape.accumulate(logits, d * g(0, 0));
                              });
}

// ---------------------------------------------------------------------------

const char* primitive_name(Primitive kind) {
  switch (kind) {
    case Primitive::Matmul: return "matmul";
    case Primitive::Add: return "add";
    case Primitive::Mul: return "mul";
    case Primitive::Concat: return "concat";
    case Primitive::Tanh: return "tanh";
    case Primitive::Sigmoid: return "sigmoid";
    case Primitive::Softmax: return "softmax";
    case Primitive::Logsumexp: return "logsumexp";
    case Primitive::Lookup: return "lookup";
    case Primitive::Slice: return "slice";
  }
  return "?";
}

Var apply_primitive(Primitive kind, std::span<const Var> inputs, const PrimitiveArgs& args) {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n)
      throw ShapeError(std::string(primitive_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(inputs.size()));
  };
  switch (kind) {
    case Primitive::Matmul: arity(2); return matmul(inputs[0], inputs[1]);
    case Primitive::Add: arity(2); return add(inputs[0], inputs[1]);
    case Primitive::Mul: arity(2); return mul(inputs[0], inputs[1]);
    case Primitive::Concat: return concat_cols(inputs);
    case Primitive::Tanh: arity(1); return tanh(inputs[0]);
    case Primitive::Sigmoid: arity(1); return sigmoid(inputs[0]);
    case Primitive::Softmax: arity(1); return softmax(inputs[0]);
    case Primitive::Logsumexp: arity(1); return logsumexp(inputs[0]);
    case Primitive::Lookup: arity(1); return lookup(inputs[0], args.indices);
    case Primitive::Slice: arity(1); return slice(inputs[0], args.row, args.col, args.nrows, args.ncols);
  }
  throw ShapeError("unknown primitive");
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace acklab
