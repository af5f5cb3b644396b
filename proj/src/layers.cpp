#include "acklab/layers.hpp"

#include <array>
#include <cctype>
#include <cmath>

namespace acklab {

Var Binder::operator()(Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return it->second;
  Var v = tape_.param(p);
  bound_.emplace(&p, v);
  return v;
}

// --- Linear ------------------------------------------------------------------

Linear::Linear(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out,
               std::mt19937_64& rng) {
  weight = &params.add(name + ".weight", xavier_uniform(in, out, rng));
  bias = &params.add(name + ".bias", Matrix::Zero(1, out));
}

Linear Linear::attach(ParameterSet& params, const std::string& name) {
  Linear l;
  l.weight = &params.get(name + ".weight");
  l.bias = &params.get(name + ".bias");
  return l;
}

Var Linear::operator()(Binder& b, const Var& x) const { return add_row(matmul(x, b(weight)), b(bias)); }

Matrix Linear::apply(const Matrix& x) const {
  return (x * weight->value).rowwise() + bias->value.row(0);
}

// --- LSTM ----------------------------------------------------------------------

Lstm::Lstm(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index h, std::mt19937_64& rng) {
  w_input = &params.add(name + ".w_input", xavier_uniform(in, 4 * h, rng));
  w_hidden = &params.add(name + ".w_hidden", xavier_uniform(h, 4 * h, rng));
  Matrix b = Matrix::Zero(1, 4 * h);
  b.block(0, h, 1, h).setOnes();
  bias = &params.add(name + ".bias", std::move(b));
}

Lstm Lstm::attach(ParameterSet& params, const std::string& name) {
  Lstm l;
  l.w_input = &params.get(name + ".w_input");
  l.w_hidden = &params.get(name + ".w_hidden");
  l.bias = &params.get(name + ".bias");
  return l;
}

Lstm::State Lstm::zero_state(Tape& tape, Eigen::Index batch) const {
  return {tape.constant(Matrix::Zero(batch, hidden())), tape.constant(Matrix::Zero(batch, hidden()))};
}

Lstm::State Lstm::step(Binder& b, const Var& projected, const State& prev) const {
  const Eigen::Index h = hidden(), rows = projected.rows();
  Var gates = add(projected, matmul(prev.h, b(w_hidden)));
  Var i = sigmoid(slice(gates, 0, 0, rows, h));
  Var f = sigmoid(slice(gates, 0, h, rows, h));
  Var o = sigmoid(slice(gates, 0, 2 * h, rows, h));
  Var g = tanh(slice(gates, 0, 3 * h, rows, h));
  Var c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Var Lstm::run(Binder& b, const Var& inputs, bool reverse) const {
  const Eigen::Index n = inputs.rows();
  if (n == 0) return b.tape().constant(Matrix::Zero(0, hidden()));
  Var projected = add_row(matmul(inputs, b(w_input)), b(bias));
  State state = zero_state(b.tape(), 1);
  std::vector<Var> out(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    state = step(b, slice(projected, t, 0, 1, 4 * hidden()), state);
    out[static_cast<std::size_t>(t)] = state.h;
  }
  return concat_rows(out);
}

Matrix Lstm::run(const Matrix& inputs, bool reverse) const {
  const Eigen::Index n = inputs.rows(), h = hidden();
  Matrix projected = (inputs * w_input->value).rowwise() + bias->value.row(0);
  Matrix out(n, h);
  RowVector hs = RowVector::Zero(h), cs = RowVector::Zero(h);
  const auto sig = [](auto x) { return 1.0 / (1.0 + (-x).exp()); };
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    const RowVector gates = projected.row(t) + hs * w_hidden->value;
    const auto i = sig(gates.segment(0, h).array());
    const auto f = sig(gates.segment(h, h).array());
    const auto o = sig(gates.segment(2 * h, h).array());
    const auto g = gates.segment(3 * h, h).array().tanh();
    cs = (f * cs.array() + i * g).matrix();
    hs = (o * cs.array().tanh()).matrix();
    out.row(t) = hs;
  }
  return out;
}

// --- Transformer ---------------------------------------------------------------

TransformerEncoder::TransformerEncoder(ParameterSet& params, const std::string& prefix, const TransformerConfig& cfg,
                                       std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg.dim % cfg.heads != 0)
    throw Error("transformer: dim " + std::to_string(cfg.dim) + " not divisible by " + std::to_string(cfg.heads) +
                " heads");
  const Eigen::Index d = cfg.dim;
  positions_ = &params.add(prefix + ".positions", xavier_uniform(cfg.max_positions, d, rng) * 0.1);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = prefix + ".block" + std::to_string(l);
    Block blk{};
    blk.ln1_g = &params.add(p + ".ln1.gain", Matrix::Ones(1, d));
    blk.ln1_b = &params.add(p + ".ln1.bias", Matrix::Zero(1, d));
    blk.wq = &params.add(p + ".wq", xavier_uniform(d, d, rng));
    blk.wk = &params.add(p + ".wk", xavier_uniform(d, d, rng));
    blk.wv = &params.add(p + ".wv", xavier_uniform(d, d, rng));
    blk.out = Linear(params, p + ".attn_out", d, d, rng);
    blk.ln2_g = &params.add(p + ".ln2.gain", Matrix::Ones(1, d));
    blk.ln2_b = &params.add(p + ".ln2.bias", Matrix::Zero(1, d));
    blk.ff1 = Linear(params, p + ".ff1", d, cfg.ff, rng);
    blk.ff2 = Linear(params, p + ".ff2", cfg.ff, d, rng);
    blocks_.push_back(blk);
  }
  final_g_ = &params.add(prefix + ".final.gain", Matrix::Ones(1, d));
  final_b_ = &params.add(prefix + ".final.bias", Matrix::Zero(1, d));
}

TransformerEncoder TransformerEncoder::attach(ParameterSet& params, const std::string& prefix,
                                              const TransformerConfig& cfg) {
  TransformerEncoder enc;
  enc.cfg_ = cfg;
  enc.positions_ = &params.get(prefix + ".positions");
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = prefix + ".block" + std::to_string(l);
    Block blk{};
    blk.ln1_g = &params.get(p + ".ln1.gain");
    blk.ln1_b = &params.get(p + ".ln1.bias");
    blk.wq = &params.get(p + ".wq");
    blk.wk = &params.get(p + ".wk");
    blk.wv = &params.get(p + ".wv");
    blk.out = Linear::attach(params, p + ".attn_out");
    blk.ln2_g = &params.get(p + ".ln2.gain");
    blk.ln2_b = &params.get(p + ".ln2.bias");
    blk.ff1 = Linear::attach(params, p + ".ff1");
    blk.ff2 = Linear::attach(params, p + ".ff2");
    enc.blocks_.push_back(blk);
  }
  enc.final_g_ = &params.get(prefix + ".final.gain");
  enc.final_b_ = &params.get(prefix + ".final.bias");
  return enc;
}

Var TransformerEncoder::encode(Binder& b, const Var& tokens) const {
  const Eigen::Index len = tokens.rows(), d = cfg_.dim, dh = d / cfg_.heads;
  if (len > cfg_.max_positions)
    throw Error("transformer: sequence of " + std::to_string(len) + " tokens exceeds " +
                std::to_string(cfg_.max_positions) + " positions");
  Var x = add(tokens, slice(b(positions_), 0, 0, len, d));
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const Block& blk : blocks_) {
    Var h = layer_norm(x, b(blk.ln1_g), b(blk.ln1_b));
    Var q = matmul(h, b(blk.wq)), k = matmul(h, b(blk.wk)), v = matmul(h, b(blk.wv));
    std::vector<Var> heads;
    for (int hd = 0; hd < cfg_.heads; ++hd) {
      const Eigen::Index c0 = hd * dh;
      Var qh = slice(q, 0, c0, len, dh), kh = slice(k, 0, c0, len, dh), vh = slice(v, 0, c0, len, dh);
      Var attn = softmax(scale(matmul(qh, transpose(kh)), scale_factor));
      heads.push_back(matmul(attn, vh));
    }
    x = add(x, blk.out(b, concat_cols(heads)));
    Var f = layer_norm(x, b(blk.ln2_g), b(blk.ln2_b));
    x = add(x, blk.ff2(b, gelu(blk.ff1(b, f))));
  }
  return layer_norm(x, b(final_g_), b(final_b_));
}

// --- vocabulary ----------------------------------------------------------------

Vocabulary::Vocabulary() { add("<unk>"); }

int Vocabulary::add(const std::string& item) {
  auto it = index_.find(item);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(items_.size());
  items_.push_back(item);
  index_.emplace(item, id);
  return id;
}

int Vocabulary::id(const std::string& item) const {
  auto it = index_.find(item);
  return it == index_.end() ? kUnknown : it->second;
}

std::string word_shape(const std::string& token) {
  std::string out;
  char last = 0;
  int run = 0;
  for (unsigned char ch : token) {
    char c = static_cast<char>(ch);
    if (std::isupper(ch))
      c = 'X';
    else if (std::islower(ch))
      c = 'x';
    else if (std::isdigit(ch))
      c = 'd';
    else if (ch >= 0x80)
      c = 'u';
    run = c == last ? run + 1 : 1;
    last = c;
    if (run <= 2) out += c;
  }
  return out;
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace acklab
