#pragma once

// Building blocks shared by the taggers and the character language models.

#include "acklab/tensor.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace acklab {

// Binds each parameter to one leaf per tape, so a weight used at every time
// step accumulates its gradient through a single node.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(tape) {}
  Var operator()(Parameter& p);
  Var operator()(const Parameter* p) { return (*this)(*const_cast<Parameter*>(p)); }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  std::unordered_map<const Parameter*, Var> bound_;
};

struct Linear {
  Parameter* weight = nullptr;  // [in x out]
  Parameter* bias = nullptr;    // [1 x out]

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out, std::mt19937_64& rng);
  static Linear attach(ParameterSet& params, const std::string& name);

  Var operator()(Binder& b, const Var& x) const;
  Matrix apply(const Matrix& x) const;
  Eigen::Index out_dim() const { return weight->value.cols(); }
};

// Single-direction LSTM; gate order is input, forget, output, candidate.
struct Lstm {
  Parameter* w_input = nullptr;   // [in x 4H]
  Parameter* w_hidden = nullptr;  // [H x 4H]
  Parameter* bias = nullptr;      // [1 x 4H], forget gate starts at 1

  Lstm() = default;
  Lstm(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng);
  static Lstm attach(ParameterSet& params, const std::string& name);

  Eigen::Index hidden() const { return w_hidden->value.rows(); }

  struct State {
    Var h, c;
  };
  // One step for a batch: projected inputs [B x 4H] (already x*W_input+bias).
  State step(Binder& b, const Var& projected, const State& prev) const;
  State zero_state(Tape& tape, Eigen::Index batch) const;

  // Whole sequence [n x in] -> hidden states [n x H]. With reverse=true the
  // sequence is read right to left and row t still belongs to position t.
  Var run(Binder& b, const Var& inputs, bool reverse) const;

  // Same computation without a tape.
  Matrix run(const Matrix& inputs, bool reverse) const;
};

struct TransformerConfig {
  int layers = 2;
  int heads = 4;
  int dim = 64;
  int ff = 128;
  int max_positions = 256;
};

// Pre-norm encoder blocks with learned positions and a final layer norm.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParameterSet& params, const std::string& prefix, const TransformerConfig& cfg,
                     std::mt19937_64& rng);
  static TransformerEncoder attach(ParameterSet& params, const std::string& prefix, const TransformerConfig& cfg);

  // [L x dim] token embeddings -> [L x dim] contextual states.
  Var encode(Binder& b, const Var& tokens) const;
  const TransformerConfig& config() const { return cfg_; }

 private:
  struct Block {
    Parameter *ln1_g, *ln1_b, *wq, *wk, *wv;
    Linear out;
    Parameter *ln2_g, *ln2_b;
    Linear ff1, ff2;
  };
  TransformerConfig cfg_;
  Parameter* positions_ = nullptr;
  Parameter* final_g_ = nullptr;
  Parameter* final_b_ = nullptr;
  std::vector<Block> blocks_;
};

// Token -> id map with a reserved unknown entry at 0.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary();
  int add(const std::string& item);
  int id(const std::string& item) const;
  bool contains(const std::string& item) const { return index_.count(item) > 0; }
  const std::vector<std::string>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, int> index_;
};

// Orthographic class: upper -> X, lower -> x, digit -> d, non-ASCII bytes -> u,
// other bytes kept; runs longer than two collapsed ("Grant-01PQ" -> "Xxx-ddXX").
std::string word_shape(const std::string& token);
std::string lowercase(std::string s);

}  // namespace acklab
