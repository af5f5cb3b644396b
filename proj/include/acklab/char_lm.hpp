#pragma once

// Byte-level LSTM language model used for contextual string embeddings.
//
// Symbols are the 256 byte values plus BOS (256) and EOS (257), so any UTF-8
// text is representable. The forward model reads text left to right; the
// backward model reads each sentence's bytes reversed.

#include "acklab/checkpoint.hpp"
#include "acklab/layers.hpp"
#include "acklab/optimizer.hpp"

#include <memory>
#include <string>
#include <vector>

namespace acklab {

enum class Direction { Forward, Backward };
const char* direction_name(Direction d);
Direction parse_direction(const std::string& s);

struct CharLmConfig {
  int hidden = 64;
  int embedding = 16;
  int sequence_length = 48;  // truncated BPTT window
  int batch = 16;            // parallel streams
  int epochs = 5;
  double learning_rate = 3e-3;
  double heldout_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct CharLmEpoch {
  int epoch = 0;
  double train_loss = 0.0;  // mean next-symbol cross-entropy, nats
  double heldout_perplexity = 0.0;
};

class CharLm {
 public:
  static constexpr int kBos = 256;
  static constexpr int kEos = 257;
  static constexpr int kSymbols = 258;

  CharLm(Direction direction, const CharLmConfig& cfg);
  CharLm(CharLm&&) = default;
  CharLm& operator=(CharLm&&) = default;

  Direction direction() const { return direction_; }
  const CharLmConfig& config() const { return cfg_; }
  int hidden() const { return cfg_.hidden; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Hidden state after each symbol of `symbols`: row t follows symbols[t].
  Matrix states(const std::vector<int>& symbols) const;
  // Next-symbol logits for each row of `states`.
  Matrix logits(const Matrix& states) const;
  // Mean next-symbol cross-entropy (nats) over a symbol stream.
  double cross_entropy(const std::vector<int>& symbols) const;

  // Mean loss of one truncated window on a tape, starting from `state`.
  // Windows are [batch x (len+1)] symbols; targets are the shifted inputs.
  Var window_loss(Binder& b, const std::vector<std::vector<int>>& windows, Lstm::State& state) const;

  void save(Checkpoint& ck, const std::string& prefix) const;
  static CharLm load(const Checkpoint& ck, const std::string& prefix);

 private:
  Direction direction_;
  CharLmConfig cfg_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  Lstm lstm_;
  Linear output_;
};

// Symbol stream for training: per line BOS, bytes (reversed for Backward), EOS.
std::vector<int> char_stream(const std::vector<std::string>& lines, Direction direction);

struct CharLmTraining {
  CharLm model;
  std::vector<CharLmEpoch> log;
};

// Throws Error when `lines` contain no bytes.
CharLmTraining train_char_lm(const std::vector<std::string>& lines, Direction direction, const CharLmConfig& cfg);

}  // namespace acklab
