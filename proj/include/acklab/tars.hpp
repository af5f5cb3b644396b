#pragma once

// Task-aware representation of sentences: a k-class tagging task becomes k
// binary tasks whose input starts with the label's natural-language phrase,
// so one shared tagger can score labels it never saw during training.

#include "acklab/tagger.hpp"

namespace acklab {

// Label -> phrase. Phrases must be nonempty and pairwise distinct.
using Verbalization = std::map<Label, std::string>;

// FUND "Funding Agency", IND "Person", COR "Corporation", GRNB "Grant Number",
// UNI "University", MISC "Miscellaneous".
Verbalization default_verbalization();
// One "LABEL<TAB>phrase" per line; blank and '#' lines skipped.
Verbalization parse_verbalization(const std::string& text);
Verbalization load_verbalization(const std::string& path);
void validate_verbalization(const Verbalization& v);

inline const std::string kSeparatorToken = "[SEP]";

struct BinaryInstance {
  std::string sentence_id;
  Label label;
  std::vector<std::string> phrase_tokens;
  std::vector<std::string> sentence_tokens;
  std::vector<int> tags;  // sentence region only: 1 inside a span of `label`

  // phrase tokens, separator, sentence tokens
  std::vector<std::string> composite_tokens() const;
  // 0 over the phrase and separator, then `tags`
  std::vector<int> composite_tags() const;
  std::size_t sentence_offset() const { return phrase_tokens.size() + 1; }
};

// One instance per (sentence, label) in sentence-major, `labels` order.
// Throws DataError naming a label without a phrase.
std::vector<BinaryInstance> reformulate(std::span<const Sentence> sentences, std::span<const Label> labels,
                                        const Verbalization& verbalization);

std::vector<std::string> phrase_tokens(const std::string& phrase);

struct Candidate {
  Label label;
  std::string phrase;
};

std::vector<Candidate> candidates_from(const Verbalization& v);

struct ScoredSpan {
  Span span;
  double confidence = 0.0;
  std::size_t candidate = 0;
};

// Inside-runs per candidate, then overlap resolution by confidence (ties to
// the earlier candidate, then the earlier span). Result sorted by start.
std::vector<ScoredSpan> aggregate_spans(const std::vector<std::vector<double>>& inside_probs,
                                        std::span<const Candidate> candidates);

struct TarsConfig {
  TransformerConfig transformer;
  int epochs = 10;
  int batch_size = 16;
  double word_dropout = 0.1;
  std::uint64_t seed = 1;
};

class TarsModel {
 public:
  TarsModel(const TarsConfig& cfg, Vocabulary words, Vocabulary shapes, std::shared_ptr<const StaticTable> statics,
            Verbalization trained);
  TarsModel(TarsModel&&) = default;
  TarsModel& operator=(TarsModel&&) = default;

  const TarsConfig& config() const { return cfg_; }
  const Verbalization& trained_verbalization() const { return trained_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  struct Prepared {
    TokenInputs::Encoded tokens;
    std::vector<int> targets;  // -1 over the phrase and separator
  };
  Prepared prepare(const BinaryInstance& instance) const;

  Var loss(Binder& b, const Prepared& in, std::mt19937_64* dropout_rng = nullptr) const;
  Var batch_loss(Binder& b, std::span<const Prepared* const> batch, std::mt19937_64* dropout_rng = nullptr) const;

  // P(inside) for each sentence token under the given phrase.
  std::vector<double> inside_probabilities(const std::vector<std::string>& sentence_tokens,
                                           const std::string& phrase) const;

  std::vector<ScoredSpan> predict_scored(const Sentence& sentence, std::span<const Candidate> candidates) const;
  // Throws Error for an empty candidate list.
  std::vector<Span> predict(const Sentence& sentence, std::span<const Candidate> candidates) const;

  void save(Checkpoint& ck, const std::string& prefix = "") const;
  static TarsModel load(const Checkpoint& ck, const std::string& prefix = "");

 private:
  TarsConfig cfg_;
  Verbalization trained_;
  ParameterSet params_;
  TokenInputs inputs_;
  TransformerEncoder encoder_;
  Linear head_;
};

std::vector<Span> tars_predict(const TarsModel& model, const Sentence& sentence, std::span<const Candidate> candidates);

struct TarsTraining {
  TarsModel model;
  std::vector<TrainingLogEntry> log;
  int best_epoch = 0;
};

// Trains on every (train sentence, corpus label) instance. Dev micro-F1 uses
// tars_predict with the corpus labels as candidates; the best-dev parameters
// are kept.
TarsTraining train_tars(const Corpus& corpus, const Verbalization& verbalization, const TarsConfig& cfg,
                        const OptimizerConfig& opt, const Resources& resources);

EvalReport evaluate_tars(const TarsModel& model, std::span<const Sentence> gold, std::span<const Candidate> candidates,
                         RunMeta meta = {});

}  // namespace acklab
