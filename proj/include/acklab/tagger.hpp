#pragma once

// Sequence taggers.
//
// flair-stack: frozen embedding stack -> BiLSTM -> linear emissions -> CRF.
// mini-transformer-finetune: word/shape/segment/static inputs over the core
// sentence plus document context -> transformer -> per-token softmax.

#include "acklab/crf.hpp"
#include "acklab/embeddings.hpp"
#include "acklab/eval.hpp"
#include "acklab/optimizer.hpp"

#include <memory>
#include <optional>

namespace acklab {

enum class ModelFamily { FlairStack, TransformerFinetune, Tars };
const char* family_name(ModelFamily f);
// "flair-stack", "mini-transformer-finetune" (or "transformer"), "tars".
ModelFamily parse_family(const std::string& s);

// Pretrained, frozen inputs shared by all runs of an experiment.
struct Resources {
  std::shared_ptr<const StaticTable> static_table;
  std::shared_ptr<const CharLm> forward_lm;
  std::shared_ptr<const CharLm> backward_lm;
};

// Document context from neighbouring sentences. Sentences are grouped into
// documents by their "doc" metadata (consecutive runs); a sentence without it
// is its own document. W=0 gives an empty window.
ContextWindow with_document_context(std::span<const Sentence> document, std::size_t index, int window);
std::vector<ContextWindow> document_contexts(std::span<const Sentence> sentences, int window);

// Word, shape and segment embeddings plus a projection of the static vector.
class TokenInputs {
 public:
  struct Encoded {
    std::vector<int> words, shapes, segments;
    Matrix statics;  // [L x D_s], empty without a static table
  };

  TokenInputs() = default;
  TokenInputs(ParameterSet& params, const std::string& prefix, Vocabulary words, Vocabulary shapes, int segments,
              int dim, std::shared_ptr<const StaticTable> statics, std::mt19937_64& rng);
  static TokenInputs attach(ParameterSet& params, const std::string& prefix, Vocabulary words, Vocabulary shapes,
                            std::shared_ptr<const StaticTable> statics);

  Encoded encode(const std::vector<std::string>& tokens, std::vector<int> segments) const;
  // With a generator, each word id is replaced by <unk> with probability `dropout`.
  Var operator()(Binder& b, const Encoded& in, double dropout = 0.0, std::mt19937_64* rng = nullptr) const;

  const Vocabulary& words() const { return words_; }
  const Vocabulary& shapes() const { return shapes_; }
  const std::shared_ptr<const StaticTable>& statics() const { return statics_; }

 private:
  Vocabulary words_, shapes_;
  std::shared_ptr<const StaticTable> statics_;
  Parameter* word_table_ = nullptr;
  Parameter* shape_table_ = nullptr;
  Parameter* segment_table_ = nullptr;
  Linear static_proj_;
};

// Lowercased training tokens (and shapes) for the transformer vocabularies.
std::pair<Vocabulary, Vocabulary> build_vocabularies(std::span<const Sentence> sentences,
                                                     std::span<const std::string> extra_tokens = {});

struct TaggerConfig {
  ModelFamily family = ModelFamily::FlairStack;
  Scheme scheme = Scheme::Bioes;
  int lstm_hidden = 48;
  TransformerConfig transformer;
  int context_window = 64;
  int epochs = 10;
  int batch_size = 8;
  double word_dropout = 0.1;
  std::uint64_t seed = 1;
  // flair-stack members drawn from Resources
  bool stack_static = true;
  bool stack_contextual = true;
};

struct Prediction {
  std::vector<Span> spans;
  int repairs = 0;
};

// Sentence turned into model input once, so frozen features are computed a
// single time per training run.
struct PreparedInput {
  Matrix features;                // flair-stack: [n x stack dim]
  TokenInputs::Encoded tokens;    // transformer: context + core
  Eigen::Index core_begin = 0;
  Eigen::Index core_length = 0;
};

class SequenceTagger {
 public:
  // flair-stack over `stack`. Tags come from `labels` under cfg.scheme.
  SequenceTagger(const TaggerConfig& cfg, std::vector<Label> labels, EmbeddingStack stack);
  // mini-transformer over the given vocabularies.
  SequenceTagger(const TaggerConfig& cfg, std::vector<Label> labels, Vocabulary words, Vocabulary shapes,
                 std::shared_ptr<const StaticTable> statics);
  SequenceTagger(SequenceTagger&&) = default;
  SequenceTagger& operator=(SequenceTagger&&) = default;

  const TaggerConfig& config() const { return cfg_; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<std::string>& tags() const { return tags_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  bool uses_crf() const { return transitions_ != nullptr; }
  const EmbeddingStack& stack() const { return stack_; }

  PreparedInput prepare(const Sentence& sentence, const ContextWindow& context = {}) const;
  std::vector<int> gold_tags(const Sentence& sentence) const;

  Var emissions(Binder& b, const PreparedInput& in, std::mt19937_64* dropout_rng = nullptr) const;
  Matrix emissions(const Sentence& sentence, const ContextWindow& context = {}) const;
  // Transformer encoder states for the core tokens [n x dim].
  Matrix encoder_states(const Sentence& sentence, const ContextWindow& context = {}) const;

  // Per-sentence loss (CRF NLL or summed token cross-entropy).
  Var loss(Binder& b, const PreparedInput& in, const std::vector<int>& gold,
           std::mt19937_64* dropout_rng = nullptr) const;
  // Mean loss over a batch.
  Var batch_loss(Binder& b, std::span<const PreparedInput* const> inputs, std::span<const std::vector<int>* const> gold,
                 std::mt19937_64* dropout_rng = nullptr) const;

  Prediction decode(const Matrix& emissions) const;
  Prediction predict(const Sentence& sentence, const ContextWindow& context = {}) const;
  Prediction predict_prepared(const PreparedInput& in) const;
  // Predictions for a split, document context taken from the split itself.
  std::vector<Prediction> predict_all(std::span<const Sentence> sentences) const;

  // Self-contained: frozen embedders are stored alongside the weights.
  void save(Checkpoint& ck, const std::string& prefix = "") const;
  static SequenceTagger load(const Checkpoint& ck, const std::string& prefix = "");

 private:
  void init_head(Eigen::Index encoder_dim, std::mt19937_64& rng);

  TaggerConfig cfg_;
  std::vector<Label> labels_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> tag_index_;
  ParameterSet params_;
  EmbeddingStack stack_;
  Lstm forward_, backward_;
  TokenInputs inputs_;
  TransformerEncoder encoder_;
  Linear emission_;
  Parameter* transitions_ = nullptr;
};

// Final transformer states of a fine-tuned tagger as a frozen embedder.
class TransformerFeatureEmbedder : public Embedder {
 public:
  explicit TransformerFeatureEmbedder(std::shared_ptr<const SequenceTagger> model);
  std::string name() const override { return "transformer-features"; }
  Eigen::Index dimension() const override;
  Matrix embed(const Sentence& sentence, const ContextWindow& context) const override;
  using Embedder::embed;
  const std::shared_ptr<const SequenceTagger>& model() const { return model_; }

 private:
  std::shared_ptr<const SequenceTagger> model_;
};

struct TrainingLogEntry {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  double lr = 0.0;
};

std::string training_log_jsonl(std::span<const TrainingLogEntry> log);

struct TaggerTraining {
  SequenceTagger model;
  std::vector<TrainingLogEntry> log;
  int best_epoch = 0;
};

// Labels are the corpus inventory; dev/test labels missing from train throw
// DataError. `extra` embedders are appended to the flair-stack stack. The
// parameters with the best dev micro-F1 are kept (the last epoch without dev).
TaggerTraining train_tagger(const TaggerConfig& cfg, const Corpus& corpus, const OptimizerConfig& opt,
                            const Resources& resources, std::vector<EmbedderPtr> extra = {});

// Throws DataError when dev or test use a label that train lacks.
void check_label_inventory(const Corpus& corpus);

// Checkpoint helpers shared with the tars module. get_static_table returns
// null when no table is stored under `key`.
void put_static_table(Checkpoint& ck, const std::string& key, const StaticTable& table);
std::shared_ptr<const StaticTable> get_static_table(const Checkpoint& ck, const std::string& key);
void put_transformer_config(Checkpoint& ck, const std::string& prefix, const TransformerConfig& t);
TransformerConfig transformer_config_from(const Checkpoint& ck, const std::string& prefix);
Vocabulary vocabulary_from(const std::vector<std::string>& items);

// Evaluates a tagger on a split with its own document context.
EvalReport evaluate_tagger(const SequenceTagger& model, std::span<const Sentence> gold, RunMeta meta = {});

}  // namespace acklab
