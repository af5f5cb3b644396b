#include "acklab/tagger.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <set>

namespace acklab {

const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::FlairStack: return "flair-stack";
    case ModelFamily::TransformerFinetune: return "mini-transformer-finetune";
    case ModelFamily::Tars: return "tars";
  }
  return "?";
}

ModelFamily parse_family(const std::string& s) {
  if (s == "flair-stack" || s == "flair") return ModelFamily::FlairStack;
  if (s == "mini-transformer-finetune" || s == "transformer") return ModelFamily::TransformerFinetune;
  if (s == "tars") return ModelFamily::Tars;
  throw DataError("unknown model family '" + s + "' (expected flair-stack, mini-transformer-finetune or tars)");
}

// --- document context ---------------------------------------------------------

ContextWindow with_document_context(std::span<const Sentence> document, std::size_t index, int window) {
  ContextWindow ctx;
  if (window <= 0 || index >= document.size()) return ctx;
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t s = index; s-- > 0 && ctx.left.size() < w;) {
    const auto& toks = document[s].tokens;
    for (std::size_t t = toks.size(); t-- > 0 && ctx.left.size() < w;) ctx.left.push_back(toks[t].text);
  }
  std::reverse(ctx.left.begin(), ctx.left.end());
  for (std::size_t s = index + 1; s < document.size() && ctx.right.size() < w; ++s)
    for (std::size_t t = 0; t < document[s].tokens.size() && ctx.right.size() < w; ++t)
      ctx.right.push_back(document[s].tokens[t].text);
  return ctx;
}

std::vector<ContextWindow> document_contexts(std::span<const Sentence> sentences, int window) {
  std::vector<ContextWindow> out(sentences.size());
  std::size_t begin = 0;
  while (begin < sentences.size()) {
    const std::string doc = sentences[begin].meta_value("doc");
    std::size_t end = begin + 1;
    if (!doc.empty())
      while (end < sentences.size() && sentences[end].meta_value("doc") == doc) ++end;
    const auto document = sentences.subspan(begin, end - begin);
    for (std::size_t i = 0; i < document.size(); ++i) out[begin + i] = with_document_context(document, i, window);
    begin = end;
  }
  return out;
}

// --- token inputs -----------------------------------------------------------------

TokenInputs::TokenInputs(ParameterSet& params, const std::string& prefix, Vocabulary words, Vocabulary shapes,
                         int segments, int dim, std::shared_ptr<const StaticTable> statics, std::mt19937_64& rng)
    : words_(std::move(words)), shapes_(std::move(shapes)), statics_(std::move(statics)) {
  const auto vw = static_cast<Eigen::Index>(words_.size()), vs = static_cast<Eigen::Index>(shapes_.size());
  word_table_ = &params.add(prefix + ".words", xavier_uniform(vw, dim, rng));
  shape_table_ = &params.add(prefix + ".shapes", xavier_uniform(vs, dim, rng));
  segment_table_ = &params.add(prefix + ".segments", xavier_uniform(segments, dim, rng));
  if (statics_) static_proj_ = Linear(params, prefix + ".static", statics_->dimension(), dim, rng);
}

TokenInputs TokenInputs::attach(ParameterSet& params, const std::string& prefix, Vocabulary words, Vocabulary shapes,
                                std::shared_ptr<const StaticTable> statics) {
  TokenInputs t;
  t.words_ = std::move(words);
  t.shapes_ = std::move(shapes);
  t.statics_ = std::move(statics);
  t.word_table_ = &params.get(prefix + ".words");
  t.shape_table_ = &params.get(prefix + ".shapes");
  t.segment_table_ = &params.get(prefix + ".segments");
  if (t.statics_) t.static_proj_ = Linear::attach(params, prefix + ".static");
  return t;
}

TokenInputs::Encoded TokenInputs::encode(const std::vector<std::string>& tokens, std::vector<int> segments) const {
  if (segments.size() != tokens.size())
    throw ShapeError("token inputs: " + std::to_string(segments.size()) + " segment ids for " +
                     std::to_string(tokens.size()) + " tokens");
  Encoded e;
  e.segments = std::move(segments);
  for (const std::string& t : tokens) {
    e.words.push_back(words_.id(lowercase(t)));
    e.shapes.push_back(shapes_.id(word_shape(t)));
  }
  if (statics_) {
    e.statics.resize(static_cast<Eigen::Index>(tokens.size()), statics_->dimension());
    for (std::size_t i = 0; i < tokens.size(); ++i) e.statics.row(static_cast<Eigen::Index>(i)) = statics_->embed(tokens[i]);
  }
  return e;
}

Var TokenInputs::operator()(Binder& b, const Encoded& in, double dropout, std::mt19937_64* rng) const {
  std::vector<int> words = in.words;
  if (rng && dropout > 0.0) {
    std::bernoulli_distribution drop(dropout);
    for (int& w : words)
      if (drop(*rng)) w = Vocabulary::kUnknown;
  }
  Var x = add(add(lookup(b(word_table_), words), lookup(b(shape_table_), in.shapes)),
              lookup(b(segment_table_), in.segments));
  if (statics_) x = add(x, static_proj_(b, b.tape().constant(in.statics)));
  return x;
}

std::pair<Vocabulary, Vocabulary> build_vocabularies(std::span<const Sentence> sentences,
                                                     std::span<const std::string> extra_tokens) {
  Vocabulary words, shapes;
  auto take = [&](const std::string& t) {
    words.add(lowercase(t));
    shapes.add(word_shape(t));
  };
  for (const Sentence& s : sentences)
    for (const Token& t : s.tokens) take(t.text);
  for (const std::string& t : extra_tokens) take(t);
  return {std::move(words), std::move(shapes)};
}

// --- tagger ------------------------------------------------------------------------

namespace {

constexpr int kSegments = 3;  // left context / core / right context

}  // namespace

void put_static_table(Checkpoint& ck, const std::string& key, const StaticTable& table) {
  ck.lists[key + ".words"] = table.words();
  ck.tensors[key + ".vectors"] = table.vectors();
}

std::shared_ptr<const StaticTable> get_static_table(const Checkpoint& ck, const std::string& key) {
  if (!ck.lists.count(key + ".words")) return nullptr;
  return std::make_shared<const StaticTable>(ck.get_list(key + ".words"), ck.get_tensor(key + ".vectors"));
}

Vocabulary vocabulary_from(const std::vector<std::string>& items) {
  Vocabulary v;
  for (const std::string& s : items) v.add(s);
  return v;
}

void put_transformer_config(Checkpoint& ck, const std::string& prefix, const TransformerConfig& t) {
  ck.meta[prefix + "transformer.layers"] = std::to_string(t.layers);
  ck.meta[prefix + "transformer.heads"] = std::to_string(t.heads);
  ck.meta[prefix + "transformer.dim"] = std::to_string(t.dim);
  ck.meta[prefix + "transformer.ff"] = std::to_string(t.ff);
  ck.meta[prefix + "transformer.max_positions"] = std::to_string(t.max_positions);
}

void SequenceTagger::init_head(Eigen::Index encoder_dim, std::mt19937_64& rng) {
  tags_ = tag_inventory(labels_, cfg_.scheme);
  for (std::size_t i = 0; i < tags_.size(); ++i) tag_index_.emplace(tags_[i], static_cast<int>(i));
  const auto k = static_cast<Eigen::Index>(tags_.size());
  emission_ = Linear(params_, "emission", encoder_dim, k, rng);
  if (cfg_.family == ModelFamily::FlairStack) transitions_ = &params_.add("transitions", Matrix::Zero(k + 2, k + 2));
}

SequenceTagger::SequenceTagger(const TaggerConfig& cfg, std::vector<Label> labels, EmbeddingStack stack)
    : cfg_(cfg), labels_(std::move(labels)), stack_(std::move(stack)) {
  cfg_.family = ModelFamily::FlairStack;
  if (cfg_.lstm_hidden <= 0) throw Error("flair-stack: lstm_hidden must be positive");
  std::mt19937_64 rng(cfg_.seed);
  const Eigen::Index in = stack_.dimension();
  if (in <= 0) throw Error("flair-stack: embedding stack has dimension 0");
  forward_ = Lstm(params_, "lstm_fwd", in, cfg_.lstm_hidden, rng);
  backward_ = Lstm(params_, "lstm_bwd", in, cfg_.lstm_hidden, rng);
  init_head(2 * cfg_.lstm_hidden, rng);
}

SequenceTagger::SequenceTagger(const TaggerConfig& cfg, std::vector<Label> labels, Vocabulary words,
                               Vocabulary shapes, std::shared_ptr<const StaticTable> statics)
    : cfg_(cfg), labels_(std::move(labels)) {
  cfg_.family = ModelFamily::TransformerFinetune;
  std::mt19937_64 rng(cfg_.seed);
  inputs_ = TokenInputs(params_, "inputs", std::move(words), std::move(shapes), kSegments, cfg_.transformer.dim,
                        std::move(statics), rng);
  encoder_ = TransformerEncoder(params_, "encoder", cfg_.transformer, rng);
  init_head(cfg_.transformer.dim, rng);
}

PreparedInput SequenceTagger::prepare(const Sentence& sentence, const ContextWindow& context) const {
  PreparedInput in;
  const auto n = static_cast<Eigen::Index>(sentence.size());
  in.core_length = n;
  if (cfg_.family == ModelFamily::FlairStack) {
    in.features = stack_.embed(sentence, context);
    return in;
  }
  const auto max_len = static_cast<std::size_t>(cfg_.transformer.max_positions);
  if (sentence.size() > max_len)
    throw Error("transformer: sentence " + sentence.id + " has " + std::to_string(sentence.size()) +
                " tokens, more than " + std::to_string(max_len) + " positions");
  const std::size_t budget = max_len - sentence.size();
  const std::size_t left = std::min(context.left.size(), budget / 2);
  const std::size_t right = std::min(context.right.size(), budget - left);
  std::vector<std::string> tokens;
  std::vector<int> segments;
  for (std::size_t i = context.left.size() - left; i < context.left.size(); ++i) {
    tokens.push_back(context.left[i]);
    segments.push_back(0);
  }
  for (const Token& t : sentence.tokens) {
    tokens.push_back(t.text);
    segments.push_back(1);
  }
  for (std::size_t i = 0; i < right; ++i) {
    tokens.push_back(context.right[i]);
    segments.push_back(2);
  }
  in.core_begin = static_cast<Eigen::Index>(left);
  in.tokens = inputs_.encode(tokens, std::move(segments));
  return in;
}

std::vector<int> SequenceTagger::gold_tags(const Sentence& sentence) const {
  std::vector<int> out;
  for (const std::string& t : encode_tags(sentence, cfg_.scheme)) {
    auto it = tag_index_.find(t);
    if (it == tag_index_.end())
      throw DataError("sentence " + sentence.id + ": tag " + t + " is not in the model's tag inventory");
    out.push_back(it->second);
  }
  return out;
}

Var SequenceTagger::emissions(Binder& b, const PreparedInput& in, std::mt19937_64* dropout_rng) const {
  Tape& tape = b.tape();
  const auto k = static_cast<Eigen::Index>(tags_.size());
  if (in.core_length == 0) return tape.constant(Matrix::Zero(0, k));
  if (cfg_.family == ModelFamily::FlairStack) {
    if (in.features.cols() != stack_.dimension())
      throw ShapeError("flair-stack: features " + shape_string(in.features) + " for stack dimension " +
                       std::to_string(stack_.dimension()));
    Var x = tape.constant(in.features);
    std::vector<Var> parts{forward_.run(b, x, false), backward_.run(b, x, true)};
    return emission_(b, concat_cols(parts));
  }
  Var states = encoder_.encode(b, inputs_(b, in.tokens, cfg_.word_dropout, dropout_rng));
  return emission_(b, slice(states, in.core_begin, 0, in.core_length, cfg_.transformer.dim));
}

Matrix SequenceTagger::emissions(const Sentence& sentence, const ContextWindow& context) const {
  const PreparedInput in = prepare(sentence, context);
  Tape tape;
  Binder b(tape);
  return emissions(b, in).value();
}

Matrix SequenceTagger::encoder_states(const Sentence& sentence, const ContextWindow& context) const {
  if (cfg_.family != ModelFamily::TransformerFinetune) throw Error("encoder_states: not a transformer tagger");
  const PreparedInput in = prepare(sentence, context);
  if (in.core_length == 0) return Matrix(0, cfg_.transformer.dim);
  Tape tape;
  Binder b(tape);
  Var states = encoder_.encode(b, inputs_(b, in.tokens));
  return states.value().middleRows(in.core_begin, in.core_length);
}

Var SequenceTagger::loss(Binder& b, const PreparedInput& in, const std::vector<int>& gold,
                         std::mt19937_64* dropout_rng) const {
  if (static_cast<Eigen::Index>(gold.size()) != in.core_length)
    throw ShapeError("loss: " + std::to_string(gold.size()) + " gold tags for " + std::to_string(in.core_length) +
                     " tokens");
  Var e = emissions(b, in, dropout_rng);
  if (transitions_) return crf::nll(e, b(transitions_), gold);
  if (in.core_length == 0) return b.tape().constant(Matrix::Zero(1, 1));
  return cross_entropy(e, gold);
}

Var SequenceTagger::batch_loss(Binder& b, std::span<const PreparedInput* const> inputs,
                               std::span<const std::vector<int>* const> gold, std::mt19937_64* dropout_rng) const {
  if (inputs.empty() || inputs.size() != gold.size()) throw Error("batch_loss: empty or mismatched batch");
  Var total = loss(b, *inputs[0], *gold[0], dropout_rng);
  for (std::size_t i = 1; i < inputs.size(); ++i) total = add(total, loss(b, *inputs[i], *gold[i], dropout_rng));
  return scale(total, 1.0 / static_cast<double>(inputs.size()));
}

Prediction SequenceTagger::decode(const Matrix& e) const {
  std::vector<int> path;
  if (transitions_) {
    path = crf::viterbi(e, transitions_->value).tags;
  } else {
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < e.cols(); ++c)
        if (e(r, c) > e(r, best)) best = c;
      path.push_back(static_cast<int>(best));
    }
  }
  std::vector<std::string> tags;
  for (int t : path) tags.push_back(tags_[static_cast<std::size_t>(t)]);
  DecodeResult d = decode_bioes(tags);
  return {std::move(d.spans), d.repairs};
}

Prediction SequenceTagger::predict_prepared(const PreparedInput& in) const {
  if (in.core_length == 0) return {};
  Tape tape;
  Binder b(tape);
  return decode(emissions(b, in).value());
}

Prediction SequenceTagger::predict(const Sentence& sentence, const ContextWindow& context) const {
  return predict_prepared(prepare(sentence, context));
}

std::vector<Prediction> SequenceTagger::predict_all(std::span<const Sentence> sentences) const {
  const std::vector<ContextWindow> ctx = document_contexts(sentences, cfg_.context_window);
  std::vector<Prediction> out;
  out.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) out.push_back(predict(sentences[i], ctx[i]));
  return out;
}

void SequenceTagger::save(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + "family"] = family_name(cfg_.family);
  ck.meta[prefix + "scheme"] = scheme_name(cfg_.scheme);
  ck.meta[prefix + "seed"] = std::to_string(cfg_.seed);
  ck.meta[prefix + "context_window"] = std::to_string(cfg_.context_window);
  ck.lists[prefix + "labels"] = labels_;
  if (cfg_.family == ModelFamily::FlairStack) {
    ck.meta[prefix + "lstm_hidden"] = std::to_string(cfg_.lstm_hidden);
    std::vector<std::string> names;
    for (const EmbedderPtr& m : stack_.members()) {
      names.push_back(m->name());
      if (auto* s = dynamic_cast<const StaticEmbedder*>(m.get())) {
        put_static_table(ck, prefix + "static", *s->table());
      } else if (auto* c = dynamic_cast<const ContextualStringEmbedder*>(m.get())) {
        c->forward()->save(ck, prefix + "lm_fwd.");
        c->backward()->save(ck, prefix + "lm_bwd.");
      } else if (auto* t = dynamic_cast<const TransformerFeatureEmbedder*>(m.get())) {
        t->model()->save(ck, prefix + "features.");
      } else {
        throw Error("checkpoint: embedder '" + m->name() + "' cannot be saved");
      }
    }
    ck.lists[prefix + "stack"] = names;
  } else {
    put_transformer_config(ck, prefix, cfg_.transformer);
    ck.lists[prefix + "vocab.words"] = inputs_.words().items();
    ck.lists[prefix + "vocab.shapes"] = inputs_.shapes().items();
    if (inputs_.statics()) put_static_table(ck, prefix + "static", *inputs_.statics());
  }
  ck.put_params(prefix + "param.", params_);
}

TransformerConfig transformer_config_from(const Checkpoint& ck, const std::string& prefix) {
  TransformerConfig t;
  t.layers = std::stoi(ck.get_meta(prefix + "transformer.layers"));
  t.heads = std::stoi(ck.get_meta(prefix + "transformer.heads"));
  t.dim = std::stoi(ck.get_meta(prefix + "transformer.dim"));
  t.ff = std::stoi(ck.get_meta(prefix + "transformer.ff"));
  t.max_positions = std::stoi(ck.get_meta(prefix + "transformer.max_positions"));
  return t;
}

SequenceTagger SequenceTagger::load(const Checkpoint& ck, const std::string& prefix) {
  TaggerConfig cfg;
  cfg.family = parse_family(ck.get_meta(prefix + "family"));
  cfg.scheme = parse_scheme(ck.get_meta(prefix + "scheme"));
  cfg.seed = std::stoull(ck.get_meta(prefix + "seed", "1"));
  cfg.context_window = std::stoi(ck.get_meta(prefix + "context_window", "64"));
  std::vector<Label> labels = ck.get_list(prefix + "labels");
  if (cfg.family == ModelFamily::FlairStack) {
    cfg.lstm_hidden = std::stoi(ck.get_meta(prefix + "lstm_hidden"));
    std::vector<EmbedderPtr> members;
    for (const std::string& name : ck.get_list(prefix + "stack")) {
      if (name == "static") {
        members.push_back(std::make_shared<StaticEmbedder>(get_static_table(ck, prefix + "static")));
      } else if (name == "contextual-strings") {
        members.push_back(std::make_shared<ContextualStringEmbedder>(
            std::make_shared<const CharLm>(CharLm::load(ck, prefix + "lm_fwd.")),
            std::make_shared<const CharLm>(CharLm::load(ck, prefix + "lm_bwd."))));
      } else if (name == "transformer-features") {
        members.push_back(std::make_shared<TransformerFeatureEmbedder>(
            std::make_shared<const SequenceTagger>(SequenceTagger::load(ck, prefix + "features."))));
      } else {
        throw DataError("checkpoint: unknown embedder '" + name + "'");
      }
    }
    SequenceTagger model(cfg, std::move(labels), EmbeddingStack(std::move(members)));
    ck.load_params(prefix + "param.", model.params_);
    return model;
  }
  if (cfg.family != ModelFamily::TransformerFinetune)
    throw DataError("checkpoint: family " + std::string(family_name(cfg.family)) + " is not a sequence tagger");
  cfg.transformer = transformer_config_from(ck, prefix);
  std::shared_ptr<const StaticTable> statics = get_static_table(ck, prefix + "static");
  SequenceTagger model(cfg, std::move(labels), vocabulary_from(ck.get_list(prefix + "vocab.words")),
                       vocabulary_from(ck.get_list(prefix + "vocab.shapes")), std::move(statics));
  ck.load_params(prefix + "param.", model.params_);
  return model;
}

// --- transformer features ----------------------------------------------------------

TransformerFeatureEmbedder::TransformerFeatureEmbedder(std::shared_ptr<const SequenceTagger> model)
    : model_(std::move(model)) {
  if (!model_ || model_->config().family != ModelFamily::TransformerFinetune)
    throw Error("transformer features need a mini-transformer tagger");
}

Eigen::Index TransformerFeatureEmbedder::dimension() const { return model_->config().transformer.dim; }

Matrix TransformerFeatureEmbedder::embed(const Sentence& sentence, const ContextWindow& context) const {
  return model_->encoder_states(sentence, context);
}

// --- training -----------------------------------------------------------------------

std::string training_log_jsonl(std::span<const TrainingLogEntry> log) {
  std::string out;
  for (const TrainingLogEntry& e : log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_f1"] = e.dev_f1;
    j["lr"] = e.lr;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void check_label_inventory(const Corpus& corpus) {
  std::set<Label> train;
  for (const Sentence& s : corpus.train)
    for (const Span& sp : s.spans) train.insert(sp.label);
  auto check = [&](const std::vector<Sentence>& split, const char* name) {
    for (const Sentence& s : split)
      for (const Span& sp : s.spans)
        if (!train.count(sp.label))
          throw DataError(std::string(name) + " sentence " + s.id + " uses label " + sp.label +
                          " which does not occur in train");
  };
  check(corpus.dev, "dev");
  check(corpus.test, "test");
}

EvalReport evaluate_tagger(const SequenceTagger& model, std::span<const Sentence> gold, RunMeta meta) {
  std::vector<std::vector<Span>> spans;
  for (Prediction& p : model.predict_all(gold)) spans.push_back(std::move(p.spans));
  EvalReport r = score_aligned(gold, spans, model.labels());
  r.meta = std::move(meta);
  return r;
}

TaggerTraining train_tagger(const TaggerConfig& cfg, const Corpus& corpus, const OptimizerConfig& opt_in,
                            const Resources& resources, std::vector<EmbedderPtr> extra) {
  if (corpus.train.empty()) throw DataError("training split is empty");
  if (cfg.epochs < 0 || cfg.batch_size <= 0) throw Error("train: epochs must be >= 0 and batch_size > 0");
  opt_in.validate();
  check_label_inventory(corpus);
  Corpus inv = corpus;
  inv.recompute_labels();

  auto build = [&]() -> SequenceTagger {
    if (cfg.family == ModelFamily::FlairStack) {
      std::vector<EmbedderPtr> members;
      if (cfg.stack_static && resources.static_table)
        members.push_back(std::make_shared<StaticEmbedder>(resources.static_table));
      if (cfg.stack_contextual && resources.forward_lm && resources.backward_lm)
        members.push_back(std::make_shared<ContextualStringEmbedder>(resources.forward_lm, resources.backward_lm));
      for (EmbedderPtr& e : extra) members.push_back(std::move(e));
      if (members.empty()) throw Error("flair-stack: no embedders available (static table or char-LMs required)");
      return SequenceTagger(cfg, inv.labels, EmbeddingStack(std::move(members)));
    }
    if (cfg.family == ModelFamily::TransformerFinetune) {
      auto [words, shapes] = build_vocabularies(corpus.train);
      return SequenceTagger(cfg, inv.labels, std::move(words), std::move(shapes), resources.static_table);
    }
    throw Error("train_tagger: use train_tars for the tars family");
  };
  TaggerTraining out{build(), {}, 0};
  SequenceTagger& model = out.model;

  const std::vector<ContextWindow> train_ctx = document_contexts(corpus.train, cfg.context_window);
  const std::vector<ContextWindow> dev_ctx = document_contexts(corpus.dev, cfg.context_window);
  std::vector<PreparedInput> train_in, dev_in;
  std::vector<std::vector<int>> train_gold;
  for (std::size_t i = 0; i < corpus.train.size(); ++i) {
    train_in.push_back(model.prepare(corpus.train[i], train_ctx[i]));
    train_gold.push_back(model.gold_tags(corpus.train[i]));
  }
  if (cfg.epochs > 0)
    for (std::size_t i = 0; i < corpus.dev.size(); ++i) dev_in.push_back(model.prepare(corpus.dev[i], dev_ctx[i]));

  OptimizerConfig opt = opt_in;
  const std::size_t batches = (train_in.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                              static_cast<std::size_t>(cfg.batch_size);
  if (opt.warmup_fraction > 0.0 && opt.total_steps == 0)
    opt.total_steps = batches * static_cast<std::size_t>(cfg.epochs);
  SchedulerState sched = make_scheduler(opt);
  const std::vector<Parameter*> params = model.params().all();

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_in.size());
  std::iota(order.begin(), order.end(), 0);
  double best_dev = -1.0;
  std::vector<Matrix> best_values;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const PreparedInput*> in;
      std::vector<const std::vector<int>*> gold;
      for (std::size_t i = start; i < end; ++i) {
        in.push_back(&train_in[order[i]]);
        gold.push_back(&train_gold[order[i]]);
      }
      Tape tape;
      Binder b(tape);
      Var loss = model.batch_loss(b, in, gold, &dropout_rng);
      loss_sum += loss.scalar() * static_cast<double>(in.size());
      model.params().zero_grad();
      tape.backward(loss);
      sched = optimizer_step(params, opt, std::move(sched));
    }

    TrainingLogEntry entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(train_in.size());
    if (!dev_in.empty()) {
      std::vector<std::vector<Span>> spans;
      for (const PreparedInput& d : dev_in) spans.push_back(model.predict_prepared(d).spans);
      entry.dev_f1 = score_aligned(corpus.dev, spans, model.labels()).micro_f1();
      if (entry.dev_f1 > best_dev) {
        best_dev = entry.dev_f1;
        best_values = model.params().values();
        out.best_epoch = epoch;
      }
      sched = report_dev_score(opt, std::move(sched), entry.dev_f1);
    }
    entry.lr = opt.total_steps > 0 ? effective_learning_rate(opt, sched) : sched.learning_rate;
    out.log.push_back(entry);
  }
  if (!best_values.empty()) {
    model.params().set_values(best_values);
  } else {
    out.best_epoch = cfg.epochs;
  }
  model.params().zero_grad();
  return out;
}

}  // namespace acklab
