#include "acklab/tars.hpp"

#include "acklab/tokenize.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace acklab {

Verbalization default_verbalization() {
  return {{labels::kFund, "Funding Agency"}, {labels::kInd, "Person"},       {labels::kCor, "Corporation"},
          {labels::kGrnb, "Grant Number"},   {labels::kUni, "University"},   {labels::kMisc, "Miscellaneous"}};
}

void validate_verbalization(const Verbalization& v) {
  std::map<std::string, Label> seen;
  for (const auto& [label, phrase] : v) {
    if (phrase.find_first_not_of(" \t") == std::string::npos)
      throw DataError("verbalization: empty phrase for label " + label);
    auto [it, fresh] = seen.emplace(phrase, label);
    if (!fresh) throw DataError("verbalization: labels " + it->second + " and " + label + " share phrase '" + phrase + "'");
  }
}

Verbalization parse_verbalization(const std::string& text) {
  Verbalization v;
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError("verbalization line " + std::to_string(line_no) + ": expected LABEL<TAB>phrase");
    v[line.substr(0, tab)] = line.substr(tab + 1);
  }
  validate_verbalization(v);
  return v;
}

Verbalization load_verbalization(const std::string& path) { return parse_verbalization(read_file(path)); }

std::vector<std::string> BinaryInstance::composite_tokens() const {
  std::vector<std::string> out = phrase_tokens;
  out.push_back(kSeparatorToken);
  out.insert(out.end(), sentence_tokens.begin(), sentence_tokens.end());
  return out;
}

std::vector<int> BinaryInstance::composite_tags() const {
  std::vector<int> out(sentence_offset(), 0);
  out.insert(out.end(), tags.begin(), tags.end());
  return out;
}

std::vector<std::string> phrase_tokens(const std::string& phrase) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(phrase)) out.push_back(t.text);
  return out;
}

std::vector<BinaryInstance> reformulate(std::span<const Sentence> sentences, std::span<const Label> labels,
                                        const Verbalization& verbalization) {
  std::vector<std::vector<std::string>> phrases;
  for (const Label& l : labels) {
    auto it = verbalization.find(l);
    if (it == verbalization.end()) throw DataError("no verbalization for label " + l);
    phrases.push_back(phrase_tokens(it->second));
  }
  std::vector<BinaryInstance> out;
  out.reserve(sentences.size() * labels.size());
  for (const Sentence& s : sentences) {
    for (std::size_t li = 0; li < labels.size(); ++li) {
      BinaryInstance inst;
      inst.sentence_id = s.id;
      inst.label = labels[li];
      inst.phrase_tokens = phrases[li];
      inst.sentence_tokens = s.token_texts();
      inst.tags.assign(s.size(), 0);
      for (const Span& sp : s.spans)
        if (sp.label == labels[li])
          for (int t = sp.start; t < sp.end; ++t) inst.tags[static_cast<std::size_t>(t)] = 1;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::vector<Candidate> candidates_from(const Verbalization& v) {
  std::vector<Candidate> out;
  for (const auto& [label, phrase] : v) out.push_back({label, phrase});
  return out;
}

std::vector<ScoredSpan> aggregate_spans(const std::vector<std::vector<double>>& inside_probs,
                                        std::span<const Candidate> candidates) {
  if (inside_probs.size() != candidates.size())
    throw Error("aggregate_spans: " + std::to_string(inside_probs.size()) + " probability rows for " +
                std::to_string(candidates.size()) + " candidates");
  std::vector<ScoredSpan> proposals;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::vector<double>& p = inside_probs[c];
    std::size_t i = 0;
    while (i < p.size()) {
      if (p[i] <= 0.5) {
        ++i;
        continue;
      }
      std::size_t j = i;
      double total = 0.0;
      while (j < p.size() && p[j] > 0.5) total += p[j++];
      proposals.push_back({Span{static_cast<int>(i), static_cast<int>(j), candidates[c].label},
                           total / static_cast<double>(j - i), c});
      i = j;
    }
  }
  std::stable_sort(proposals.begin(), proposals.end(), [](const ScoredSpan& a, const ScoredSpan& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.candidate != b.candidate) return a.candidate < b.candidate;
    return a.span.start < b.span.start;
  });
  std::vector<ScoredSpan> kept;
  for (const ScoredSpan& s : proposals) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const ScoredSpan& k) { return k.span.overlaps(s.span); });
    if (!clash) kept.push_back(s);
  }
  std::sort(kept.begin(), kept.end(), [](const ScoredSpan& a, const ScoredSpan& b) { return a.span.start < b.span.start; });
  return kept;
}

// --- model ----------------------------------------------------------------------------

namespace {
constexpr int kTarsSegments = 3;  // phrase / separator / sentence
}

TarsModel::TarsModel(const TarsConfig& cfg, Vocabulary words, Vocabulary shapes,
                     std::shared_ptr<const StaticTable> statics, Verbalization trained)
    : cfg_(cfg), trained_(std::move(trained)) {
  std::mt19937_64 rng(cfg_.seed);
  inputs_ = TokenInputs(params_, "inputs", std::move(words), std::move(shapes), kTarsSegments, cfg_.transformer.dim,
                        std::move(statics), rng);
  encoder_ = TransformerEncoder(params_, "encoder", cfg_.transformer, rng);
  head_ = Linear(params_, "head", cfg_.transformer.dim, 2, rng);
}

TarsModel::Prepared TarsModel::prepare(const BinaryInstance& instance) const {
  const std::vector<std::string> tokens = instance.composite_tokens();
  if (tokens.size() > static_cast<std::size_t>(cfg_.transformer.max_positions))
    throw Error("tars: composite input of " + std::to_string(tokens.size()) + " tokens exceeds " +
                std::to_string(cfg_.transformer.max_positions) + " positions");
  std::vector<int> segments(instance.phrase_tokens.size(), 0);
  segments.push_back(1);
  segments.resize(tokens.size(), 2);
  Prepared p;
  p.tokens = inputs_.encode(tokens, std::move(segments));
  p.targets.assign(instance.sentence_offset(), -1);
  p.targets.insert(p.targets.end(), instance.tags.begin(), instance.tags.end());
  return p;
}

Var TarsModel::loss(Binder& b, const Prepared& in, std::mt19937_64* dropout_rng) const {
  Var states = encoder_.encode(b, inputs_(b, in.tokens, cfg_.word_dropout, dropout_rng));
  return cross_entropy(head_(b, states), in.targets);
}

Var TarsModel::batch_loss(Binder& b, std::span<const Prepared* const> batch, std::mt19937_64* dropout_rng) const {
  if (batch.empty()) throw Error("tars: empty batch");
  Var total = loss(b, *batch[0], dropout_rng);
  for (std::size_t i = 1; i < batch.size(); ++i) total = add(total, loss(b, *batch[i], dropout_rng));
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

std::vector<double> TarsModel::inside_probabilities(const std::vector<std::string>& sentence_tokens,
                                                    const std::string& phrase) const {
  if (sentence_tokens.empty()) return {};
  BinaryInstance inst;
  inst.phrase_tokens = phrase_tokens(phrase);
  inst.sentence_tokens = sentence_tokens;
  inst.tags.assign(sentence_tokens.size(), 0);
  const Prepared p = prepare(inst);
  Tape tape;
  Binder b(tape);
  const Matrix z = head_(b, encoder_.encode(b, inputs_(b, p.tokens))).value();
  std::vector<double> out;
  for (Eigen::Index r = static_cast<Eigen::Index>(inst.sentence_offset()); r < z.rows(); ++r)
    out.push_back(1.0 / (1.0 + std::exp(z(r, 0) - z(r, 1))));
  return out;
}

std::vector<ScoredSpan> TarsModel::predict_scored(const Sentence& sentence, std::span<const Candidate> candidates) const {
  if (candidates.empty()) throw Error("tars_predict: empty candidate list");
  const std::vector<std::string> tokens = sentence.token_texts();
  std::vector<std::vector<double>> probs;
  for (const Candidate& c : candidates) probs.push_back(inside_probabilities(tokens, c.phrase));
  return aggregate_spans(probs, candidates);
}

std::vector<Span> TarsModel::predict(const Sentence& sentence, std::span<const Candidate> candidates) const {
  std::vector<Span> out;
  for (const ScoredSpan& s : predict_scored(sentence, candidates)) out.push_back(s.span);
  return out;
}

std::vector<Span> tars_predict(const TarsModel& model, const Sentence& sentence, std::span<const Candidate> candidates) {
  return model.predict(sentence, candidates);
}

void TarsModel::save(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + "family"] = family_name(ModelFamily::Tars);
  ck.meta[prefix + "seed"] = std::to_string(cfg_.seed);
  put_transformer_config(ck, prefix, cfg_.transformer);
  ck.lists[prefix + "vocab.words"] = inputs_.words().items();
  ck.lists[prefix + "vocab.shapes"] = inputs_.shapes().items();
  if (inputs_.statics()) put_static_table(ck, prefix + "static", *inputs_.statics());
  std::vector<std::string> labels, phrases;
  for (const auto& [l, p] : trained_) {
    labels.push_back(l);
    phrases.push_back(p);
  }
  ck.lists[prefix + "labels"] = labels;
  ck.lists[prefix + "phrases"] = phrases;
  ck.put_params(prefix + "param.", params_);
}

TarsModel TarsModel::load(const Checkpoint& ck, const std::string& prefix) {
  if (ck.get_meta(prefix + "family") != family_name(ModelFamily::Tars))
    throw DataError("checkpoint: not a tars model (family " + ck.get_meta(prefix + "family") + ")");
  TarsConfig cfg;
  cfg.seed = std::stoull(ck.get_meta(prefix + "seed", "1"));
  cfg.transformer = transformer_config_from(ck, prefix);
  const auto& labels = ck.get_list(prefix + "labels");
  const auto& phrases = ck.get_list(prefix + "phrases");
  if (labels.size() != phrases.size()) throw DataError("checkpoint: tars labels and phrases differ in length");
  Verbalization trained;
  for (std::size_t i = 0; i < labels.size(); ++i) trained[labels[i]] = phrases[i];
  TarsModel model(cfg, vocabulary_from(ck.get_list(prefix + "vocab.words")),
                  vocabulary_from(ck.get_list(prefix + "vocab.shapes")), get_static_table(ck, prefix + "static"),
                  std::move(trained));
  ck.load_params(prefix + "param.", model.params_);
  return model;
}

// --- training ---------------------------------------------------------------------------

EvalReport evaluate_tars(const TarsModel& model, std::span<const Sentence> gold, std::span<const Candidate> candidates,
                         RunMeta meta) {
  std::vector<std::vector<Span>> spans;
  for (const Sentence& s : gold) spans.push_back(model.predict(s, candidates));
  std::vector<Label> inventory;
  for (const Candidate& c : candidates) inventory.push_back(c.label);
  EvalReport r = score_aligned(gold, spans, inventory);
  r.meta = std::move(meta);
  return r;
}

TarsTraining train_tars(const Corpus& corpus, const Verbalization& verbalization, const TarsConfig& cfg,
                        const OptimizerConfig& opt_in, const Resources& resources) {
  if (corpus.train.empty()) throw DataError("training split is empty");
  if (cfg.epochs < 0 || cfg.batch_size <= 0) throw Error("train_tars: epochs must be >= 0 and batch_size > 0");
  opt_in.validate();
  validate_verbalization(verbalization);
  check_label_inventory(corpus);
  Corpus inv = corpus;
  inv.recompute_labels();

  Verbalization trained;
  std::vector<std::string> extra{kSeparatorToken};
  for (const Label& l : inv.labels) {
    auto it = verbalization.find(l);
    if (it == verbalization.end()) throw DataError("no verbalization for label " + l);
    trained[l] = it->second;
    for (const std::string& t : phrase_tokens(it->second)) extra.push_back(t);
  }
  auto [words, shapes] = build_vocabularies(corpus.train, extra);
  TarsTraining out{TarsModel(cfg, std::move(words), std::move(shapes), resources.static_table, trained), {}, 0};
  TarsModel& model = out.model;

  const std::vector<BinaryInstance> instances = reformulate(corpus.train, inv.labels, verbalization);
  std::vector<TarsModel::Prepared> prepared;
  prepared.reserve(instances.size());
  for (const BinaryInstance& inst : instances) prepared.push_back(model.prepare(inst));
  const std::vector<Candidate> candidates = candidates_from(trained);

  OptimizerConfig opt = opt_in;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  if (opt.warmup_fraction > 0.0 && opt.total_steps == 0)
    opt.total_steps = (prepared.size() + bs - 1) / bs * static_cast<std::size_t>(cfg.epochs);
  SchedulerState sched = make_scheduler(opt);
  const std::vector<Parameter*> params = model.params().all();
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  double best_dev = -1.0;
  std::vector<Matrix> best_values;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<const TarsModel::Prepared*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&prepared[order[i]]);
      Tape tape;
      Binder b(tape);
      Var loss = model.batch_loss(b, batch, &dropout_rng);
      loss_sum += loss.scalar() * static_cast<double>(batch.size());
      model.params().zero_grad();
      tape.backward(loss);
      sched = optimizer_step(params, opt, std::move(sched));
    }
    TrainingLogEntry entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(prepared.size());
    if (!corpus.dev.empty()) {
      entry.dev_f1 = evaluate_tars(model, corpus.dev, candidates).micro_f1();
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
