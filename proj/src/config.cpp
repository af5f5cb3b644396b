#include "acklab/config.hpp"

#include "acklab/checkpoint.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace acklab {

const std::map<std::string, std::string>& known_config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"model.family", "flair-stack | mini-transformer-finetune | tars"},
      {"corpus.path", "corpus directory with train/dev/test.conll"},
      {"corpus.id", "corpus name used in reports (default: directory name)"},
      {"corpus.scheme", "bio | bioes, tag scheme used for training"},
      {"ablation", "none | org-merge | no-misc | strings-plus-flert"},
      {"seed", "random seed for initialisation, shuffling and dropout"},
      {"epochs", "training epochs"},
      {"batch_size", "mini-batch size (sentences, or binary instances for tars)"},
      {"word_dropout", "probability of replacing a word id by <unk> (transformer inputs)"},
      {"lstm.hidden", "BiLSTM hidden size per direction"},
      {"context.window", "document context tokens on each side (transformer)"},
      {"transformer.layers", "encoder blocks"},
      {"transformer.heads", "attention heads"},
      {"transformer.dim", "model dimension"},
      {"transformer.ff", "feed-forward width"},
      {"transformer.max_positions", "learned position table size"},
      {"optimizer.algorithm", "sgd | adaptive-moments"},
      {"optimizer.lr", "learning rate"},
      {"optimizer.anneal", "plateau annealing factor"},
      {"optimizer.patience", "epochs without dev improvement before annealing"},
      {"optimizer.clip", "global gradient-norm clip, 0 disables"},
      {"optimizer.warmup", "warmup fraction of total steps (linear decay after)"},
      {"tars.verbalization_path", "LABEL<TAB>phrase file"},
      {"stack.static", "flair-stack: include static vectors"},
      {"stack.contextual", "flair-stack: include contextual string embeddings"},
      {"flert.epochs", "strings-plus-flert: epochs for the transformer stage"},
      {"flert.lr", "strings-plus-flert: learning rate for the transformer stage"},
      {"embeddings.static_path", "pretrained static vectors (text format)"},
      {"embeddings.lm_forward", "forward char-LM checkpoint"},
      {"embeddings.lm_backward", "backward char-LM checkpoint"},
      {"embeddings.text_path", "plain text (one sentence per line) for fitting embeddings"},
      {"embeddings.synth_data", "data directory used to generate plain text when no text_path is given"},
      {"embeddings.synth_sentences", "number of generated plain sentences"},
      {"embeddings.synth_seed", "seed for generated plain text"},
      {"embeddings.cache_dir", "directory where fitted embeddings are stored and reused"},
      {"static.dim", "fitted static vector dimension"},
      {"static.window", "co-occurrence window"},
      {"static.min_count", "minimum token count for the static vocabulary"},
      {"lm.hidden", "char-LM hidden size"},
      {"lm.embedding", "char-LM byte embedding size"},
      {"lm.sequence_length", "char-LM truncated BPTT length"},
      {"lm.batch", "char-LM parallel streams"},
      {"lm.epochs", "char-LM epochs"},
      {"lm.lr", "char-LM learning rate"},
      {"output.save_model", "write model.ckpt for each run (true/false)"},
  };
  return keys;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

// Parses "key = value" into `cfg`; returns false for lines that are not pairs.
bool parse_pair(const std::string& line, Config& cfg, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) return false;
  const std::string key = trim(std::string_view(line).substr(0, eq));
  const std::string value = trim(std::string_view(line).substr(eq + 1));
  if (key.empty()) throw DataError(where + ": empty key");
  if (!known_config_keys().count(key)) throw DataError(where + ": unknown key '" + key + "'");
  cfg.set(key, value);
  return true;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = origin + ":" + std::to_string(i + 1);
    if (!parse_pair(line, cfg, where)) throw DataError(where + ": expected 'key = value'");
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  Config c = parse(read_file(path), path);
  c.base_ = std::filesystem::path(path).parent_path();
  return c;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("config: " + key + " = '" + s + "' is not an integer");
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("config: " + key + " = '" + s + "' is not a non-negative integer");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_double(it->second);
  } catch (const DataError&) {
    throw DataError("config: " + key + " = '" + it->second + "' is not a number");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string v = lowercase(it->second);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw DataError("config: " + key + " = '" + it->second + "' is not a boolean");
}

std::string Config::get_path(const std::string& key, const std::string& fallback) const {
  const std::string v = get(key, fallback);
  if (v.empty()) return v;
  std::filesystem::path p(v);
  if (p.is_relative() && !base_.empty()) p = base_ / p;
  return p.lexically_normal().string();
}

Config Config::merged(const Config& other) const {
  Config out = *this;
  for (const auto& [k, v] : other.values_) out.values_[k] = v;
  return out;
}

ModelFamily config_family(const Config& c) { return parse_family(c.get("model.family", "flair-stack")); }

TaggerConfig tagger_config(const Config& c) {
  TaggerConfig t;
  t.family = config_family(c);
  t.scheme = parse_scheme(c.get("corpus.scheme", "bioes"));
  t.lstm_hidden = c.get_int("lstm.hidden", t.lstm_hidden);
  t.context_window = c.get_int("context.window", t.context_window);
  t.epochs = c.get_int("epochs", t.epochs);
  t.batch_size = c.get_int("batch_size", t.batch_size);
  t.word_dropout = c.get_double("word_dropout", t.word_dropout);
  t.seed = c.get_u64("seed", t.seed);
  t.stack_static = c.get_bool("stack.static", t.stack_static);
  t.stack_contextual = c.get_bool("stack.contextual", t.stack_contextual);
  t.transformer.layers = c.get_int("transformer.layers", t.transformer.layers);
  t.transformer.heads = c.get_int("transformer.heads", t.transformer.heads);
  t.transformer.dim = c.get_int("transformer.dim", t.transformer.dim);
  t.transformer.ff = c.get_int("transformer.ff", t.transformer.ff);
  t.transformer.max_positions = c.get_int("transformer.max_positions", t.transformer.max_positions);
  if (t.epochs < 0) throw DataError("config: epochs must be >= 0");
  if (t.batch_size <= 0) throw DataError("config: batch_size must be > 0");
  if (t.context_window < 0) throw DataError("config: context.window must be >= 0");
  return t;
}

TarsConfig tars_config(const Config& c) {
  const TaggerConfig t = tagger_config(c);
  TarsConfig out;
  out.transformer = t.transformer;
  out.epochs = t.epochs;
  out.batch_size = c.get_int("batch_size", out.batch_size);
  out.word_dropout = t.word_dropout;
  out.seed = t.seed;
  return out;
}

OptimizerConfig optimizer_config(const Config& c, ModelFamily family) {
  OptimizerConfig o = family == ModelFamily::FlairStack ? OptimizerConfig::crf_default() : OptimizerConfig::finetune_default();
  if (c.has("optimizer.algorithm")) o.algorithm = parse_algorithm(c.get("optimizer.algorithm", ""));
  o.learning_rate = c.get_double("optimizer.lr", o.learning_rate);
  o.anneal_factor = c.get_double("optimizer.anneal", o.anneal_factor);
  o.patience = c.get_int("optimizer.patience", o.patience);
  o.warmup_fraction = c.get_double("optimizer.warmup", o.warmup_fraction);
  if (c.has("optimizer.clip")) {
    const double clip = c.get_double("optimizer.clip", 0.0);
    if (clip > 0.0)
      o.clip_norm = clip;
    else
      o.clip_norm.reset();
  }
  o.validate();
  return o;
}

CharLmConfig char_lm_config(const Config& c) {
  CharLmConfig l;
  l.hidden = c.get_int("lm.hidden", l.hidden);
  l.embedding = c.get_int("lm.embedding", l.embedding);
  l.sequence_length = c.get_int("lm.sequence_length", l.sequence_length);
  l.batch = c.get_int("lm.batch", l.batch);
  l.epochs = c.get_int("lm.epochs", l.epochs);
  l.learning_rate = c.get_double("lm.lr", l.learning_rate);
  l.seed = c.get_u64("seed", l.seed);
  return l;
}

StaticFitConfig static_fit_config(const Config& c) {
  StaticFitConfig s;
  s.dimension = c.get_int("static.dim", s.dimension);
  s.window = c.get_int("static.window", s.window);
  s.min_count = static_cast<std::size_t>(c.get_int("static.min_count", static_cast<int>(s.min_count)));
  s.seed = c.get_u64("seed", s.seed);
  return s;
}

Verbalization verbalization_config(const Config& c) {
  const std::string path = c.get_path("tars.verbalization_path");
  return path.empty() ? default_verbalization() : load_verbalization(path);
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  Manifest m;
  m.global.set_base_dir(base_dir);
  std::set<std::string> names;
  Config* current = nullptr;
  std::vector<std::pair<std::string, Config>> raw;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "manifest:" + std::to_string(i + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError(where + ": unterminated section header");
      const std::string header = trim(std::string_view(line).substr(1, line.size() - 2));
      if (header == "global") {
        current = &m.global;
        continue;
      }
      if (header.rfind("run ", 0) != 0) throw DataError(where + ": expected [global] or [run NAME]");
      const std::string name = trim(std::string_view(header).substr(4));
      if (name.empty()) throw DataError(where + ": run without a name");
      if (!names.insert(name).second) throw DataError(where + ": duplicate run name '" + name + "'");
      raw.emplace_back(name, Config{});
      current = &raw.back().second;
      continue;
    }
    if (!current) throw DataError(where + ": key outside a section");
    if (!parse_pair(line, *current, where)) throw DataError(where + ": expected 'key = value'");
  }
  if (raw.empty()) throw DataError("manifest: no runs");
  for (auto& [name, cfg] : raw) {
    Config merged = m.global.merged(cfg);
    merged.set_base_dir(base_dir);
    m.runs.push_back({name, std::move(merged)});
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  return parse_manifest(read_file(path), std::filesystem::path(path).parent_path());
}

}  // namespace acklab
