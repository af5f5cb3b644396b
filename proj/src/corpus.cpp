#include "acklab/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace acklab {

namespace labels {
const std::vector<Label>& acknowledgement_types() {
  static const std::vector<Label> kTypes = {kFund, kGrnb, kInd, kUni, kCor, kMisc};
  return kTypes;
}
}  // namespace labels

const char* scheme_name(Scheme s) { return s == Scheme::Bio ? "BIO" : "BIOES"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "BIO" || name == "bio") return Scheme::Bio;
  if (name == "BIOES" || name == "bioes") return Scheme::Bioes;
  throw DataError("unknown tagging scheme: " + name);
}

std::string to_string(const Span& s) {
  return s.label + "(" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

std::string Sentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

std::string Sentence::meta_value(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return fallback;
}

void Sentence::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

std::vector<std::string> Sentence::token_texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::string Sentence::span_text(const Span& s) const {
  std::string out;
  for (int i = s.start; i < s.end; ++i) {
    if (i > s.start) out += ' ';
    out += tokens.at(static_cast<std::size_t>(i)).text;
  }
  return out;
}

Sentence make_sentence(std::string id, const std::vector<std::string>& tokens, std::vector<Span> spans) {
  Sentence s;
  s.id = std::move(id);
  std::size_t offset = 0;
  for (const auto& t : tokens) {
    s.tokens.push_back(Token{t, offset});
    offset += t.size() + 1;
  }
  s.spans = std::move(spans);
  normalize_spans(s);
  return s;
}

void validate_spans(const Sentence& sentence) {
  const int n = static_cast<int>(sentence.tokens.size());
  for (const Span& s : sentence.spans) {
    if (s.start < 0 || s.start >= s.end || s.end > n)
      throw DataError("sentence " + sentence.id + ": span " + to_string(s) + " out of range for " + std::to_string(n) +
                      " tokens");
    if (s.label.empty()) throw DataError("sentence " + sentence.id + ": span with empty label");
  }
  std::string collisions;
  for (std::size_t i = 0; i < sentence.spans.size(); ++i)
    for (std::size_t j = i + 1; j < sentence.spans.size(); ++j)
      if (sentence.spans[i].overlaps(sentence.spans[j]))
        collisions += " " + to_string(sentence.spans[i]) + "/" + to_string(sentence.spans[j]);
  if (!collisions.empty()) throw DataError("sentence " + sentence.id + ": overlapping spans" + collisions);
}

void normalize_spans(Sentence& sentence) {
  std::sort(sentence.spans.begin(), sentence.spans.end());
  validate_spans(sentence);
}

void Corpus::recompute_labels() {
  std::set<Label> seen;
  for (const auto* split : {&train, &dev, &test})
    for (const auto& s : *split)
      for (const auto& sp : s.spans) seen.insert(sp.label);
  labels.assign(seen.begin(), seen.end());
}

void Corpus::validate() const {
  std::set<Label> inventory(labels.begin(), labels.end());
  std::map<std::string, const char*> owner;
  const std::pair<const std::vector<Sentence>*, const char*> splits[] = {{&train, "train"}, {&dev, "dev"}, {&test, "test"}};
  for (const auto& [split, name] : splits) {
    for (const auto& s : *split) {
      validate_spans(s);
      for (const auto& sp : s.spans)
        if (!inventory.count(sp.label))
          throw DataError("sentence " + s.id + ": label " + sp.label + " not in the corpus inventory");
      auto [it, inserted] = owner.emplace(s.id, name);
      if (!inserted && std::string(it->second) != name)
        throw DataError("sentence " + s.id + " appears in both " + it->second + " and " + name);
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> encode_tags(const Sentence& sentence, Scheme scheme) {
  std::vector<std::string> tags(sentence.tokens.size(), "O");
  for (const Span& s : sentence.spans) {
    if (scheme == Scheme::Bio) {
      tags.at(static_cast<std::size_t>(s.start)) = "B-" + s.label;
      for (int i = s.start + 1; i < s.end; ++i) tags.at(static_cast<std::size_t>(i)) = "I-" + s.label;
    } else if (s.length() == 1) {
      tags.at(static_cast<std::size_t>(s.start)) = "S-" + s.label;
    } else {
      tags.at(static_cast<std::size_t>(s.start)) = "B-" + s.label;
      for (int i = s.start + 1; i < s.end - 1; ++i) tags.at(static_cast<std::size_t>(i)) = "I-" + s.label;
      tags.at(static_cast<std::size_t>(s.end - 1)) = "E-" + s.label;
    }
  }
  return tags;
}

std::vector<std::string> encode_bioes(const Sentence& sentence) { return encode_tags(sentence, Scheme::Bioes); }

namespace {

struct ParsedTag {
  char prefix = 'O';
  Label label;
};

ParsedTag parse_tag(const std::string& tag) {
  if (tag == "O") return {};
  if (tag.size() < 3 || tag[1] != '-' || std::string_view("BIES").find(tag[0]) == std::string_view::npos)
    throw DataError("unknown tag '" + tag + "'");
  return {tag[0], tag.substr(2)};
}

}  // namespace

DecodeResult decode_bioes(std::span<const std::string> tags) {
  DecodeResult out;
  bool open = false;
  Span current;
  auto close = [&](int end) {
    if (!open) return;
    current.end = end;
    out.spans.push_back(current);
    open = false;
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const ParsedTag t = parse_tag(tags[static_cast<std::size_t>(i)]);
    switch (t.prefix) {
      case 'O':
        close(i);
        break;
      case 'B':
        close(i);
        current = Span{i, i + 1, t.label};
        open = true;
        break;
      case 'S':
        close(i);
        out.spans.push_back(Span{i, i + 1, t.label});
        break;
      case 'I':
      case 'E': {
        const bool continues = open && current.label == t.label;
        if (!continues) {
          close(i);
          current = Span{i, i + 1, t.label};
          open = true;
          ++out.repairs;
        }
        if (t.prefix == 'E') close(i + 1);
        break;
      }
    }
  }
  close(static_cast<int>(tags.size()));
  return out;
}

std::vector<std::string> tag_inventory(std::span<const Label> labels, Scheme scheme) {
  std::vector<std::string> tags = {"O"};
  for (const Label& l : labels) {
    tags.push_back("B-" + l);
    tags.push_back("I-" + l);
    if (scheme == Scheme::Bioes) {
      tags.push_back("E-" + l);
      tags.push_back("S-" + l);
    }
  }
  return tags;
}

// ---------------------------------------------------------------------------

ConllSplit parse_conll(std::string_view text, std::string_view id_prefix) {
  ConllSplit out;
  bool saw_bio_only = false;
  std::vector<std::string> tokens, tags;
  std::vector<std::pair<std::string, std::string>> meta;

  auto flush = [&]() {
    if (tokens.empty()) {
      if (!meta.empty()) {
        // Trailing comments without tokens are not a sentence.
        meta.clear();
      }
      return;
    }
    DecodeResult dec = decode_bioes(tags);
    for (const auto& tag : tags) {
      if (tag.size() > 1 && (tag[0] == 'E' || tag[0] == 'S')) {
        out.scheme_detected = true;
        out.scheme = Scheme::Bioes;
      } else if (tag.size() > 1) {
        saw_bio_only = true;
      }
    }
    out.repairs += dec.repairs;
    Sentence s = make_sentence("", tokens, std::move(dec.spans));
    s.meta = std::move(meta);
    s.id = s.meta_value("id", std::string(id_prefix) + "-" + std::to_string(out.sentences.size()));
    out.sentences.push_back(std::move(s));
    tokens.clear();
    tags.clear();
    meta.clear();
  };

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#' && line.find('\t') == std::string_view::npos) {
      if (!tokens.empty())
        throw DataError("line " + std::to_string(lineno) + ": comment inside a sentence");
      std::string_view body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.remove_prefix(1);
      const auto eq = body.find(" = ");
      if (eq == std::string_view::npos) {
        meta.emplace_back(std::string(body), "");
      } else {
        meta.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 3)));
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos)
      throw DataError("line " + std::to_string(lineno) + ": expected 2 tab-separated fields");
    std::string token(line.substr(0, tab));
    std::string tag(line.substr(tab + 1));
    if (token.empty() || tag.empty())
      throw DataError("line " + std::to_string(lineno) + ": empty token or tag field");
    try {
      parse_tag(tag);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    tokens.push_back(std::move(token));
    tags.push_back(std::move(tag));
  }
  flush();
  if (!out.scheme_detected && saw_bio_only) {
    out.scheme_detected = true;
    out.scheme = Scheme::Bio;
  }
  return out;
}

namespace {

void write_sentence(std::ostringstream& os, const Sentence& s, const std::vector<std::string>& tags) {
  for (const auto& [k, v] : s.meta) {
    os << "# " << k;
    if (!v.empty()) os << " = " << v;
    os << "\n";
  }
  for (std::size_t i = 0; i < s.tokens.size(); ++i) os << s.tokens[i].text << '\t' << tags[i] << '\n';
  os << '\n';
}

}  // namespace

std::string write_conll(std::span<const Sentence> sentences, Scheme scheme) {
  std::ostringstream os;
  for (const Sentence& s : sentences) {
    validate_spans(s);
    write_sentence(os, s, encode_tags(s, scheme));
  }
  return os.str();
}

std::string write_conll_predictions(std::span<const Sentence> sentences,
                                    std::span<const std::vector<Span>> predictions, Scheme scheme) {
  if (sentences.size() != predictions.size()) throw Error("write_conll_predictions: size mismatch");
  std::ostringstream os;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    Sentence copy = sentences[i];
    copy.spans = predictions[i];
    normalize_spans(copy);
    // Scoring a prediction file matches sentences by id.
    if (copy.meta_value("id").empty() && !copy.id.empty()) copy.meta.insert(copy.meta.begin(), {"id", copy.id});
    write_sentence(os, copy, encode_tags(copy, scheme));
  }
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!os) throw DataError("failed writing " + path);
}

Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir);
  Corpus c;
  bool any_bioes = false, any_bio = false;
  const std::pair<std::vector<Sentence>*, const char*> splits[] = {{&c.train, "train"}, {&c.dev, "dev"}, {&c.test, "test"}};
  for (const auto& [split, name] : splits) {
    const fs::path file = fs::path(dir) / (std::string(name) + ".conll");
    if (!fs::exists(file)) continue;
    ConllSplit parsed = parse_conll(read_file(file.string()), name);
    if (parsed.scheme_detected) (parsed.scheme == Scheme::Bioes ? any_bioes : any_bio) = true;
    *split = std::move(parsed.sentences);
  }
  c.scheme = (any_bio && !any_bioes) ? Scheme::Bio : Scheme::Bioes;
  c.recompute_labels();
  c.validate();
  return c;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file((fs::path(dir) / "train.conll").string(), write_conll(corpus.train, corpus.scheme));
  write_file((fs::path(dir) / "dev.conll").string(), write_conll(corpus.dev, corpus.scheme));
  write_file((fs::path(dir) / "test.conll").string(), write_conll(corpus.test, corpus.scheme));
}

Corpus load_corpus_or_split(const std::string& path) {
  if (std::filesystem::is_directory(path)) return load_corpus(path);
  ConllSplit parsed = parse_conll(read_file(path), "test");
  Corpus c;
  c.test = std::move(parsed.sentences);
  c.scheme = parsed.scheme;
  c.recompute_labels();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

SplitStats split_stats(const std::vector<Sentence>& split) {
  SplitStats st;
  st.sentences = split.size();
  for (const auto& s : split) {
    std::string domains = s.meta_value("domain");
    std::size_t start = 0;
    while (!domains.empty() && start <= domains.size()) {
      std::size_t comma = domains.find(',', start);
      if (comma == std::string::npos) comma = domains.size();
      std::string d = domains.substr(start, comma - start);
      while (!d.empty() && d.front() == ' ') d.erase(d.begin());
      while (!d.empty() && d.back() == ' ') d.pop_back();
      if (!d.empty()) ++st.per_domain[d];
      start = comma + 1;
    }
    for (const auto& sp : s.spans) {
      ++st.per_type[sp.label];
      ++st.entities;
    }
  }
  return st;
}

void add_into(SplitStats& total, const SplitStats& part) {
  total.sentences += part.sentences;
  total.entities += part.entities;
  for (const auto& [k, v] : part.per_domain) total.per_domain[k] += v;
  for (const auto& [k, v] : part.per_type) total.per_type[k] += v;
}

nlohmann::ordered_json split_json(const SplitStats& s) {
  nlohmann::ordered_json j;
  j["sentences"] = s.sentences;
  j["entities"] = s.entities;
  j["per_domain"] = s.per_domain;
  j["per_type"] = s.per_type;
  return j;
}

}  // namespace

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.train = split_stats(corpus.train);
  st.dev = split_stats(corpus.dev);
  st.test = split_stats(corpus.test);
  add_into(st.total, st.train);
  add_into(st.total, st.dev);
  add_into(st.total, st.test);
  return st;
}

std::string stats_to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["train"] = split_json(stats.train);
  j["test"] = split_json(stats.test);
  j["dev"] = split_json(stats.dev);
  j["total"] = split_json(stats.total);
  return j.dump(2) + "\n";
}

}  // namespace acklab
