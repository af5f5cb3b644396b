#include "acklab/synth.hpp"

#include "acklab/checkpoint.hpp"
#include "acklab/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace acklab {

namespace {

struct TemplatePart {
  bool slot = false;
  std::string text;  // literal token or slot type
};

std::vector<TemplatePart> parse_template(const std::string& line) {
  std::vector<TemplatePart> parts;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
      parts.push_back({true, tok.substr(1, tok.size() - 2)});
    } else {
      parts.push_back({false, tok});
    }
  }
  return parts;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    out.push_back(line);
  }
  return out;
}

const std::vector<std::pair<std::string, double>>& domain_weights() {
  // Sentence counts per domain in the larger reference corpus.
  static const std::vector<std::pair<std::string, double>> kDomains = {
      {"oceanography", 127}, {"economics", 92}, {"social sciences", 351}, {"computer science", 173}};
  return kDomains;
}

// Largest-remainder allocation of `total` items to the proportion table.
std::vector<Label> allocate_types(const std::map<Label, double>& proportions, std::size_t total) {
  double mass = 0.0;
  for (const auto& [_, p] : proportions) mass += p;
  std::vector<std::pair<Label, double>> quotas;
  std::size_t assigned = 0;
  std::vector<Label> out;
  for (const auto& [label, p] : proportions) {
    const double q = static_cast<double>(total) * p / mass;
    const auto whole = static_cast<std::size_t>(std::floor(q));
    out.insert(out.end(), whole, label);
    assigned += whole;
    quotas.emplace_back(label, q - std::floor(q));
  }
  std::stable_sort(quotas.begin(), quotas.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) out.push_back(quotas[i % quotas.size()].first);
  return out;
}

class Filler {
 public:
  Filler(const SynthConfig& cfg, std::mt19937_64& rng) : cfg_(cfg), rng_(rng) {}

  // Returns tokens and spans for one template; `any_types` supplies types for
  // {ANY} slots in order.
  Sentence fill(const std::vector<TemplatePart>& parts, const std::vector<Label>& any_types) {
    std::vector<std::string> tokens;
    std::vector<Span> spans;
    std::size_t any_index = 0;
    for (const auto& part : parts) {
      if (!part.slot) {
        tokens.push_back(part.text);
        continue;
      }
      Label type = part.text == kAnySlot ? any_types.at(any_index++) : part.text;
      const auto& forms = cfg_.vocab.at(type);
      std::uniform_int_distribution<std::size_t> pick(0, forms.size() - 1);
      const std::string& form = forms[pick(rng_)];
      const int start = static_cast<int>(tokens.size());
      for (auto& t : tokenize(form)) tokens.push_back(std::move(t.text));
      spans.push_back(Span{start, static_cast<int>(tokens.size()), type});
    }
    return make_sentence("", tokens, std::move(spans));
  }

 private:
  const SynthConfig& cfg_;
  std::mt19937_64& rng_;
};

std::size_t count_any(const std::vector<TemplatePart>& parts) {
  return static_cast<std::size_t>(
      std::count_if(parts.begin(), parts.end(), [](const TemplatePart& p) { return p.slot && p.text == kAnySlot; }));
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.templates.empty()) throw DataError("synth: no templates");
  for (const auto& line : cfg.templates) {
    const auto parts = parse_template(line);
    bool has_slot = false;
    for (const auto& p : parts) {
      if (!p.slot) continue;
      has_slot = true;
      if (p.text == kAnySlot) {
        if (cfg.proportions.empty()) throw DataError("synth: template uses {ANY} but no proportion table is set: " + line);
        continue;
      }
      auto it = cfg.vocab.find(p.text);
      if (it == cfg.vocab.end() || it->second.empty())
        throw DataError("synth: undefined slot {" + p.text + "} in template: " + line);
    }
    if (!has_slot) throw DataError("synth: template without any slot: " + line);
  }
  for (const auto& [label, p] : cfg.proportions) {
    if (!(p >= 0.0)) throw DataError("synth: negative proportion for " + label);
    auto it = cfg.vocab.find(label);
    if (it == cfg.vocab.end() || it->second.empty()) throw DataError("synth: proportion for undefined type " + label);
  }
  if (cfg.train + cfg.dev + cfg.test == 0) throw DataError("synth: all split sizes are zero");
}

Corpus generate_synthetic(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::vector<TemplatePart>> templates;
  for (const auto& t : cfg.templates) templates.push_back(parse_template(t));

  const std::size_t total = cfg.train + cfg.dev + cfg.test;
  std::uniform_int_distribution<std::size_t> pick_template(0, templates.size() - 1);
  std::vector<std::size_t> chosen(total);
  std::size_t any_slots = 0;
  for (auto& c : chosen) {
    c = pick_template(rng);
    any_slots += count_any(templates[c]);
  }
  std::vector<Label> any_types;
  if (any_slots) {
    any_types = allocate_types(cfg.proportions, any_slots);
    std::shuffle(any_types.begin(), any_types.end(), rng);
  }

  std::vector<double> weights;
  for (const auto& [_, w] : domain_weights()) weights.push_back(w);
  std::discrete_distribution<std::size_t> pick_domain(weights.begin(), weights.end());
  std::bernoulli_distribution second_domain(0.1);
  std::uniform_int_distribution<std::size_t> doc_len(1, std::max<std::size_t>(1, cfg.max_document_sentences));

  Filler filler(cfg, rng);
  std::set<std::string> seen;
  std::vector<Sentence> all;
  all.reserve(total);
  std::size_t any_cursor = 0;
  std::size_t doc = 0, doc_left = 0;
  std::string doc_domain;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& parts = templates[chosen[i]];
    const std::size_t n_any = count_any(parts);
    std::vector<Label> types(any_types.begin() + static_cast<std::ptrdiff_t>(any_cursor),
                             any_types.begin() + static_cast<std::ptrdiff_t>(any_cursor + n_any));
    any_cursor += n_any;
    Sentence s;
    for (int attempt = 0; attempt < 64; ++attempt) {
      s = filler.fill(parts, types);
      if (!seen.count(s.text())) break;
    }
    seen.insert(s.text());

    if (doc_left == 0) {
      ++doc;
      doc_left = doc_len(rng);
      doc_domain = domain_weights()[pick_domain(rng)].first;
      if (second_domain(rng)) {
        const std::string other = domain_weights()[pick_domain(rng)].first;
        if (other != doc_domain) doc_domain += "," + other;
      }
    }
    --doc_left;

    const char* split = i < cfg.train ? "train" : (i < cfg.train + cfg.dev ? "dev" : "test");
    char num[24];
    std::snprintf(num, sizeof num, "%05zu", i);
    s.id = cfg.id_prefix + "-" + split + "-" + num;
    s.meta = {{"id", s.id},
              {"doc", cfg.id_prefix + "-doc-" + std::to_string(doc)},
              {"domain", doc_domain},
              {"source", cfg.id_prefix + "-seed-" + std::to_string(cfg.seed)}};
    all.push_back(std::move(s));
  }

  Corpus c;
  c.scheme = cfg.scheme;
  auto begin = all.begin();
  c.train.assign(std::make_move_iterator(begin), std::make_move_iterator(begin + static_cast<std::ptrdiff_t>(cfg.train)));
  begin += static_cast<std::ptrdiff_t>(cfg.train);
  c.dev.assign(std::make_move_iterator(begin), std::make_move_iterator(begin + static_cast<std::ptrdiff_t>(cfg.dev)));
  begin += static_cast<std::ptrdiff_t>(cfg.dev);
  c.test.assign(std::make_move_iterator(begin), std::make_move_iterator(all.end()));
  c.recompute_labels();
  c.validate();
  return c;
}

std::vector<std::string> generate_plain_sentences(const SynthConfig& cfg, std::size_t count, std::uint64_t seed) {
  SynthConfig c = cfg;
  c.train = count;
  c.dev = 0;
  c.test = 0;
  c.seed = seed;
  c.id_prefix = "plain";
  Corpus corpus = generate_synthetic(c);
  std::vector<std::string> out;
  out.reserve(corpus.train.size());
  for (const auto& s : corpus.train) out.push_back(s.text());
  return out;
}

std::vector<std::string> load_templates(const std::string& path) { return split_lines(read_file(path)); }

std::map<Label, std::vector<std::string>> load_vocab_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("vocabulary directory not found: " + dir);
  std::map<Label, std::vector<std::string>> vocab;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) vocab[f.stem().string()] = split_lines(read_file(f.string()));
  return vocab;
}

std::map<Label, double> parse_proportions(const std::string& spec) {
  std::map<Label, double> out;
  std::istringstream is(spec);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DataError("proportions: expected TYPE=value, got '" + item + "'");
    out[item.substr(0, eq)] = parse_double(item.substr(eq + 1));
  }
  return out;
}

std::map<Label, double> default_proportions() {
  return {{labels::kInd, 0.30}, {labels::kFund, 0.25}, {labels::kGrnb, 0.20},
          {labels::kUni, 0.12}, {labels::kMisc, 0.09}, {labels::kCor, 0.04}};
}

SynthConfig load_synth_resources(const std::string& data_dir) {
  namespace fs = std::filesystem;
  SynthConfig cfg;
  cfg.templates = load_templates((fs::path(data_dir) / "templates.txt").string());
  cfg.vocab = load_vocab_dir((fs::path(data_dir) / "vocab").string());
  cfg.proportions = default_proportions();
  return cfg;
}

}  // namespace acklab
