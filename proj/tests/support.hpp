#pragma once

// Shared fixtures: seeded generators, temp directories and small embedding
// resources fitted once per test binary.

#include "acklab/char_lm.hpp"
#include "acklab/corpus.hpp"
#include "acklab/embeddings.hpp"
#include "acklab/synth.hpp"
#include "acklab/tagger.hpp"
#include "acklab/tokenize.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace acklab::testing {

inline std::string data_dir() { return ACKLAB_DATA_DIR; }

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("acklab-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -2.0, double hi = 2.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
  return m;
}

// Random non-overlapping spans over n tokens from `labels`.
inline std::vector<Span> random_spans(std::mt19937_64& rng, int n, const std::vector<Label>& labels) {
  std::vector<Span> out;
  int i = 0;
  while (i < n) {
    if (uniform_int(rng, 0, 2) == 0) {
      const int len = uniform_int(rng, 1, std::min(4, n - i));
      out.push_back({i, i + len, labels[uniform_int(rng, 0, static_cast<int>(labels.size()) - 1)]});
      i += len;
    } else {
      ++i;
    }
  }
  return out;
}

inline Sentence words(const std::string& id, const std::string& text, std::vector<Span> spans = {}) {
  std::vector<std::string> toks;
  for (const Token& t : tokenize(text)) toks.push_back(t.text);
  return make_sentence(id, toks, std::move(spans));
}

inline SynthConfig synth_config(std::size_t train, std::size_t dev, std::size_t test, std::uint64_t seed) {
  SynthConfig sc = load_synth_resources(data_dir());
  sc.train = train;
  sc.dev = dev;
  sc.test = test;
  sc.seed = seed;
  return sc;
}

// Static table and two char-LMs small enough for unit tests.
inline const Resources& small_resources() {
  static const Resources r = [] {
    const SynthConfig sc = load_synth_resources(data_dir());
    const std::vector<std::string> lines = generate_plain_sentences(sc, 200, 5);
    std::vector<std::vector<std::string>> toks;
    for (const std::string& l : lines) {
      std::vector<std::string> t;
      for (const Token& tok : tokenize(l)) t.push_back(tok.text);
      toks.push_back(std::move(t));
    }
    StaticFitConfig sf;
    sf.dimension = 12;
    CharLmConfig lc;
    lc.hidden = 12;
    lc.embedding = 8;
    lc.epochs = 1;
    Resources out;
    out.static_table = std::make_shared<const StaticTable>(fit_static_table(toks, sf));
    out.forward_lm = std::make_shared<const CharLm>(train_char_lm(lines, Direction::Forward, lc).model);
    out.backward_lm = std::make_shared<const CharLm>(train_char_lm(lines, Direction::Backward, lc).model);
    return out;
  }();
  return r;
}

}  // namespace acklab::testing
