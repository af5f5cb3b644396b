#pragma once

// Per-token feature sources and their concatenation.

#include "acklab/char_lm.hpp"
#include "acklab/corpus.hpp"

#include <memory>
#include <unordered_map>

namespace acklab {

// Static word vectors. Lookup lowercases the token; misses give zeros.
class StaticTable {
 public:
  StaticTable() = default;
  StaticTable(std::vector<std::string> words, Matrix vectors);

  Eigen::Index dimension() const { return vectors_.cols(); }
  std::size_t size() const { return words_.size(); }
  bool contains(const std::string& token) const;
  RowVector embed(const std::string& token) const;
  const std::vector<std::string>& words() const { return words_; }
  const Matrix& vectors() const { return vectors_; }

  // "token v1 v2 ... vD" per line.
  std::string to_text() const;

 private:
  std::vector<std::string> words_;
  Matrix vectors_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

struct StaticLoadResult {
  StaticTable table;
  std::vector<std::string> warnings;  // duplicate tokens
};

// Dimension comes from the first line. Throws DataError for an empty file
// ("no entries") or a line with a different dimension (with its line number).
StaticLoadResult parse_static(std::string_view text);
StaticTable load_static(const std::string& path);
void save_static(const StaticTable& table, const std::string& path);

RowVector embed_static(const StaticTable& table, const std::string& token);

struct StaticFitConfig {
  int dimension = 50;
  int window = 3;
  std::size_t max_vocabulary = 4000;
  std::size_t min_count = 2;
  std::uint64_t seed = 1;
};

// Count-based vectors: positive PMI over a symmetric co-occurrence window,
// truncated to its top `dimension` eigenpairs by subspace iteration, rows
// scaled to unit length.
StaticTable fit_static_table(const std::vector<std::vector<std::string>>& sentences, const StaticFitConfig& cfg);

// Tokens of the neighbouring sentences of a document, in reading order.
struct ContextWindow {
  std::vector<std::string> left;
  std::vector<std::string> right;
  bool empty() const { return left.empty() && right.empty(); }
};

// Concatenated forward/backward char-LM states per token [n x 2H]. The
// character stream is BOS followed by the tokens joined with single spaces.
Matrix embed_contextual(const CharLm& fwd, const CharLm& bwd, const Sentence& sentence);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual Matrix embed(const Sentence& sentence, const ContextWindow& context) const = 0;
  Matrix embed(const Sentence& sentence) const { return embed(sentence, ContextWindow{}); }
};

class StaticEmbedder : public Embedder {
 public:
  explicit StaticEmbedder(std::shared_ptr<const StaticTable> table);
  std::string name() const override { return "static"; }
  Eigen::Index dimension() const override { return table_->dimension(); }
  Matrix embed(const Sentence& sentence, const ContextWindow& context) const override;
  using Embedder::embed;
  const std::shared_ptr<const StaticTable>& table() const { return table_; }

 private:
  std::shared_ptr<const StaticTable> table_;
};

class ContextualStringEmbedder : public Embedder {
 public:
  // Throws Error when the models differ in hidden size or direction.
  ContextualStringEmbedder(std::shared_ptr<const CharLm> fwd, std::shared_ptr<const CharLm> bwd);
  std::string name() const override { return "contextual-strings"; }
  Eigen::Index dimension() const override { return 2 * fwd_->hidden(); }
  Matrix embed(const Sentence& sentence, const ContextWindow& context) const override;
  using Embedder::embed;
  const std::shared_ptr<const CharLm>& forward() const { return fwd_; }
  const std::shared_ptr<const CharLm>& backward() const { return bwd_; }

 private:
  std::shared_ptr<const CharLm> fwd_, bwd_;
};

using EmbedderPtr = std::shared_ptr<const Embedder>;

class EmbeddingStack {
 public:
  EmbeddingStack() = default;
  // Throws Error when `members` is empty.
  explicit EmbeddingStack(std::vector<EmbedderPtr> members);

  Eigen::Index dimension() const;
  const std::vector<EmbedderPtr>& members() const { return members_; }
  // Column blocks in member order.
  Matrix embed(const Sentence& sentence, const ContextWindow& context = {}) const;

 private:
  std::vector<EmbedderPtr> members_;
};

Matrix stack(std::span<const EmbedderPtr> embedders, const Sentence& sentence, const ContextWindow& context = {});

}  // namespace acklab
