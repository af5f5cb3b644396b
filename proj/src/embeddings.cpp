#include "acklab/embeddings.hpp"

#include "acklab/checkpoint.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

namespace acklab {

// --- static vectors --------------------------------------------------------------

StaticTable::StaticTable(std::vector<std::string> words, Matrix vectors) : vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(words.size()) != vectors_.rows())
    throw ShapeError("static table: " + std::to_string(words.size()) + " words for " + shape_string(vectors_));
  for (std::string& w : words) w = lowercase(std::move(w));
  words_ = std::move(words);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<Eigen::Index>(i)).second)
      throw DataError("static table: duplicate entry '" + words_[i] + "'");
  }
}

bool StaticTable::contains(const std::string& token) const { return index_.count(lowercase(token)) > 0; }

RowVector StaticTable::embed(const std::string& token) const {
  auto it = index_.find(lowercase(token));
  if (it == index_.end()) return RowVector::Zero(dimension());
  return vectors_.row(it->second);
}

std::string StaticTable::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out += words_[i];
    for (Eigen::Index c = 0; c < vectors_.cols(); ++c) {
      out += ' ';
      out += format_double(vectors_(static_cast<Eigen::Index>(i), c));
    }
    out += '\n';
  }
  return out;
}

StaticLoadResult parse_static(std::string_view text) {
  std::vector<std::string> words;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::size_t> seen;
  std::vector<std::string> warnings;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      if (i >= line.size()) break;
      const std::size_t j = std::min(line.find(' ', i), line.size());
      fields.push_back(line.substr(i, j - i));
      i = j;
    }
    if (fields.size() < 2) throw DataError("static vectors line " + std::to_string(line_no) + ": no vector values");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim)
      throw DataError("static vectors line " + std::to_string(line_no) + ": dimension " +
                      std::to_string(fields.size() - 1) + ", expected " + std::to_string(dim));
    std::vector<double> values;
    values.reserve(dim);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      try {
        values.push_back(parse_double(fields[f]));
      } catch (const DataError&) {
        throw DataError("static vectors line " + std::to_string(line_no) + ": bad number '" + std::string(fields[f]) +
                        "'");
      }
    }
    const std::string word = lowercase(std::string(fields[0]));
    auto it = seen.find(word);
    if (it != seen.end()) {
      warnings.push_back("static vectors line " + std::to_string(line_no) + ": duplicate token '" + word +
                         "', keeping the last entry");
      rows[it->second] = std::move(values);
    } else {
      seen.emplace(word, words.size());
      words.push_back(word);
      rows.push_back(std::move(values));
    }
  }
  if (words.empty()) throw DataError("static vectors: no entries");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return {StaticTable(std::move(words), std::move(m)), std::move(warnings)};
}

StaticTable load_static(const std::string& path) {
  StaticLoadResult r = parse_static(read_file(path));
  for (const std::string& w : r.warnings) std::cerr << "warning: " << path << ": " << w << '\n';
  return std::move(r.table);
}

void save_static(const StaticTable& table, const std::string& path) { write_file(path, table.to_text()); }

RowVector embed_static(const StaticTable& table, const std::string& token) { return table.embed(token); }

StaticTable fit_static_table(const std::vector<std::vector<std::string>>& sentences, const StaticFitConfig& cfg) {
  if (cfg.dimension <= 0) throw Error("static fit: dimension must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& t : s) ++counts[lowercase(t)];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [w, c] : counts)
    if (c >= cfg.min_count) ranked.emplace_back(w, c);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cfg.max_vocabulary) ranked.resize(cfg.max_vocabulary);
  if (ranked.empty()) throw Error("static fit: no token reaches min_count " + std::to_string(cfg.min_count));

  std::unordered_map<std::string, Eigen::Index> index;
  std::vector<std::string> words;
  for (const auto& [w, c] : ranked) {
    index.emplace(w, static_cast<Eigen::Index>(words.size()));
    words.push_back(w);
  }
  const auto v = static_cast<Eigen::Index>(words.size());
  Matrix co = Matrix::Zero(v, v);
  for (const auto& s : sentences) {
    std::vector<Eigen::Index> ids;
    for (const auto& t : s) {
      auto it = index.find(lowercase(t));
      ids.push_back(it == index.end() ? -1 : it->second);
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0) continue;
      for (std::size_t d = 1; d <= static_cast<std::size_t>(cfg.window) && i + d < ids.size(); ++d) {
        if (ids[i + d] < 0) continue;
        const double w = 1.0 / static_cast<double>(d);
        co(ids[i], ids[i + d]) += w;
        co(ids[i + d], ids[i]) += w;
      }
    }
  }
  const Vector row_sums = co.rowwise().sum();
  const double total = row_sums.sum();
  Matrix ppmi = Matrix::Zero(v, v);
  if (total > 0.0) {
    for (Eigen::Index i = 0; i < v; ++i)
      for (Eigen::Index j = 0; j < v; ++j)
        if (co(i, j) > 0.0) ppmi(i, j) = std::max(0.0, std::log(co(i, j) * total / (row_sums(i) * row_sums(j))));
  }

  // Subspace iteration for the leading eigenvectors of the symmetric PPMI matrix.
  const Eigen::Index d = cfg.dimension;
  const Eigen::Index k = std::min<Eigen::Index>(d + 10, v);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix q(v, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < v; ++r) q(r, c) = normal(rng);
  for (int iter = 0; iter < 8; ++iter) {
    Eigen::HouseholderQR<Matrix> qr(ppmi * q);
    q = qr.householderQ() * Matrix::Identity(v, k);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q.transpose() * ppmi * q);
  Matrix vectors = Matrix::Zero(v, d);
  // Eigenvalues come in increasing order; take the largest first.
  for (Eigen::Index c = 0; c < std::min(d, k); ++c) {
    const Eigen::Index src = k - 1 - c;
    const double lambda = std::max(0.0, eig.eigenvalues()(src));
    vectors.col(c) = q * eig.eigenvectors().col(src) * std::sqrt(lambda);
  }
  for (Eigen::Index r = 0; r < v; ++r) {
    const double n = vectors.row(r).norm();
    if (n > 0.0) vectors.row(r) /= n;
  }
  return StaticTable(std::move(words), std::move(vectors));
}

// --- contextual string embeddings ------------------------------------------------------

Matrix embed_contextual(const CharLm& fwd, const CharLm& bwd, const Sentence& sentence) {
  if (fwd.hidden() != bwd.hidden())
    throw Error("contextual embeddings: forward H=" + std::to_string(fwd.hidden()) + " but backward H=" +
                std::to_string(bwd.hidden()));
  const auto n = static_cast<Eigen::Index>(sentence.size());
  const Eigen::Index h = fwd.hidden();
  if (n == 0) return Matrix(0, 2 * h);

  std::string text;
  std::vector<std::size_t> starts;
  for (const Token& t : sentence.tokens) {
    if (!text.empty()) text += ' ';
    starts.push_back(text.size());
    text += t.text;
  }
  const std::size_t len = text.size();
  std::vector<int> forward{CharLm::kBos}, backward{CharLm::kBos};
  for (unsigned char c : text) forward.push_back(c);
  for (auto it = text.rbegin(); it != text.rend(); ++it) backward.push_back(static_cast<unsigned char>(*it));
  const Matrix fs = fwd.states(forward);
  const Matrix bs = bwd.states(backward);

  Matrix out(n, 2 * h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t first = starts[static_cast<std::size_t>(i)];
    const std::size_t size = sentence.tokens[static_cast<std::size_t>(i)].text.size();
    // Row r of the state matrices follows stream symbol r; symbol 0 is BOS.
    const std::size_t last = first + (size ? size - 1 : 0);
    out.row(i).head(h) = fs.row(static_cast<Eigen::Index>(last + 1));
    out.row(i).tail(h) = bs.row(static_cast<Eigen::Index>(len - first));
  }
  return out;
}

// --- embedders ------------------------------------------------------------------------

StaticEmbedder::StaticEmbedder(std::shared_ptr<const StaticTable> table) : table_(std::move(table)) {
  if (!table_) throw Error("static embedder: no table");
}

Matrix StaticEmbedder::embed(const Sentence& sentence, const ContextWindow&) const {
  Matrix out(static_cast<Eigen::Index>(sentence.size()), dimension());
  for (std::size_t i = 0; i < sentence.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = table_->embed(sentence.tokens[i].text);
  return out;
}

ContextualStringEmbedder::ContextualStringEmbedder(std::shared_ptr<const CharLm> fwd, std::shared_ptr<const CharLm> bwd)
    : fwd_(std::move(fwd)), bwd_(std::move(bwd)) {
  if (!fwd_ || !bwd_) throw Error("contextual embedder: missing language model");
  if (fwd_->direction() != Direction::Forward || bwd_->direction() != Direction::Backward)
    throw Error("contextual embedder: expected a forward and a backward model");
  if (fwd_->hidden() != bwd_->hidden())
    throw Error("contextual embedder: hidden sizes differ (" + std::to_string(fwd_->hidden()) + " vs " +
                std::to_string(bwd_->hidden()) + ")");
}

Matrix ContextualStringEmbedder::embed(const Sentence& sentence, const ContextWindow&) const {
  return embed_contextual(*fwd_, *bwd_, sentence);
}

EmbeddingStack::EmbeddingStack(std::vector<EmbedderPtr> members) : members_(std::move(members)) {
  if (members_.empty()) throw Error("embedding stack needs at least one embedder");
  for (const auto& m : members_)
    if (!m) throw Error("embedding stack: null embedder");
}

Eigen::Index EmbeddingStack::dimension() const {
  Eigen::Index d = 0;
  for (const auto& m : members_) d += m->dimension();
  return d;
}

Matrix EmbeddingStack::embed(const Sentence& sentence, const ContextWindow& context) const {
  return stack(members_, sentence, context);
}

Matrix stack(std::span<const EmbedderPtr> embedders, const Sentence& sentence, const ContextWindow& context) {
  if (embedders.empty()) throw Error("stack: no embedders");
  Eigen::Index total = 0;
  for (const auto& e : embedders) total += e->dimension();
  Matrix out(static_cast<Eigen::Index>(sentence.size()), total);
  Eigen::Index col = 0;
  for (const auto& e : embedders) {
    Matrix part = e->embed(sentence, context);
    if (part.rows() != out.rows() || part.cols() != e->dimension())
      throw ShapeError("stack: embedder '" + e->name() + "' returned " + shape_string(part) + ", expected [" +
                       std::to_string(out.rows()) + "x" + std::to_string(e->dimension()) + "]");
    out.middleCols(col, part.cols()) = part;
    col += part.cols();
  }
  return out;
}

}  // namespace acklab
