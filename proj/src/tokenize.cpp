#include "acklab/tokenize.hpp"

#include <algorithm>
#include <cctype>

namespace acklab {

const std::vector<std::string>& abbreviation_stoplist() {
  static const std::vector<std::string> kList = {"Dr.",  "Prof.", "Mr.", "Mrs.", "Ms.",  "e.g.", "i.e.", "No.",
                                                 "Nos.", "Fig.",  "vs.", "al.",  "cf.",  "St.",  "Jr.",  "Sr."};
  return kList;
}

namespace {

bool is_abbreviation(std::string_view word) {
  const auto& list = abbreviation_stoplist();
  return std::find(list.begin(), list.end(), word) != list.end();
}

// Byte length of a punctuation mark starting at s[i], 0 if none.
std::size_t punct_at(std::string_view s, std::size_t i) {
  static const std::string_view kAscii = ".,;:!?()[]{}\"'";
  if (kAscii.find(s[i]) != std::string_view::npos) return 1;
  // UTF-8 curly quotes U+2018, U+2019, U+201C, U+201D.
  if (i + 3 <= s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
      static_cast<unsigned char>(s[i + 1]) == 0x80) {
    const unsigned char c = static_cast<unsigned char>(s[i + 2]);
    if (c == 0x98 || c == 0x99 || c == 0x9C || c == 0x9D) return 3;
  }
  return 0;
}

// Length of a punctuation mark ending at s[end-1], 0 if none.
std::size_t punct_before(std::string_view s, std::size_t end) {
  if (end >= 1 && punct_at(s, end - 1) == 1) return 1;
  if (end >= 3 && punct_at(s, end - 3) == 3) return 3;
  return 0;
}

void split_chunk(std::string_view text, std::size_t base, std::size_t len, std::vector<Token>& out) {
  std::string_view chunk = text.substr(base, len);
  if (is_abbreviation(chunk)) {
    out.push_back(Token{std::string(chunk), base});
    return;
  }
  std::size_t lo = 0, hi = chunk.size();
  std::vector<Token> lead, trail;
  while (lo < hi) {
    const std::size_t n = punct_at(chunk, lo);
    if (n == 0) break;
    lead.push_back(Token{std::string(chunk.substr(lo, n)), base + lo});
    lo += n;
  }
  while (hi > lo) {
    if (is_abbreviation(chunk.substr(lo, hi - lo))) break;
    const std::size_t n = punct_before(chunk, hi);
    if (n == 0) break;
    trail.push_back(Token{std::string(chunk.substr(hi - n, n)), base + hi - n});
    hi -= n;
  }
  out.insert(out.end(), lead.begin(), lead.end());
  if (hi > lo) out.push_back(Token{std::string(chunk.substr(lo, hi - lo)), base + lo});
  out.insert(out.end(), trail.rbegin(), trail.rend());
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) split_chunk(text, i, j - i, out);
    i = j;
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::string_view piece = text.substr(start, end - start);
    while (!piece.empty() && is_space(piece.front())) piece.remove_prefix(1);
    while (!piece.empty() && is_space(piece.back())) piece.remove_suffix(1);
    if (!piece.empty()) out.emplace_back(piece);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !is_space(text[j])) continue;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j >= text.size()) continue;
    const unsigned char next = static_cast<unsigned char>(text[j]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(text[w - 1])) --w;
      if (is_abbreviation(text.substr(w, i + 1 - w))) continue;
    }
    emit(i + 1);
    start = j;
  }
  emit(text.size());
  return out;
}

Sentence sentence_from_text(std::string id, std::string_view text) {
  Sentence s;
  s.id = std::move(id);
  // Offsets are re-based onto the single-space join used everywhere else.
  std::vector<std::string> toks;
  for (auto& t : tokenize(text)) toks.push_back(std::move(t.text));
  return make_sentence(s.id, toks);
}

}  // namespace acklab
