#pragma once

// Raw-text preprocessing for acknowledgement paragraphs.

#include "acklab/corpus.hpp"

namespace acklab {

// Whitespace split, then leading/trailing punctuation peeled into separate
// tokens. Internal hyphens and slashes stay ("01PQ17001", "ANR-11-IDEX/0001"),
// and stop-listed abbreviations ("Dr.", "e.g.") keep their period.
std::vector<Token> tokenize(std::string_view text);

// Splits on . ! ? followed by whitespace and an uppercase letter or digit,
// except after a stop-listed abbreviation.
std::vector<std::string> split_sentences(std::string_view text);

const std::vector<std::string>& abbreviation_stoplist();

// Tokenizes and wraps as an unlabeled sentence.
Sentence sentence_from_text(std::string id, std::string_view text);

}  // namespace acklab
