#pragma once

// Span-annotated sentences, the CoNLL exchange format and the BIO/BIOES codecs.

#include "acklab/tensor.hpp"

#include <compare>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace acklab {

// Entity type name. The six acknowledgement types plus ORG (produced only by
// category merging) are predefined; anything else is an open extension.
using Label = std::string;

namespace labels {
inline const Label kFund = "FUND";
inline const Label kCor = "COR";
inline const Label kUni = "UNI";
inline const Label kInd = "IND";
inline const Label kMisc = "MISC";
inline const Label kGrnb = "GRNB";
inline const Label kOrg = "ORG";

// Canonical report order: FUND, GRNB, IND, UNI, COR, MISC.
const std::vector<Label>& acknowledgement_types();
}  // namespace labels

enum class Scheme { Bio, Bioes };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct Token {
  std::string text;
  std::size_t offset = 0;  // byte offset into Sentence::text()
};

struct Span {
  int start = 0;  // inclusive token index
  int end = 0;    // exclusive
  Label label;

  int length() const { return end - start; }
  bool overlaps(const Span& other) const { return start < other.end && other.start < end; }
  auto operator<=>(const Span&) const = default;
};

std::string to_string(const Span& s);

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::vector<Span> spans;  // sorted by start, non-overlapping
  // Comment metadata in file order ("# key = value"): id, doc, domain, source...
  std::vector<std::pair<std::string, std::string>> meta;

  std::size_t size() const { return tokens.size(); }
  std::string text() const;
  std::string meta_value(const std::string& key, const std::string& fallback = "") const;
  void set_meta(const std::string& key, const std::string& value);
  std::vector<std::string> token_texts() const;
  std::string span_text(const Span& s) const;
};

// Builds a sentence from token strings; offsets assume single-space joins.
Sentence make_sentence(std::string id, const std::vector<std::string>& tokens, std::vector<Span> spans = {});

// Throws DataError naming the colliding or out-of-range spans.
void validate_spans(const Sentence& sentence);
// Sorts spans by position, then validates.
void normalize_spans(Sentence& sentence);

struct Corpus {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
  std::vector<Label> labels;  // inventory, sorted
  Scheme scheme = Scheme::Bioes;

  // Inventory = every label used in any split.
  void recompute_labels();
  // Span invariants, inventory membership and split disjointness.
  void validate() const;
  std::size_t size() const { return train.size() + dev.size() + test.size(); }
};

// --- tag codecs -----------------------------------------------------------

std::vector<std::string> encode_tags(const Sentence& sentence, Scheme scheme);
std::vector<std::string> encode_bioes(const Sentence& sentence);

struct DecodeResult {
  std::vector<Span> spans;
  int repairs = 0;  // I-/E- tags that had to open a new span
};

// Total function over any tag sequence. Accepts both BIO and BIOES input.
// Throws DataError only for tags that are not "O" or "<B|I|E|S>-LABEL".
DecodeResult decode_bioes(std::span<const std::string> tags);

// Tag inventory for a label set: "O" then B-, I-, (E-, S-) per label.
std::vector<std::string> tag_inventory(std::span<const Label> labels, Scheme scheme);

// --- CoNLL ----------------------------------------------------------------

struct ConllSplit {
  std::vector<Sentence> sentences;
  Scheme scheme = Scheme::Bioes;  // detected from E-/S- tags; BIO when only B-/I- occur
  bool scheme_detected = false;   // false when the split has no entity tags
  int repairs = 0;
};

// "token<TAB>tag" per line, blank line between sentences, optional
// "# key = value" comment lines before a sentence.
ConllSplit parse_conll(std::string_view text, std::string_view id_prefix = "s");
std::string write_conll(std::span<const Sentence> sentences, Scheme scheme);

// Writes predicted spans for each sentence instead of gold.
std::string write_conll_predictions(std::span<const Sentence> sentences,
                                    std::span<const std::vector<Span>> predictions, Scheme scheme);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// A corpus directory holds train.conll, dev.conll, test.conll (missing splits
// are empty).
Corpus load_corpus(const std::string& dir);
void save_corpus(const Corpus& corpus, const std::string& dir);
// Loads a directory as a corpus or a single file as its test split.
Corpus load_corpus_or_split(const std::string& path);

// --- statistics ------------------------------------------------------------

struct SplitStats {
  std::size_t sentences = 0;
  std::size_t entities = 0;
  // A sentence tagged with several comma-separated domains counts once in each.
  std::map<std::string, std::size_t> per_domain;
  std::map<Label, std::size_t> per_type;
};

struct CorpusStats {
  SplitStats train, dev, test, total;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string stats_to_json(const CorpusStats& stats);

}  // namespace acklab
