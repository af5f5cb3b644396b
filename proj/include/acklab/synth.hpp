#pragma once

// Template-driven generator for synthetic acknowledgement corpora.
//
// A template is a whitespace-separated line; a token of the form {TYPE} is a
// slot filled with a surface form drawn from the vocabulary of TYPE. The slot
// {ANY} draws its type from the proportion table using largest-remainder
// quotas over all {ANY} slots of the corpus, so the realised mix matches the
// requested proportions to within one slot per type.

#include "acklab/corpus.hpp"

#include <cstdint>

namespace acklab {

inline constexpr std::string_view kAnySlot = "ANY";

struct SynthConfig {
  std::vector<std::string> templates;
  std::map<Label, std::vector<std::string>> vocab;
  std::map<Label, double> proportions;
  std::size_t train = 60;
  std::size_t dev = 20;
  std::size_t test = 20;
  std::uint64_t seed = 7;
  Scheme scheme = Scheme::Bioes;
  std::string id_prefix = "synth";
  std::size_t max_document_sentences = 3;
};

// Throws DataError when a template names a slot type without vocabulary, uses
// {ANY} without a proportion table, or has no slot at all.
void validate_synth_config(const SynthConfig& cfg);

Corpus generate_synthetic(const SynthConfig& cfg);

// Unlabeled text in the same style (one sentence per line), for language-model
// and static-vector training.
std::vector<std::string> generate_plain_sentences(const SynthConfig& cfg, std::size_t count, std::uint64_t seed);

std::vector<std::string> load_templates(const std::string& path);
// Reads <dir>/<TYPE>.txt, one surface form per line.
std::map<Label, std::vector<std::string>> load_vocab_dir(const std::string& dir);
// "IND=0.3,FUND=0.25,..."
std::map<Label, double> parse_proportions(const std::string& spec);
// Mirrors the observed imbalance: IND, FUND, GRNB most frequent; COR rarest.
std::map<Label, double> default_proportions();

// Loads templates.txt and vocab/ from a data directory.
SynthConfig load_synth_resources(const std::string& data_dir);

}  // namespace acklab
