#include "acklab/corpus.hpp"
#include "acklab/synth.hpp"
#include "acklab/tokenize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

using namespace acklab;
using acklab::testing::uniform_int;

namespace {

std::vector<std::string> tags_of(std::initializer_list<const char*> t) { return {t.begin(), t.end()}; }

// Reference decoder: a chunk tag continues iff it is I-/E- of the same label
// directly after B-/I- of that label.
DecodeResult reference_decode(const std::vector<std::string>& tags) {
  DecodeResult r;
  auto prefix = [](const std::string& t) { return t[0]; };
  auto label = [](const std::string& t) { return t.size() > 2 ? t.substr(2) : std::string(); };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const char p = prefix(tags[i]);
    if (p == 'O') continue;
    const bool cont = (p == 'I' || p == 'E') && i > 0 && (prefix(tags[i - 1]) == 'B' || prefix(tags[i - 1]) == 'I') &&
                      label(tags[i - 1]) == label(tags[i]);
    if (cont) {
      r.spans.back().end = static_cast<int>(i) + 1;
    } else {
      if (p == 'I' || p == 'E') ++r.repairs;
      r.spans.push_back({static_cast<int>(i), static_cast<int>(i) + 1, label(tags[i])});
    }
  }
  return r;
}

Sentence with_spans(int n, std::vector<Span> spans) {
  std::vector<std::string> toks;
  for (int i = 0; i < n; ++i) toks.push_back("t" + std::to_string(i));
  return make_sentence("s", toks, std::move(spans));
}

}  // namespace

TEST_CASE("parse_conll examples") {
  ConllSplit s = parse_conll("We\tO\nthank\tO\nJohn\tB-IND\nSmith\tE-IND\n\n");
  REQUIRE(s.sentences.size() == 1);
  CHECK(s.sentences[0].spans == std::vector<Span>{{2, 4, "IND"}});
  CHECK(s.scheme == Scheme::Bioes);
  CHECK(parse_conll("").sentences.empty());
  ConllSplit single = parse_conll("John\tS-IND\n\n");
  CHECK(single.sentences[0].spans == std::vector<Span>{{0, 1, "IND"}});
  ConllSplit bio = parse_conll("John\tB-IND\nSmith\tI-IND\n\n");
  CHECK(bio.scheme == Scheme::Bio);
  CHECK(bio.sentences[0].spans == std::vector<Span>{{0, 2, "IND"}});
}

TEST_CASE("encode_bioes examples") {
  CHECK(encode_bioes(with_spans(4, {{0, 3, "FUND"}})) == tags_of({"B-FUND", "I-FUND", "E-FUND", "O"}));
  CHECK(encode_bioes(with_spans(3, {})) == tags_of({"O", "O", "O"}));
  CHECK(encode_bioes(with_spans(4, {{0, 1, "IND"}, {2, 4, "GRNB"}})) == tags_of({"S-IND", "O", "B-GRNB", "E-GRNB"}));
  CHECK(encode_tags(with_spans(4, {{0, 1, "IND"}, {2, 4, "GRNB"}}), Scheme::Bio) ==
        tags_of({"B-IND", "O", "B-GRNB", "I-GRNB"}));
}

TEST_CASE("decode_bioes examples") {
  DecodeResult a = decode_bioes(tags_of({"B-IND", "E-IND"}));
  CHECK(a.spans == std::vector<Span>{{0, 2, "IND"}});
  CHECK(a.repairs == 0);
  DecodeResult b = decode_bioes(tags_of({"I-FUND", "I-FUND"}));
  CHECK(b.spans == std::vector<Span>{{0, 2, "FUND"}});
  CHECK(b.repairs == 1);
}

TEST_CASE("decode repairs on every length-2 tag pair") {
  const std::vector<std::string> inventory = tag_inventory(std::vector<Label>{"A", "B"}, Scheme::Bioes);
  CHECK(inventory.size() == 9);
  for (const std::string& x : inventory)
    for (const std::string& y : inventory) {
      const std::vector<std::string> tags{x, y};
      const DecodeResult got = decode_bioes(tags), want = reference_decode(tags);
      CHECK_MESSAGE(got.spans == want.spans, x << " " << y);
      CHECK_MESSAGE(got.repairs == want.repairs, x << " " << y);
    }
}

TEST_CASE("encode/decode round trip on random span sets") {
  std::mt19937_64 rng(201);
  const std::vector<Label> labels{"FUND", "IND", "GRNB", "UNI", "COR", "MISC"};
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = uniform_int(rng, 0, 12);
    const Sentence s = with_spans(n, acklab::testing::random_spans(rng, n, labels));
    const DecodeResult d = decode_bioes(encode_bioes(s));
    CHECK(d.spans == s.spans);
    CHECK(d.repairs == 0);
  }
}

TEST_CASE("decode is total and non-overlapping on raw tag sequences") {
  std::mt19937_64 rng(202);
  const std::vector<std::string> inventory = tag_inventory(std::vector<Label>{"FUND", "IND", "GRNB"}, Scheme::Bioes);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = uniform_int(rng, 0, 10);
    std::vector<std::string> tags;
    for (int i = 0; i < n; ++i) tags.push_back(inventory[uniform_int(rng, 0, static_cast<int>(inventory.size()) - 1)]);
    const DecodeResult d = decode_bioes(tags);
    Sentence s = with_spans(n, d.spans);
    CHECK_NOTHROW(validate_spans(s));
    const DecodeResult ref = reference_decode(tags);
    CHECK(d.spans == ref.spans);
  }
}

TEST_CASE("conll write/parse is byte-identical") {
  SynthConfig sc = acklab::testing::synth_config(30, 5, 5, 9);
  const Corpus c = generate_synthetic(sc);
  const std::string text = write_conll(c.train, Scheme::Bioes);
  CHECK(write_conll(parse_conll(text).sentences, Scheme::Bioes) == text);
  const std::string bio = write_conll(c.train, Scheme::Bio);
  CHECK(write_conll(parse_conll(bio).sentences, Scheme::Bio) == bio);
  const std::string with_flags = "# id = x1\n# reviewed\nWe\tO\nthank\tO\nDr.\tO\nLee\tS-IND\n\n";
  CHECK(write_conll(parse_conll(with_flags).sentences, Scheme::Bioes) == with_flags);
}

TEST_CASE("span invariants") {
  Sentence s = with_spans(3, {});
  s.spans = {{0, 2, "IND"}, {1, 3, "FUND"}};
  CHECK_THROWS_AS(validate_spans(s), DataError);
  s.spans = {{2, 4, "IND"}};
  CHECK_THROWS_AS(validate_spans(s), DataError);
  s.spans = {{2, 3, "IND"}, {0, 1, "FUND"}};
  normalize_spans(s);
  CHECK(s.spans.front().start == 0);
}

TEST_CASE("tokenizer keeps grant numbers and abbreviations") {
  std::vector<std::string> got;
  for (const Token& t : tokenize("Funded by DFG (grant 01PQ17001, ANR-11-IDEX/0001); thanks to Dr. Lee."))
    got.push_back(t.text);
  CHECK(got == std::vector<std::string>{"Funded", "by", "DFG", "(", "grant", "01PQ17001", ",", "ANR-11-IDEX/0001", ")",
                                        ";", "thanks", "to", "Dr.", "Lee", "."});
  const std::vector<std::string> parts =
      split_sentences("We thank Dr. Smith for help. Funding came from No. 5 grant. 2019 was good, e.g. Spring.");
  CHECK(parts == std::vector<std::string>{"We thank Dr. Smith for help.", "Funding came from No. 5 grant.",
                                          "2019 was good, e.g. Spring."});
  const Sentence s = sentence_from_text("a", "We thank Jane Doe.");
  CHECK(s.size() == 5);
  CHECK(s.text().substr(s.tokens[2].offset, 4) == "Jane");
}

TEST_CASE("corpus stats") {
  Corpus empty;
  const CorpusStats z = corpus_stats(empty);
  CHECK(z.total.sentences == 0);
  CHECK(z.total.entities == 0);

  const Corpus c1 = generate_synthetic(acklab::testing::synth_config(29, 10, 10, 1));
  const CorpusStats s1 = corpus_stats(c1);
  CHECK(s1.train.sentences == 29);
  CHECK(s1.dev.sentences == 10);
  CHECK(s1.test.sentences == 10);
  CHECK(s1.total.sentences == 49);

  const Corpus c2 = generate_synthetic(acklab::testing::synth_config(339, 165, 150, 2));
  const CorpusStats s2 = corpus_stats(c2);
  CHECK(s2.train.sentences == 339);
  CHECK(s2.dev.sentences == 165);
  CHECK(s2.test.sentences == 150);
  CHECK(s2.total.sentences == 654);

  std::size_t typed = 0;
  for (const auto& [_, n] : s2.total.per_type) typed += n;
  CHECK(typed == s2.total.entities);
  const auto j = nlohmann::json::parse(stats_to_json(s2));
  CHECK(j.at("total").at("sentences") == 654);
}

TEST_CASE("multi-domain sentences count in each domain") {
  Corpus c;
  Sentence s = with_spans(2, {{0, 1, "IND"}});
  s.set_meta("domain", "economics,oceanography");
  c.train.push_back(s);
  const CorpusStats st = corpus_stats(c);
  CHECK(st.train.per_domain.at("economics") == 1);
  CHECK(st.train.per_domain.at("oceanography") == 1);
}

TEST_CASE("save and load corpus") {
  const auto dir = acklab::testing::temp_dir("corpus");
  Corpus c = generate_synthetic(acklab::testing::synth_config(12, 4, 4, 3));
  save_corpus(c, dir.string());
  const Corpus back = load_corpus(dir.string());
  CHECK(back.train.size() == 12);
  CHECK(back.labels == c.labels);
  CHECK(write_conll(back.test, Scheme::Bioes) == write_conll(c.test, Scheme::Bioes));
  CHECK_THROWS_AS(load_corpus((dir / "missing").string()), DataError);
  std::filesystem::remove_all(dir);
}
