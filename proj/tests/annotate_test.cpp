#include "acklab/annotate.hpp"
#include "acklab/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace acklab;
using acklab::testing::words;

namespace {

DraftCorpus sample_drafts() {
  // Upstream 4-class output: PER over "Jane Doe", ORG over the foundation.
  std::vector<Sentence> upstream;
  upstream.push_back(words("d1", "We thank Jane Doe and the German Research Foundation for grant 01PQ17001 .",
                           {{2, 4, "PER"}, {5, 9, "ORG"}}));
  upstream.push_back(words("d2", "Support from Acme Analytics Ltd and the MinAck project is acknowledged .",
                           {{2, 5, "ORG"}}));
  const std::vector<std::string> grants{"01PQ17001"};
  return seed_annotations(upstream, grants, {}, RuleTable::builtin());
}

const DraftSpan* find_label(const DraftDocument& d, const Label& label) {
  for (const DraftSpan& s : d.drafts)
    if (s.span.label == label) return &s;
  return nullptr;
}

}  // namespace

TEST_CASE("organisation rules") {
  const RuleTable rules = RuleTable::builtin();
  CHECK(classify_org("University of Cologne", rules) == "UNI");
  CHECK(classify_org("Acme Analytics Ltd", rules) == "COR");
  CHECK(classify_org("German Research Foundation", rules) == "FUND");
  CHECK(classify_org("Mystery Body", rules) == rules.default_target());
}

TEST_CASE("rule order within a class does not change the shipped examples") {
  const std::string text = read_file(acklab::testing::data_dir() + "/rules/org_rules.tsv");
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  std::reverse(lines.begin(), lines.end());
  std::string reversed;
  for (const std::string& l : lines) reversed += l + "\n";
  const RuleTable a = RuleTable::parse(text), b = RuleTable::parse(reversed);
  for (const char* name : {"University of Cologne", "Acme Analytics Ltd", "German Research Foundation",
                           "Leibniz Institute of Technology", "Example GmbH", "Science Council", "Plain Name"})
    CHECK(a.classify(name) == b.classify(name));
}

TEST_CASE("rule table parse errors") {
  CHECK_THROWS_AS(RuleTable::parse("XYZ\ti\tfoo\n"), DataError);
  CHECK_THROWS_AS(RuleTable::parse("UNI\ti\t(\n"), DataError);
}

TEST_CASE("seeding maps upstream output and grant index") {
  const DraftCorpus drafts = sample_drafts();
  REQUIRE(drafts.documents.size() == 2);
  const DraftDocument& d1 = drafts.documents[0];
  const DraftSpan* ind = find_label(d1, "IND");
  REQUIRE(ind);
  CHECK(ind->span.start == 2);
  CHECK(ind->span.end == 4);
  CHECK(ind->source == DraftSource::PretrainedPer);
  const DraftSpan* grnb = find_label(d1, "GRNB");
  REQUIRE(grnb);
  CHECK(grnb->source == DraftSource::GrantIndex);
  CHECK(d1.sentence.span_text(grnb->span) == "01PQ17001");
  CHECK(find_label(d1, "FUND"));
  CHECK(find_label(drafts.documents[1], "COR"));
  for (const DraftDocument& d : drafts.documents)
    for (const DraftSpan& s : d.drafts) CHECK(s.status == DraftStatus::Proposed);
}

TEST_CASE("grant beats an overlapping organisation proposal") {
  std::vector<Sentence> upstream{words("d1", "Grant DFG-12 helped .", {{1, 2, "ORG"}})};
  const std::vector<std::string> grants{"DFG-12"};
  const DraftCorpus drafts = seed_annotations(upstream, grants, {}, RuleTable::builtin());
  const auto& ds = drafts.documents[0].drafts;
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].span.label == "GRNB");
  CHECK(drafts.conflicts.size() == 1);
}

TEST_CASE("seeding never produces overlapping drafts") {
  std::mt19937_64 rng(301);
  const std::vector<Label> upstream_labels{"PER", "ORG", "MISC", "LOC"};
  for (int trial = 0; trial < 200; ++trial) {
    const int n = acklab::testing::uniform_int(rng, 1, 10);
    std::vector<std::string> toks;
    for (int i = 0; i < n; ++i) toks.push_back(i % 3 == 0 ? "G" + std::to_string(i % 2) : "w" + std::to_string(i));
    Sentence s = make_sentence("d", toks, acklab::testing::random_spans(rng, n, upstream_labels));
    const std::vector<std::string> grants{"G0", "G1 w1"};
    const std::vector<std::string> orgs{"w2 G0", "w1"};
    std::vector<Sentence> up{s};
    const DraftCorpus d = seed_annotations(up, grants, orgs, RuleTable::builtin());
    const auto& ds = d.documents[0].drafts;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(ds[i].span.label != "MISC");
      for (std::size_t j = i + 1; j < ds.size(); ++j) CHECK_FALSE(ds[i].span.overlaps(ds[j].span));
    }
  }
}

TEST_CASE("review documents survive a JSON round trip") {
  const DraftCorpus drafts = sample_drafts();
  const std::string json = emit_review(drafts);
  CHECK(emit_review(load_review(json)) == json);
}

TEST_CASE("apply_review: accept all, relabel, add") {
  const DraftCorpus drafts = sample_drafts();
  std::vector<ReviewDecision> accept_all;
  for (const DraftDocument& d : drafts.documents)
    for (const DraftSpan& s : d.drafts) accept_all.push_back({d.doc_id, s.id, ReviewAction::Accept, "", -1, -1, ""});
  const Corpus gold = apply_review(drafts, accept_all);
  REQUIRE(gold.train.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<Span> expected;
    for (const DraftSpan& s : drafts.documents[i].drafts) expected.push_back(s.span);
    std::sort(expected.begin(), expected.end());
    CHECK(gold.train[i].spans == expected);
  }

  std::vector<ReviewDecision> relabel = accept_all;
  const DraftSpan* fund = find_label(drafts.documents[0], "FUND");
  REQUIRE(fund);
  for (ReviewDecision& d : relabel)
    if (d.draft_id == fund->id) {
      d.action = ReviewAction::Relabel;
      d.new_label = "UNI";
    }
  const Corpus relabeled = apply_review(drafts, relabel);
  int uni = 0;
  for (const Span& s : relabeled.train[0].spans) uni += s.label == "UNI";
  CHECK(uni == 1);
  CHECK(relabeled.train[0].spans.size() == gold.train[0].spans.size());
  CHECK(relabeled.train[1].spans == gold.train[1].spans);

  // "MinAck project" are tokens 7-8 of the second document.
  std::vector<ReviewDecision> add = accept_all;
  add.push_back({"d2", "", ReviewAction::Add, "MISC", 7, 9, ""});
  DraftCorpus applied = drafts;
  for (const ReviewDecision& d : add) apply_decision(applied.find(d.doc_id), d);
  const DraftSpan* misc = find_label(applied.documents[1], "MISC");
  REQUIRE(misc);
  CHECK(misc->source == DraftSource::Manual);
  CHECK(applied.documents[1].sentence.span_text(misc->span) == "MinAck project");
  const Corpus with_add = apply_review(drafts, add);
  CHECK_NOTHROW(with_add.validate());
}

TEST_CASE("undecided and rejected drafts are not gold") {
  const DraftCorpus drafts = sample_drafts();
  const DraftSpan& first = drafts.documents[0].drafts[0];
  std::vector<ReviewDecision> one{{"d1", first.id, ReviewAction::Reject, "", -1, -1, ""}};
  const Corpus gold = apply_review(drafts, one);
  CHECK(gold.train[0].spans.empty());
  CHECK_THROWS_AS(apply_review(drafts, std::vector<ReviewDecision>{one[0], one[0]}), DataError);
  CHECK_THROWS_AS(apply_review(drafts, std::vector<ReviewDecision>{{"d1", "nope", ReviewAction::Accept, "", -1, -1, ""}}),
                  DataError);
}

TEST_CASE("merge_categories") {
  const Corpus c = generate_synthetic(acklab::testing::synth_config(60, 20, 20, 7));
  const Corpus merged = merge_categories(c, org_merge_mapping(), {"MISC"});
  CHECK(merged.labels == std::vector<Label>{"GRNB", "IND", "ORG"});
  const Corpus no_misc = merge_categories(c, {}, {"MISC"});
  CHECK(no_misc.labels.size() == 5);
  CHECK(std::find(no_misc.labels.begin(), no_misc.labels.end(), "MISC") == no_misc.labels.end());
  const Corpus same = merge_categories(c, {}, {});
  CHECK(write_conll(same.train, Scheme::Bioes) == write_conll(c.train, Scheme::Bioes));
  CHECK(same.labels == c.labels);
}

TEST_CASE("synthetic generation") {
  SynthConfig sc = acklab::testing::synth_config(60, 20, 20, 7);
  const Corpus a = generate_synthetic(sc), b = generate_synthetic(sc);
  CHECK(write_conll(a.train, Scheme::Bioes) == write_conll(b.train, Scheme::Bioes));
  CHECK(write_conll(a.test, Scheme::Bioes) == write_conll(b.test, Scheme::Bioes));
  CHECK(a.labels.size() == 6);
  CHECK_NOTHROW(a.validate());

  SynthConfig one = sc;
  one.templates = {"We thank {IND} for comments ."};
  one.train = 1;
  one.dev = one.test = 0;
  const Corpus c = generate_synthetic(one);
  REQUIRE(c.train.size() == 1);
  REQUIRE(c.train[0].spans.size() == 1);
  CHECK(c.train[0].spans[0].label == "IND");
  CHECK(c.train[0].spans[0].start == 2);

  SynthConfig bad = sc;
  bad.templates = {"No slot here ."};
  CHECK_THROWS_AS(generate_synthetic(bad), DataError);
}

TEST_CASE("proportion table is respected") {
  SynthConfig sc = acklab::testing::synth_config(1000, 0, 0, 11);
  sc.templates = {"We thank {ANY} ."};
  sc.proportions = parse_proportions("IND=0.3,FUND=0.25,GRNB=0.2,UNI=0.15,MISC=0.07,COR=0.03");
  const Corpus c = generate_synthetic(sc);
  std::map<Label, int> counts;
  int total = 0;
  for (const Sentence& s : c.train)
    for (const Span& sp : s.spans) {
      ++counts[sp.label];
      ++total;
    }
  CHECK(total == 1000);
  for (const auto& [label, p] : sc.proportions) CHECK(std::abs(counts[label] / 1000.0 - p) <= 0.03);
}
