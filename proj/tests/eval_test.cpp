#include "acklab/eval.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace acklab;
using acklab::testing::uniform_int;

namespace {

Sentence gold_sentence(const std::string& id, int n, std::vector<Span> spans) {
  return make_sentence(id, std::vector<std::string>(static_cast<std::size_t>(n), "w"), std::move(spans));
}

EvalReport report(const std::string& name, const std::map<Label, ClassScore>& classes) {
  EvalReport r;
  r.meta.name = name;
  r.classes = classes;
  return r;
}

// Pooled f1 recomputed by hand from summed counts.
double pooled_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

TEST_CASE("hand-counted example") {
  const std::vector<Sentence> gold{gold_sentence("s1", 8, {{0, 2, "FUND"}, {5, 6, "IND"}})};
  const std::map<std::string, std::vector<Span>> pred{{"s1", {{0, 2, "FUND"}, {5, 7, "IND"}}}};
  const EvalReport r = score_spans(gold, pred);
  CHECK(r.classes.at("FUND").f1() == 1.0);
  CHECK(r.classes.at("IND").f1() == 0.0);
  const ClassScore m = r.micro();
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.precision() == 0.5);
  CHECK(m.recall() == 0.5);
  CHECK(r.micro_f1() == 0.5);
}

TEST_CASE("perfect and empty predictions") {
  const std::vector<Sentence> gold{gold_sentence("s1", 8, {{0, 2, "FUND"}, {5, 6, "IND"}}),
                                   gold_sentence("s2", 3, {{1, 3, "GRNB"}})};
  std::map<std::string, std::vector<Span>> perfect;
  for (const Sentence& s : gold) perfect[s.id] = s.spans;
  const EvalReport p = score_spans(gold, perfect);
  for (const auto& [_, c] : p.classes) CHECK(c.f1() == 1.0);
  CHECK(p.micro_f1() == 1.0);

  const EvalReport none = score_spans(gold, {});
  CHECK(none.micro().precision() == 0.0);
  CHECK(none.micro().recall() == 0.0);
  CHECK(none.micro_f1() == 0.0);

  const std::vector<std::vector<Span>> all_o(gold.size());
  CHECK(score_aligned(gold, all_o).micro_f1() == 0.0);
  CHECK_THROWS_AS(score_spans(gold, {{"zz", {}}}), DataError);
}

TEST_CASE("inventory labels without spans still get a row") {
  const std::vector<Sentence> gold{gold_sentence("s1", 3, {{0, 1, "IND"}})};
  const std::vector<Label> inv{"IND", "MISC"};
  const EvalReport r = score_spans(gold, {}, inv);
  CHECK(r.classes.count("MISC") == 1);
}

TEST_CASE("scores are invariant to sentence order") {
  std::mt19937_64 rng(501);
  const std::vector<Label> labels{"FUND", "IND", "GRNB"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> gold;
    std::map<std::string, std::vector<Span>> pred;
    for (int i = 0; i < 6; ++i) {
      const int n = uniform_int(rng, 1, 8);
      gold.push_back(gold_sentence("s" + std::to_string(i), n, acklab::testing::random_spans(rng, n, labels)));
      pred["s" + std::to_string(i)] = acklab::testing::random_spans(rng, n, labels);
    }
    const EvalReport a = score_spans(gold, pred);
    std::shuffle(gold.begin(), gold.end(), rng);
    const EvalReport b = score_spans(gold, pred);
    CHECK(reports_to_json(std::span<const EvalReport>(&a, 1)) == reports_to_json(std::span<const EvalReport>(&b, 1)));
  }
}

TEST_CASE("pooled micro-F1 lies between the parts") {
  std::mt19937_64 rng(502);
  const std::vector<Label> labels{"FUND", "IND"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Sentence> g1, g2;
    std::map<std::string, std::vector<Span>> pred;
    for (int i = 0; i < 8; ++i) {
      const int n = uniform_int(rng, 1, 8);
      const std::string id = "s" + std::to_string(i);
      Sentence s = gold_sentence(id, n, acklab::testing::random_spans(rng, n, labels));
      pred[id] = uniform_int(rng, 0, 1) ? s.spans : acklab::testing::random_spans(rng, n, labels);
      (i < 4 ? g1 : g2).push_back(std::move(s));
    }
    std::map<std::string, std::vector<Span>> p1, p2;
    for (const Sentence& s : g1) p1[s.id] = pred[s.id];
    for (const Sentence& s : g2) p2[s.id] = pred[s.id];
    std::vector<Sentence> all = g1;
    all.insert(all.end(), g2.begin(), g2.end());
    const ClassScore a = score_spans(g1, p1).micro(), b = score_spans(g2, p2).micro();
    const ClassScore u = score_spans(all, pred).micro();
    CHECK(u.tp == a.tp + b.tp);
    CHECK(u.fp == a.fp + b.fp);
    CHECK(u.fn == a.fn + b.fn);
    const double fa = pooled_f1(a.tp, a.fp, a.fn), fb = pooled_f1(b.tp, b.fp, b.fn);
    const double fu = pooled_f1(u.tp, u.fp, u.fn);
    CHECK(fu == doctest::Approx(u.f1()));
    CHECK(fu >= std::min(fa, fb) - 1e-12);
    CHECK(fu <= std::max(fa, fb) + 1e-12);
  }
}

TEST_CASE("adding a correct prediction never lowers F1") {
  std::mt19937_64 rng(503);
  const std::vector<Label> labels{"FUND", "IND", "GRNB"};
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 2, 10);
    const Sentence g = gold_sentence("s", n, acklab::testing::random_spans(rng, n, labels));
    if (g.spans.empty()) continue;
    std::vector<Span> pred;
    for (const Span& s : g.spans)
      if (uniform_int(rng, 0, 1)) pred.push_back(s);
    const std::vector<Span> missing = [&] {
      std::vector<Span> m;
      for (const Span& s : g.spans)
        if (std::find(pred.begin(), pred.end(), s) == pred.end()) m.push_back(s);
      return m;
    }();
    if (missing.empty()) continue;
    const std::vector<Sentence> gold{g};
    const EvalReport before = score_spans(gold, {{"s", pred}});
    pred.push_back(missing.front());
    std::sort(pred.begin(), pred.end());
    const EvalReport after = score_spans(gold, {{"s", pred}});
    for (const auto& [label, c] : after.classes) CHECK(c.f1() >= before.classes.at(label).f1());
    CHECK(after.micro_f1() >= before.micro_f1());
  }
}

TEST_CASE("report JSON is byte-stable") {
  const std::vector<Sentence> gold{gold_sentence("s1", 8, {{0, 2, "FUND"}, {5, 6, "IND"}})};
  EvalReport r = score_spans(gold, {{"s1", {{0, 2, "FUND"}}}});
  r.meta = {"run", "flair-stack", "c1", "none", 7};
  const std::string text = reports_to_json(std::span<const EvalReport>(&r, 1));
  const std::vector<EvalReport> back = reports_from_json(text);
  REQUIRE(back.size() == 1);
  CHECK(back[0].meta == r.meta);
  CHECK(reports_to_json(back) == text);
}

TEST_CASE("comparison table shape") {
  std::vector<EvalReport> six;
  for (const char* f : {"flair-stack", "mini-transformer-finetune", "tars"})
    for (const char* c : {"corpus1", "corpus2"}) {
      EvalReport r;
      r.meta.family = f;
      r.meta.corpus = c;
      r.classes = {{"MISC", {1, 0, 0}}, {"FUND", {1, 1, 0}}, {"IND", {0, 0, 1}}, {"COR", {}}, {"UNI", {}}, {"GRNB", {}}};
      six.push_back(r);
    }
  const Comparison c = compare(six);
  CHECK(c.columns.size() == 6);
  CHECK(c.rows == std::vector<std::string>{"FUND", "GRNB", "IND", "UNI", "COR", "MISC", "overall"});
  CHECK(c.f1[0][0] == doctest::Approx(2.0 / 3.0));
  CHECK(comparison_to_text(c).find("overall") != std::string::npos);
  CHECK(comparison_to_csv(c).find("FUND") != std::string::npos);

  const std::vector<EvalReport> single{report("a", {{"IND", {1, 0, 0}}}), report("b", {{"IND", {0, 1, 1}}})};
  CHECK(compare(single).rows == std::vector<std::string>{"IND", "overall"});

  const std::vector<EvalReport> dup{report("a", {}), report("a", {})};
  CHECK_THROWS_AS(compare(dup), DataError);
  CHECK_THROWS_AS(compare(std::span<const EvalReport>(single.data(), 1)), DataError);
}

TEST_CASE("merged ORG row sits among the organisation rows") {
  const std::vector<Label> rows = report_row_order({"ORG", "IND", "GRNB"});
  CHECK(rows == std::vector<Label>{"GRNB", "IND", "ORG"});
}
