#include "acklab/char_lm.hpp"
#include "acklab/embeddings.hpp"
#include "acklab/grad_check.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace acklab;
using acklab::testing::small_resources;
using acklab::testing::words;

namespace {

CharLmConfig tiny_lm() {
  CharLmConfig c;
  c.hidden = 8;
  c.embedding = 4;
  c.sequence_length = 16;
  c.batch = 4;
  c.epochs = 1;
  return c;
}

}  // namespace

TEST_CASE("static vectors: parse, duplicates, errors") {
  StaticLoadResult r = parse_static("the 0.1 0.2 0.3\n");
  CHECK(r.table.dimension() == 3);
  CHECK(r.table.embed("the").isApprox(RowVector{{0.1, 0.2, 0.3}}));
  CHECK(r.table.embed("The").isApprox(RowVector{{0.1, 0.2, 0.3}}));
  CHECK(r.table.embed("unknown").isZero());

  StaticLoadResult dup = parse_static("a 1 2\nb 3 4\na 5 6\n");
  CHECK(dup.table.size() == 2);
  CHECK(dup.warnings.size() == 1);

  CHECK_THROWS_WITH_AS(parse_static(""), doctest::Contains("no entries"), DataError);
  CHECK_THROWS_WITH_AS(parse_static("a 1 2\nb 1 2 3\n"), doctest::Contains("line 2"), DataError);
}

TEST_CASE("static table text round trip") {
  const StaticTable& t = *small_resources().static_table;
  CHECK(t.dimension() == 12);
  const StaticTable back = parse_static(t.to_text()).table;
  CHECK(back.size() == t.size());
  CHECK(back.vectors().isApprox(t.vectors(), 1e-12));
}

TEST_CASE("fitted static vectors are unit length") {
  const StaticTable& t = *small_resources().static_table;
  REQUIRE(t.size() > 20);
  for (Eigen::Index i = 0; i < t.vectors().rows(); ++i) {
    const double norm = t.vectors().row(i).norm();
    CHECK((norm == doctest::Approx(1.0) || norm == 0.0));
  }
}

TEST_CASE("char streams") {
  const std::vector<int> f = char_stream({"ab"}, Direction::Forward);
  const std::vector<int> b = char_stream({"ab"}, Direction::Backward);
  CHECK(f == std::vector<int>{CharLm::kBos, 'a', 'b', CharLm::kEos});
  CHECK(b == std::vector<int>{CharLm::kBos, 'b', 'a', CharLm::kEos});
  CHECK_THROWS_AS(train_char_lm({}, Direction::Forward, tiny_lm()), Error);
}

TEST_CASE("char-LM training is deterministic and lowers held-out perplexity") {
  const SynthConfig sc = load_synth_resources(acklab::testing::data_dir());
  const std::vector<std::string> lines = generate_plain_sentences(sc, 150, 3);
  CharLmConfig cfg = tiny_lm();
  cfg.epochs = 3;
  const CharLmTraining a = train_char_lm(lines, Direction::Forward, cfg);
  const CharLmTraining b = train_char_lm(lines, Direction::Forward, cfg);
  const auto pa = a.model.params().all(), pb = b.model.params().all();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  REQUIRE(a.log.size() == 3);
  CHECK(a.log.back().heldout_perplexity < a.log.front().heldout_perplexity);
  for (std::size_t i = 1; i < a.log.size(); ++i) CHECK(a.log[i].train_loss <= a.log[i - 1].train_loss * 1.05);
}

TEST_CASE("char-LM window loss gradient") {
  CharLm lm(Direction::Forward, tiny_lm());
  const std::vector<std::vector<int>> windows{{CharLm::kBos, 'a', 'b', 'c'}, {'x', 'y', ' ', CharLm::kEos}};
  // A carried-over state keeps the recurrent gradients well above roundoff.
  std::mt19937_64 rng(11);
  const Matrix h0 = acklab::testing::random_matrix(rng, 2, lm.hidden(), -0.8, 0.8);
  const Matrix c0 = acklab::testing::random_matrix(rng, 2, lm.hidden(), -0.8, 0.8);
  std::vector<Parameter*> params = lm.params().all();
  const double err = grad_check(
      [&](Tape& t) {
        Binder b(t);
        Lstm::State s{t.constant(h0), t.constant(c0)};
        return lm.window_loss(b, windows, s);
      },
      params);
  CHECK(err < 1e-4);
}

TEST_CASE("contextual embeddings are contextual and deterministic") {
  const Resources& r = small_resources();
  const ContextualStringEmbedder e(r.forward_lm, r.backward_lm);
  const Sentence a = words("a", "We thank Smith .");
  const Sentence b = words("b", "Smith et al disagree .");
  const Matrix ea = e.embed(a), eb = e.embed(b);
  CHECK(ea.cols() == 2 * r.forward_lm->hidden());
  CHECK((ea.row(2) - eb.row(0)).norm() > 0.0);
  CHECK(e.embed(a) == ea);
}

TEST_CASE("contextual embeddings respect causality") {
  const Resources& r = small_resources();
  const Eigen::Index h = r.forward_lm->hidden();
  const Sentence a = words("a", "We thank Smith for help .");
  const Sentence b = words("b", "We thank Smyth for help .");
  const Matrix ea = embed_contextual(*r.forward_lm, *r.backward_lm, a);
  const Matrix eb = embed_contextual(*r.forward_lm, *r.backward_lm, b);
  // Forward halves of tokens before the edit, backward halves of tokens after it.
  for (int i : {0, 1}) CHECK(ea.row(i).head(h) == eb.row(i).head(h));
  for (int i : {3, 4, 5}) CHECK(ea.row(i).tail(h) == eb.row(i).tail(h));
  CHECK(ea.row(2).head(h) != eb.row(2).head(h));
  CHECK(ea.row(2).tail(h) != eb.row(2).tail(h));
  for (int i : {3, 4, 5}) CHECK(ea.row(i).head(h) != eb.row(i).head(h));
}

TEST_CASE("one-token sentence uses the end-of-stream forward state") {
  const Resources& r = small_resources();
  const Sentence s = words("s", "Smith");
  const Matrix e = embed_contextual(*r.forward_lm, *r.backward_lm, s);
  std::vector<int> stream{CharLm::kBos};
  for (char c : std::string("Smith")) stream.push_back(static_cast<unsigned char>(c));
  const Matrix states = r.forward_lm->states(stream);
  CHECK(e.row(0).head(r.forward_lm->hidden()) == states.bottomRows(1));
}

TEST_CASE("contextual embedder rejects mismatched models") {
  const Resources& r = small_resources();
  CHECK_THROWS_AS(ContextualStringEmbedder(r.backward_lm, r.forward_lm), Error);
  CharLmConfig other = tiny_lm();
  auto small = std::make_shared<const CharLm>(Direction::Backward, other);
  CHECK_THROWS_AS(ContextualStringEmbedder(r.forward_lm, small), Error);
}

TEST_CASE("stacking") {
  const Resources& r = small_resources();
  const EmbedderPtr st = std::make_shared<StaticEmbedder>(r.static_table);
  const EmbedderPtr cs = std::make_shared<ContextualStringEmbedder>(r.forward_lm, r.backward_lm);
  const Sentence s = words("s", "We thank the Science Council .");
  const std::vector<EmbedderPtr> both{st, cs}, swapped{cs, st}, alone{st};
  const Matrix m = stack(both, s), w = stack(swapped, s);
  CHECK(m.cols() == st->dimension() + cs->dimension());
  CHECK(m.rows() == 6);
  CHECK(stack(alone, s) == st->embed(s));
  CHECK(m.leftCols(st->dimension()) == w.rightCols(st->dimension()));
  CHECK(m.rightCols(cs->dimension()) == w.leftCols(cs->dimension()));
  CHECK_THROWS_AS(EmbeddingStack(std::vector<EmbedderPtr>{}), Error);
}

TEST_CASE("stack dimension arithmetic at desk-scale defaults") {
  StaticTable t({"a"}, Matrix::Ones(1, 50));
  CharLmConfig c;
  auto f = std::make_shared<const CharLm>(Direction::Forward, c);
  auto b = std::make_shared<const CharLm>(Direction::Backward, c);
  EmbeddingStack s({std::make_shared<StaticEmbedder>(std::make_shared<const StaticTable>(t)),
                    std::make_shared<ContextualStringEmbedder>(f, b)});
  CHECK(s.dimension() == 178);
  CHECK(s.embed(words("x", "a b")).cols() == 178);
}
