#include "acklab/annotate.hpp"
#include "acklab/cli.hpp"
#include "acklab/config.hpp"
#include "acklab/experiment.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using namespace acklab;
using json = nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Writes the shared small resources to disk so manifests can point at them.
std::string resource_keys(const std::filesystem::path& dir) {
  const Resources& r = acklab::testing::small_resources();
  save_static(*r.static_table, (dir / "static.txt").string());
  Checkpoint f, b;
  r.forward_lm->save(f, "");
  r.backward_lm->save(b, "");
  f.save((dir / "fwd.ckpt").string());
  b.save((dir / "bwd.ckpt").string());
  return "embeddings.static_path = static.txt\nembeddings.lm_forward = fwd.ckpt\nembeddings.lm_backward = bwd.ckpt\n";
}

const std::string kSmallModel =
    "epochs = 1\nlstm.hidden = 8\ntransformer.layers = 1\ntransformer.heads = 2\ntransformer.dim = 16\n"
    "transformer.ff = 32\n";

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse("# comment\nmodel.family = tars\noptimizer.lr = 0.05\nstack.static = false\n");
  CHECK(config_family(c) == ModelFamily::Tars);
  CHECK(c.get_double("optimizer.lr", 0) == 0.05);
  CHECK_FALSE(c.get_bool("stack.static", true));
  CHECK(c.get_int("epochs", 7) == 7);
  CHECK_THROWS_AS(Config::parse("no.such.key = 1\n"), DataError);
  CHECK_THROWS_AS(Config::parse("just words\n"), DataError);
  CHECK_THROWS_AS(Config::parse("epochs = many\n").get_int("epochs", 1), DataError);

  const OptimizerConfig crf = optimizer_config(Config{}, ModelFamily::FlairStack);
  CHECK(crf.algorithm == Algorithm::Sgd);
  CHECK(crf.learning_rate == 0.1);
  CHECK(crf.anneal_factor == 0.5);
  CHECK(crf.patience == 3);
  const OptimizerConfig ft = optimizer_config(Config{}, ModelFamily::TransformerFinetune);
  CHECK(ft.algorithm == Algorithm::AdaptiveMoments);
  CHECK(ft.learning_rate == 5e-5);
  const Config over = Config::parse("optimizer.lr = 0.01\noptimizer.clip = 0\n");
  CHECK(optimizer_config(over, ModelFamily::FlairStack).learning_rate == 0.01);
  CHECK_FALSE(optimizer_config(over, ModelFamily::FlairStack).clip_norm.has_value());
  for (const char* key : {"model.family", "optimizer.lr", "corpus.scheme", "tars.verbalization_path", "context.window"})
    CHECK(known_config_keys().count(key) == 1);
}

TEST_CASE("manifest parsing") {
  const Manifest m = parse_manifest("[global]\nepochs = 3\n[run a]\nmodel.family = tars\n[run b]\nepochs = 5\n");
  REQUIRE(m.runs.size() == 2);
  CHECK(m.runs[0].config.get_int("epochs", 0) == 3);
  CHECK(config_family(m.runs[0].config) == ModelFamily::Tars);
  CHECK(m.runs[1].config.get_int("epochs", 0) == 5);
  CHECK_THROWS_AS(parse_manifest(""), DataError);
  CHECK_THROWS_AS(parse_manifest("[global]\nepochs = 3\n"), DataError);
  CHECK_THROWS_AS(parse_manifest("[run a]\n[run a]\n"), DataError);
  CHECK_THROWS_AS(parse_manifest("epochs = 3\n[run a]\n"), DataError);
}

TEST_CASE("ablations") {
  const Corpus c = generate_synthetic(acklab::testing::synth_config(40, 5, 5, 3));
  CHECK(apply_ablation(c, "org-merge").labels == std::vector<Label>{"GRNB", "IND", "ORG"});
  CHECK(apply_ablation(c, "no-misc").labels.size() == 5);
  CHECK(apply_ablation(c, "none").labels == c.labels);
  CHECK_THROWS_AS(apply_ablation(c, "bogus"), DataError);
}

TEST_CASE("cli usage errors exit 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  const CliRun bad_flag = cli({"corpus-stats", "--corpus", "x", "--wat"});
  CHECK(bad_flag.code == 1);
  CHECK(bad_flag.err.find("Usage") != std::string::npos);
  CHECK(cli({"evaluate", "--corpus", "x"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("cli data errors exit 2") {
  CHECK(cli({"corpus-stats", "--corpus", "/nonexistent/corpus"}).code == 2);
  CHECK(cli({"experiment", "--manifest", "/nonexistent.ini", "--out", "/tmp/x"}).code == 2);
}

TEST_CASE("cli synth, corpus-stats, train, predict, evaluate, compare") {
  const auto dir = acklab::testing::temp_dir("cli");
  const std::string corpus = (dir / "c1").string();
  CHECK(cli({"synth", "--data", acklab::testing::data_dir(), "--out", corpus, "--train", "29", "--dev", "10", "--test",
             "10", "--seed", "4"})
            .code == 0);
  const std::string stats_path = (dir / "stats.json").string();
  REQUIRE(cli({"corpus-stats", "--corpus", corpus, "--out", stats_path}).code == 0);
  const json stats = json::parse(read_file(stats_path));
  CHECK(stats.at("train").at("sentences") == 29);
  CHECK(stats.at("dev").at("sentences") == 10);
  CHECK(stats.at("test").at("sentences") == 10);

  write_file((dir / "train.ini").string(), "model.family = flair-stack\n" + kSmallModel + resource_keys(dir));
  const std::string model = (dir / "m.ckpt").string();
  const CliRun train = cli({"train", "--config", (dir / "train.ini").string(), "--corpus", corpus, "--out", model,
                            "--log", (dir / "log.jsonl").string()});
  CHECK_MESSAGE(train.code == 0, train.err);
  CHECK(read_file((dir / "log.jsonl").string()).find("dev_f1") != std::string::npos);

  const std::string report = (dir / "report.json").string();
  CHECK(cli({"evaluate", "--model", model, "--corpus", corpus + "/test.conll", "--out", report}).code == 0);
  const json rj = json::parse(read_file(report));
  CHECK(rj.at("runs").size() == 1);

  const std::string pred = (dir / "pred.conll").string();
  CHECK(cli({"predict", "--model", model, "--input", corpus + "/test.conll", "--out", pred}).code == 0);
  const std::string report2 = (dir / "report2.json").string();
  CHECK(cli({"evaluate", "--predictions", pred, "--corpus", corpus, "--name", "from-file", "--out", report2}).code == 0);
  CHECK(json::parse(read_file(report2)).at("runs")[0].at("micro_f1") == rj.at("runs")[0].at("micro_f1"));

  write_file((dir / "raw.txt").string(), "We thank Jane Doe. Funding came from the Science Council.\n");
  const CliRun raw = cli({"predict", "--model", model, "--input", (dir / "raw.txt").string()});
  CHECK(raw.code == 0);
  CHECK(raw.out.find("# id = p1-1") != std::string::npos);

  const CliRun cmp = cli({"compare", report, report2, "--text", (dir / "cmp.txt").string()});
  CHECK(cmp.code == 0);
  CHECK(json::parse(cmp.out).at("columns").size() == 2);
  CHECK(cli({"compare", report}).code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli annotate round trip") {
  const auto dir = acklab::testing::temp_dir("annotate");
  const std::vector<Sentence> up{acklab::testing::words("d1", "We thank Jane Doe for grant 01PQ17001 .", {{2, 4, "PER"}})};
  write_file((dir / "up.conll").string(), write_conll(up, Scheme::Bio));
  write_file((dir / "grants.txt").string(), "01PQ17001\n");
  const std::string drafts = (dir / "drafts.json").string();
  CHECK(cli({"annotate", "--upstream", (dir / "up.conll").string(), "--grants", (dir / "grants.txt").string(), "--out",
             drafts})
            .code == 0);
  const DraftCorpus d = load_review(read_file(drafts));
  REQUIRE(d.documents.size() == 1);
  std::string log;
  for (const DraftSpan& s : d.documents[0].drafts)
    log += decision_to_json({d.documents[0].doc_id, s.id, ReviewAction::Accept, "", -1, -1, ""}) + "\n";
  write_file((dir / "log.ndjson").string(), log);
  const std::string gold = (dir / "gold").string();
  CHECK(cli({"annotate", "--drafts", drafts, "--decisions", (dir / "log.ndjson").string(), "--out", gold}).code == 0);
  const Corpus c = load_corpus(gold);
  REQUIRE(c.train.size() == 1);
  CHECK(c.train[0].spans.size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment: partial failure, ablation labels, reproducibility") {
  const auto dir = acklab::testing::temp_dir("experiment");
  save_corpus(generate_synthetic(acklab::testing::synth_config(20, 6, 6, 8)), (dir / "c").string());
  const std::string manifest = "[global]\n" + resource_keys(dir) + kSmallModel +
                               "corpus.path = c\n"
                               "[run merged]\nmodel.family = flair-stack\nablation = org-merge\n"
                               "[run nomisc]\nmodel.family = mini-transformer-finetune\nablation = no-misc\n"
                               "[run broken]\nmodel.family = flair-stack\ncorpus.path = missing\n";
  write_file((dir / "grid.ini").string(), manifest);
  const CliRun first = cli({"experiment", "--manifest", (dir / "grid.ini").string(), "--out", (dir / "out1").string()});
  CHECK(first.code == 2);
  const json reports = json::parse(read_file((dir / "out1" / "reports.json").string()));
  REQUIRE(reports.at("runs").size() == 2);
  CHECK(reports.at("runs")[0].at("classes").size() == 3);
  CHECK(reports.at("runs")[1].at("classes").size() == 5);
  const json errors = json::parse(read_file((dir / "out1" / "errors.json").string()));
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].at("run") == "broken");
  CHECK(std::filesystem::exists(dir / "out1" / "comparison.txt"));
  CHECK(std::filesystem::exists(dir / "out1" / "merged" / "predictions.conll"));

  cli({"experiment", "--manifest", (dir / "grid.ini").string(), "--out", (dir / "out2").string()});
  CHECK(read_file((dir / "out1" / "reports.json").string()) == read_file((dir / "out2" / "reports.json").string()));
  CHECK(read_file((dir / "out1" / "merged" / "training_log.jsonl").string()) ==
        read_file((dir / "out2" / "merged" / "training_log.jsonl").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("shipped manifests parse") {
  const std::filesystem::path dir = std::filesystem::path(acklab::testing::data_dir()).parent_path() / "experiments";
  std::map<std::string, std::size_t> runs;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".ini") runs[entry.path().filename().string()] = load_manifest(entry.path().string()).runs.size();
  CHECK(runs == std::map<std::string, std::size_t>{
                    {"no-misc.ini", 3}, {"org-merge.ini", 3}, {"paper-grid.ini", 6}, {"strings-plus-flert.ini", 2}});
}
