#include "acklab/experiment.hpp"

#include "acklab/annotate.hpp"
#include "acklab/synth.hpp"
#include "acklab/tokenize.hpp"

#include <json.hpp>

#include <ostream>

namespace acklab {

namespace {

void say(std::ostream* os, const std::string& msg) {
  if (os) *os << msg << std::endl;
}

std::vector<std::string> plain_text(const Config& cfg) {
  const std::string text_path = cfg.get_path("embeddings.text_path");
  std::vector<std::string> lines;
  if (!text_path.empty()) {
    const std::string text = read_file(text_path);
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      std::string line = text.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back(std::move(line));
      pos = nl + 1;
    }
    return lines;
  }
  const std::string data = cfg.get_path("embeddings.synth_data", "data");
  const SynthConfig sc = load_synth_resources(data);
  return generate_plain_sentences(sc, static_cast<std::size_t>(cfg.get_int("embeddings.synth_sentences", 700)),
                                  cfg.get_u64("embeddings.synth_seed", 99));
}

std::string resource_signature(const Config& cfg) {
  std::string sig;
  for (const auto& [k, v] : cfg.values())
    if (k.rfind("embeddings.", 0) == 0 || k.rfind("static.", 0) == 0 || k.rfind("lm.", 0) == 0 || k == "seed")
      sig += k + "=" + v + "\n";
  return sig;
}

}  // namespace

Resources build_resources(const Config& cfg, std::ostream* progress) {
  const std::string cache = cfg.get_path("embeddings.cache_dir");
  const std::string signature = resource_signature(cfg);
  if (!cache.empty()) {
    const std::filesystem::path dir(cache);
    if (std::filesystem::exists(dir / "signature.txt") && read_file((dir / "signature.txt").string()) == signature) {
      say(progress, "embeddings: reusing " + cache);
      Resources r;
      r.static_table = std::make_shared<const StaticTable>(load_static((dir / "static.txt").string()));
      r.forward_lm = std::make_shared<const CharLm>(CharLm::load(Checkpoint::load((dir / "lm_forward.ckpt").string()), ""));
      r.backward_lm =
          std::make_shared<const CharLm>(CharLm::load(Checkpoint::load((dir / "lm_backward.ckpt").string()), ""));
      return r;
    }
  }

  Resources r;
  std::vector<std::string> lines;
  const std::string static_path = cfg.get_path("embeddings.static_path");
  const std::string fwd_path = cfg.get_path("embeddings.lm_forward");
  const std::string bwd_path = cfg.get_path("embeddings.lm_backward");
  if (static_path.empty() || fwd_path.empty() || bwd_path.empty()) lines = plain_text(cfg);

  if (!static_path.empty()) {
    r.static_table = std::make_shared<const StaticTable>(load_static(static_path));
  } else {
    std::vector<std::vector<std::string>> tokens;
    for (const std::string& l : lines) {
      std::vector<std::string> t;
      for (const Token& tok : tokenize(l)) t.push_back(tok.text);
      tokens.push_back(std::move(t));
    }
    r.static_table = std::make_shared<const StaticTable>(fit_static_table(tokens, static_fit_config(cfg)));
    say(progress, "embeddings: fitted " + std::to_string(r.static_table->size()) + " static vectors");
  }

  const CharLmConfig lm_cfg = char_lm_config(cfg);
  auto lm = [&](const std::string& path, Direction d) {
    if (!path.empty()) return std::make_shared<const CharLm>(CharLm::load(Checkpoint::load(path), ""));
    CharLmTraining t = train_char_lm(lines, d, lm_cfg);
    if (!t.log.empty())
      say(progress, std::string("embeddings: ") + direction_name(d) + " char-LM held-out perplexity " +
                        format_double(t.log.front().heldout_perplexity) + " -> " +
                        format_double(t.log.back().heldout_perplexity));
    return std::make_shared<const CharLm>(std::move(t.model));
  };
  r.forward_lm = lm(fwd_path, Direction::Forward);
  r.backward_lm = lm(bwd_path, Direction::Backward);

  if (!cache.empty()) {
    const std::filesystem::path dir(cache);
    std::filesystem::create_directories(dir);
    save_static(*r.static_table, (dir / "static.txt").string());
    Checkpoint f, b;
    r.forward_lm->save(f, "");
    r.backward_lm->save(b, "");
    f.save((dir / "lm_forward.ckpt").string());
    b.save((dir / "lm_backward.ckpt").string());
    write_file((dir / "signature.txt").string(), signature);
  }
  return r;
}

Corpus apply_ablation(const Corpus& corpus, const std::string& ablation) {
  if (ablation == "none" || ablation == "strings-plus-flert") return corpus;
  if (ablation == "org-merge") return merge_categories(corpus, org_merge_mapping(), {labels::kMisc});
  if (ablation == "no-misc") return merge_categories(corpus, {}, {labels::kMisc});
  throw DataError("unknown ablation '" + ablation + "' (expected none, org-merge, no-misc or strings-plus-flert)");
}

RunOutcome run_one(const ManifestRun& run, const Resources& resources, const std::filesystem::path& run_dir,
                   std::ostream* progress) {
  RunOutcome out;
  out.name = run.name;
  try {
    const Config& cfg = run.config;
    const std::string corpus_path = cfg.get_path("corpus.path");
    if (corpus_path.empty()) throw DataError("run " + run.name + ": corpus.path is not set");
    if (!std::filesystem::exists(corpus_path)) throw DataError("run " + run.name + ": corpus " + corpus_path + " not found");
    const std::string ablation = cfg.get("ablation", "none");
    Corpus corpus = apply_ablation(load_corpus(corpus_path), ablation);
    corpus.scheme = parse_scheme(cfg.get("corpus.scheme", "bioes"));

    const ModelFamily family = config_family(cfg);
    RunMeta meta;
    meta.name = run.name;
    meta.family = family_name(family);
    meta.corpus = cfg.get("corpus.id", std::filesystem::path(corpus_path).filename().string());
    meta.ablation = ablation;
    meta.seed = cfg.get_u64("seed", 1);
    say(progress, "run " + run.name + ": " + meta.family + " on " + meta.corpus + " (" + ablation + ")");

    std::vector<std::vector<Span>> predictions;
    Checkpoint ck;
    if (family == ModelFamily::Tars) {
      if (ablation == "strings-plus-flert") throw DataError("run " + run.name + ": strings-plus-flert needs flair-stack");
      Verbalization v = verbalization_config(cfg);
      // The merged class has no phrase in the default mapping.
      if (ablation == "org-merge" && !v.count(labels::kOrg)) v[labels::kOrg] = "Organization";
      TarsTraining t = train_tars(corpus, v, tars_config(cfg), optimizer_config(cfg, family), resources);
      const std::vector<Candidate> candidates = candidates_from(t.model.trained_verbalization());
      for (const Sentence& s : corpus.test) predictions.push_back(t.model.predict(s, candidates));
      out.log = std::move(t.log);
      t.model.save(ck);
    } else {
      TaggerConfig tc = tagger_config(cfg);
      std::vector<EmbedderPtr> extra;
      if (ablation == "strings-plus-flert") {
        if (family != ModelFamily::FlairStack)
          throw DataError("run " + run.name + ": strings-plus-flert needs model.family = flair-stack");
        TaggerConfig flert = tc;
        flert.family = ModelFamily::TransformerFinetune;
        flert.epochs = cfg.get_int("flert.epochs", tc.epochs);
        // optimizer.* keys belong to the CRF stage here.
        OptimizerConfig fo = OptimizerConfig::finetune_default();
        fo.learning_rate = cfg.get_double("flert.lr", fo.learning_rate);
        say(progress, "run " + run.name + ": fine-tuning the transformer stage");
        TaggerTraining stage = train_tagger(flert, corpus, fo, resources);
        extra.push_back(std::make_shared<TransformerFeatureEmbedder>(
            std::make_shared<const SequenceTagger>(std::move(stage.model))));
        tc.stack_static = false;
        tc.stack_contextual = true;
      }
      TaggerTraining t = train_tagger(tc, corpus, optimizer_config(cfg, family), resources, std::move(extra));
      for (Prediction& p : t.model.predict_all(corpus.test)) predictions.push_back(std::move(p.spans));
      out.log = std::move(t.log);
      t.model.save(ck);
    }

    std::vector<Label> inventory = corpus.labels;
    EvalReport report = score_aligned(corpus.test, predictions, inventory);
    report.meta = meta;
    say(progress, "run " + run.name + ": test micro-F1 " + format_double(report.micro_f1()));

    if (!run_dir.empty()) {
      std::filesystem::create_directories(run_dir);
      write_file((run_dir / "report.json").string(), reports_to_json(std::span<const EvalReport>(&report, 1)));
      write_file((run_dir / "training_log.jsonl").string(), training_log_jsonl(out.log));
      write_file((run_dir / "predictions.conll").string(),
                 write_conll_predictions(corpus.test, predictions, corpus.scheme));
      if (cfg.get_bool("output.save_model", false)) ck.save((run_dir / "model.ckpt").string());
    }
    out.report = std::move(report);
  } catch (const std::exception& e) {
    out.error = e.what();
    out.report.reset();
    say(progress, "run " + run.name + " failed: " + out.error);
  }
  return out;
}

bool ExperimentResult::all_ok() const {
  for (const RunOutcome& r : runs)
    if (!r.ok()) return false;
  return true;
}

ExperimentResult run_experiment(const Manifest& manifest, const std::filesystem::path& out_dir, std::ostream* progress) {
  if (manifest.runs.empty()) throw DataError("manifest: no runs");
  ExperimentResult result;
  Resources resources;
  std::string resource_error;
  try {
    resources = build_resources(manifest.global, progress);
  } catch (const std::exception& e) {
    resource_error = std::string("embedding resources: ") + e.what();
    say(progress, resource_error);
  }
  for (const ManifestRun& run : manifest.runs) {
    if (!resource_error.empty()) {
      result.runs.push_back({run.name, std::nullopt, {}, resource_error});
      continue;
    }
    RunOutcome o = run_one(run, resources, out_dir.empty() ? out_dir : out_dir / run.name, progress);
    if (o.report) result.reports.push_back(*o.report);
    result.runs.push_back(std::move(o));
  }
  if (result.reports.size() >= 2) result.comparison = compare(result.reports);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file((out_dir / "reports.json").string(), reports_to_json(result.reports));
    if (result.comparison) {
      write_file((out_dir / "comparison.json").string(), comparison_to_json(*result.comparison));
      write_file((out_dir / "comparison.txt").string(), comparison_to_text(*result.comparison));
      write_file((out_dir / "comparison.csv").string(), comparison_to_csv(*result.comparison));
    }
    nlohmann::ordered_json errors = nlohmann::ordered_json::array();
    for (const RunOutcome& r : result.runs)
      if (!r.ok()) errors.push_back({{"run", r.name}, {"error", r.error}});
    write_file((out_dir / "errors.json").string(), errors.dump(2) + "\n");
  }
  return result;
}

}  // namespace acklab
