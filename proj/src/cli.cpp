#include "acklab/cli.hpp"

#include "acklab/annotate.hpp"
#include "acklab/experiment.hpp"
#include "acklab/review.hpp"
#include "acklab/synth.hpp"
#include "acklab/tokenize.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <variant>

namespace acklab {

namespace {

// A loaded checkpoint of either kind.
struct LoadedModel {
  std::variant<SequenceTagger, TarsModel> model;

  static LoadedModel load(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.get_meta("family", "") == "tars") return {TarsModel::load(ck)};
    return {SequenceTagger::load(ck)};
  }

  bool is_tars() const { return std::holds_alternative<TarsModel>(model); }
  const TarsModel& tars() const { return std::get<TarsModel>(model); }
  const SequenceTagger& tagger() const { return std::get<SequenceTagger>(model); }

  std::string family() const { return is_tars() ? "tars" : family_name(tagger().config().family); }
  Scheme scheme() const { return is_tars() ? Scheme::Bioes : tagger().config().scheme; }

  std::vector<std::vector<Span>> predict(std::span<const Sentence> sentences,
                                         std::span<const Candidate> candidates) const {
    std::vector<std::vector<Span>> out;
    if (is_tars()) {
      for (const Sentence& s : sentences) out.push_back(tars().predict(s, candidates));
    } else {
      for (Prediction& p : tagger().predict_all(sentences)) out.push_back(std::move(p.spans));
    }
    return out;
  }
};

// "IND=Person,GRT=Grant number" style candidate lists.
Verbalization parse_label_list(const std::string& spec) {
  Verbalization v;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    const std::string item = spec.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw DataError("--labels: expected LABEL=phrase, got '" + item + "'");
    v[item.substr(0, eq)] = item.substr(eq + 1);
  }
  if (v.empty()) throw DataError("--labels: no labels given");
  return v;
}

std::vector<Candidate> tars_candidates(const LoadedModel& m, const std::string& labels_spec,
                                       const std::string& verbalization_path) {
  if (!m.is_tars()) {
    if (!labels_spec.empty() || !verbalization_path.empty())
      throw DataError("--labels and --verbalization apply to TARS models only");
    return {};
  }
  if (!labels_spec.empty()) return candidates_from(parse_label_list(labels_spec));
  if (!verbalization_path.empty()) return candidates_from(load_verbalization(verbalization_path));
  return candidates_from(m.tars().trained_verbalization());
}

// Raw text: one paragraph per line, split into sentences. Each line is its own
// document so paragraph context stays within the line.
std::vector<Sentence> sentences_from_text(const std::string& text) {
  std::vector<Sentence> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    int k = 0;
    for (const std::string& piece : split_sentences(line)) {
      Sentence s = sentence_from_text("p" + std::to_string(line_no) + "-" + std::to_string(k++), piece);
      if (s.tokens.empty()) continue;
      s.set_meta("doc", "p" + std::to_string(line_no));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Sentence> load_input(const std::string& path) {
  const std::string text = read_file(path);
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".conll") return parse_conll(text).sentences;
  return sentences_from_text(text);
}

void emit(const std::string& out_path, const std::string& contents, std::ostream& out) {
  if (out_path.empty() || out_path == "-")
    out << contents;
  else
    write_file(out_path, contents);
}

Config training_config(const std::string& config_path, const std::string& family, const std::string& corpus,
                       std::optional<std::uint64_t> seed, std::optional<int> epochs) {
  Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
  if (!family.empty()) cfg.set("model.family", family);
  if (!corpus.empty()) cfg.set("corpus.path", std::filesystem::absolute(corpus).string());
  if (seed) cfg.set("seed", std::to_string(*seed));
  if (epochs) cfg.set("epochs", std::to_string(*epochs));
  return cfg;
}

ReviewService* g_service = nullptr;

void stop_service(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Acknowledgement entity extraction: training, evaluation and annotation tools", "acklab"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // train
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  std::string train_config, train_family, train_corpus, train_out, train_log, train_report;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  train->add_option("--config", train_config, "Key = value config file");
  train->add_option("--family", train_family, "flair-stack, mini-transformer-finetune or tars");
  train->add_option("--corpus", train_corpus, "Corpus directory (train/dev/test.conll)");
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--log", train_log, "Per-epoch JSONL log");
  train->add_option("--report", train_report, "Test-split report JSON");
  train->add_option("--seed", train_seed, "Random seed");
  train->add_option("--epochs", train_epochs, "Epoch count (0 keeps the initialization)");

  // predict
  auto* predict = app.add_subcommand("predict", "Tag a CoNLL file or raw text");
  std::string pred_model, pred_input, pred_out, pred_labels, pred_verbalization;
  predict->add_option("--model", pred_model, "Checkpoint")->required();
  predict->add_option("--input", pred_input, "Input: .conll, or raw text with one paragraph per line")->required();
  predict->add_option("--out", pred_out, "Output CoNLL (default stdout)");
  predict->add_option("--labels", pred_labels, "TARS candidates as LABEL=phrase,LABEL=phrase");
  predict->add_option("--verbalization", pred_verbalization, "TARS candidates from a LABEL<TAB>phrase file");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a model or a prediction file against gold");
  std::string ev_model, ev_predictions, ev_corpus, ev_split = "test", ev_out, ev_name, ev_labels;
  evaluate->add_option("--model", ev_model, "Checkpoint");
  evaluate->add_option("--predictions", ev_predictions, "Predicted CoNLL with sentence ids");
  evaluate->add_option("--corpus", ev_corpus, "Gold corpus directory or CoNLL file")->required();
  evaluate->add_option("--split", ev_split, "Split of a corpus directory")->check(CLI::IsMember({"train", "dev", "test"}));
  evaluate->add_option("--out", ev_out, "Report JSON (default stdout)");
  evaluate->add_option("--name", ev_name, "Run name recorded in the report");
  evaluate->add_option("--labels", ev_labels, "TARS candidates as LABEL=phrase,...");

  // compare
  auto* cmp = app.add_subcommand("compare", "Build the comparison table from reports");
  std::vector<std::string> cmp_reports;
  std::string cmp_out, cmp_text, cmp_csv;
  cmp->add_option("reports", cmp_reports, "Report JSON files")->required();
  cmp->add_option("--out", cmp_out, "Comparison JSON (default stdout)");
  cmp->add_option("--text", cmp_text, "Fixed-width text table");
  cmp->add_option("--csv", cmp_csv, "CSV table");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Seed draft annotations, or apply review decisions");
  std::string an_upstream, an_grants, an_orgs, an_rules, an_out, an_drafts, an_decisions;
  annotate->add_option("--upstream", an_upstream, "Upstream CoNLL with PER spans");
  annotate->add_option("--grants", an_grants, "Grant index, one entry per line");
  annotate->add_option("--orgs", an_orgs, "Organization index, one entry per line");
  annotate->add_option("--rules", an_rules, "Org rule table");
  annotate->add_option("--drafts", an_drafts, "Draft JSON to apply decisions to");
  annotate->add_option("--decisions", an_decisions, "Decision log (JSON lines)");
  annotate->add_option("--out", an_out, "Draft JSON, or corpus directory when applying")->required();

  // review-serve
  auto* serve = app.add_subcommand("review-serve", "Serve the review API over HTTP");
  std::string sv_drafts, sv_log, sv_host = "127.0.0.1";
  int sv_port = 8080;
  serve->add_option("--drafts", sv_drafts, "Draft JSON")->required();
  serve->add_option("--log", sv_log, "Append-only decision log");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port (0 picks a free one)");

  // corpus-stats
  auto* stats = app.add_subcommand("corpus-stats", "Split sizes and per-label span counts");
  std::string st_corpus, st_out;
  stats->add_option("--corpus", st_corpus, "Corpus directory or CoNLL file")->required();
  stats->add_option("--out", st_out, "Stats JSON (default stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string sy_data = "data", sy_out, sy_proportions, sy_scheme = "bioes", sy_prefix = "synth";
  SynthConfig sy_defaults;
  std::size_t sy_train = sy_defaults.train, sy_dev = sy_defaults.dev, sy_test = sy_defaults.test;
  std::uint64_t sy_seed = sy_defaults.seed;
  synth->add_option("--data", sy_data, "Directory with templates.txt and vocab/");
  synth->add_option("--out", sy_out, "Output corpus directory")->required();
  synth->add_option("--train", sy_train, "Train sentences");
  synth->add_option("--dev", sy_dev, "Dev sentences");
  synth->add_option("--test", sy_test, "Test sentences");
  synth->add_option("--seed", sy_seed, "Random seed");
  synth->add_option("--proportions", sy_proportions, "Label proportions, e.g. IND=0.3,GRT=0.2,{ANY}=0.5");
  synth->add_option("--scheme", sy_scheme, "bio or bioes")->check(CLI::IsMember({"bio", "bioes"}));
  synth->add_option("--id-prefix", sy_prefix, "Sentence id prefix");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run every entry of a manifest");
  std::string ex_manifest, ex_out;
  experiment->add_option("--manifest", ex_manifest, "Manifest .ini")->required();
  experiment->add_option("--out", ex_out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* failing = &app;
    for (CLI::App* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return 1;
  }

  try {
    if (train->parsed()) {
      Config cfg = training_config(train_config, train_family, train_corpus, train_seed, train_epochs);
      const std::string corpus_path = cfg.get_path("corpus.path");
      if (corpus_path.empty()) throw DataError("train: no corpus (use --corpus or corpus.path)");
      const std::string ablation = cfg.get("ablation", "none");
      if (ablation == "strings-plus-flert")
        throw DataError("train: strings-plus-flert runs through the experiment command");
      Corpus corpus = apply_ablation(load_corpus(corpus_path), ablation);
      corpus.scheme = parse_scheme(cfg.get("corpus.scheme", "bioes"));
      const Resources resources = build_resources(cfg, &err);
      const ModelFamily family = config_family(cfg);
      Checkpoint ck;
      std::vector<TrainingLogEntry> log;
      EvalReport report;
      if (family == ModelFamily::Tars) {
        Verbalization v = verbalization_config(cfg);
        if (ablation == "org-merge" && !v.count(labels::kOrg)) v[labels::kOrg] = "Organization";
        TarsTraining t = train_tars(corpus, v, tars_config(cfg), optimizer_config(cfg, family), resources);
        t.model.save(ck);
        log = std::move(t.log);
        report = evaluate_tars(t.model, corpus.test, candidates_from(t.model.trained_verbalization()));
      } else {
        TaggerTraining t = train_tagger(tagger_config(cfg), corpus, optimizer_config(cfg, family), resources);
        t.model.save(ck);
        log = std::move(t.log);
        report = evaluate_tagger(t.model, corpus.test);
      }
      ck.save(train_out);
      if (!train_log.empty()) write_file(train_log, training_log_jsonl(log));
      report.meta.name = std::filesystem::path(train_out).stem().string();
      report.meta.family = family_name(family);
      report.meta.corpus = cfg.get("corpus.id", std::filesystem::path(corpus_path).filename().string());
      report.meta.ablation = ablation;
      report.meta.seed = cfg.get_u64("seed", 1);
      if (!train_report.empty()) write_file(train_report, reports_to_json(std::span<const EvalReport>(&report, 1)));
      for (const TrainingLogEntry& e : log)
        err << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " dev-F1 " << format_double(e.dev_f1)
            << "\n";
      err << "test micro-F1 " << format_double(report.micro_f1()) << "\n";
      return 0;
    }

    if (predict->parsed()) {
      const LoadedModel m = LoadedModel::load(pred_model);
      const std::vector<Candidate> candidates = tars_candidates(m, pred_labels, pred_verbalization);
      const std::vector<Sentence> sentences = load_input(pred_input);
      const std::vector<std::vector<Span>> spans = m.predict(sentences, candidates);
      emit(pred_out, write_conll_predictions(sentences, spans, m.scheme()), out);
      return 0;
    }

    if (evaluate->parsed()) {
      if (ev_model.empty() == ev_predictions.empty()) {
        err << "error: evaluate needs exactly one of --model and --predictions\n\n" << evaluate->help();
        return 1;
      }
      const std::filesystem::path cp(ev_corpus);
      std::vector<Sentence> gold;
      if (std::filesystem::is_directory(cp)) {
        Corpus c = load_corpus(ev_corpus);
        gold = ev_split == "train" ? c.train : ev_split == "dev" ? c.dev : c.test;
      } else {
        gold = parse_conll(read_file(ev_corpus)).sentences;
      }
      EvalReport report;
      if (!ev_model.empty()) {
        const LoadedModel m = LoadedModel::load(ev_model);
        const std::vector<Candidate> candidates = tars_candidates(m, ev_labels, "");
        report = score_aligned(gold, m.predict(gold, candidates));
        report.meta.family = m.family();
      } else {
        std::map<std::string, std::vector<Span>> predicted;
        for (Sentence& s : parse_conll(read_file(ev_predictions)).sentences) {
          if (!predicted.emplace(s.id, std::move(s.spans)).second)
            throw DataError("predictions: duplicate sentence id " + s.id);
        }
        report = score_spans(gold, predicted);
      }
      report.meta.name = ev_name.empty() ? std::filesystem::path(ev_model.empty() ? ev_predictions : ev_model).stem().string()
                                         : ev_name;
      report.meta.corpus = cp.filename().string();
      emit(ev_out, reports_to_json(std::span<const EvalReport>(&report, 1)), out);
      return 0;
    }

    if (cmp->parsed()) {
      std::vector<EvalReport> reports;
      for (const std::string& path : cmp_reports)
        for (EvalReport& r : reports_from_json(read_file(path))) reports.push_back(std::move(r));
      const Comparison c = compare(reports);
      emit(cmp_out, comparison_to_json(c), out);
      if (!cmp_text.empty()) emit(cmp_text, comparison_to_text(c), out);
      if (!cmp_csv.empty()) emit(cmp_csv, comparison_to_csv(c), out);
      return 0;
    }

    if (annotate->parsed()) {
      if (!an_drafts.empty()) {
        if (!an_upstream.empty()) {
          err << "error: --drafts and --upstream are separate modes\n\n" << annotate->help();
          return 1;
        }
        const DraftCorpus drafts = load_review(read_file(an_drafts));
        std::vector<ReviewDecision> decisions;
        if (!an_decisions.empty()) {
          const std::string log = read_file(an_decisions);
          std::size_t pos = 0;
          while (pos < log.size()) {
            std::size_t nl = log.find('\n', pos);
            if (nl == std::string::npos) nl = log.size();
            const std::string line = log.substr(pos, nl - pos);
            pos = nl + 1;
            if (!line.empty()) decisions.push_back(decision_from_json(line));
          }
        }
        save_corpus(apply_review(drafts, decisions), an_out);
        return 0;
      }
      if (an_upstream.empty()) {
        err << "error: annotate needs --upstream (seed drafts) or --drafts (apply decisions)\n\n" << annotate->help();
        return 1;
      }
      const std::vector<Sentence> upstream = parse_conll(read_file(an_upstream)).sentences;
      const std::vector<std::string> grants = an_grants.empty() ? std::vector<std::string>{} : load_index(an_grants);
      const std::vector<std::string> orgs = an_orgs.empty() ? std::vector<std::string>{} : load_index(an_orgs);
      const RuleTable rules = an_rules.empty() ? RuleTable::builtin() : RuleTable::load(an_rules);
      write_file(an_out, emit_review(seed_annotations(upstream, grants, orgs, rules)));
      return 0;
    }

    if (serve->parsed()) {
      ReviewSession session(load_review(read_file(sv_drafts)),
                            sv_log.empty() ? std::nullopt : std::optional<std::string>(sv_log));
      ReviewService service(session);
      const int port = service.bind(sv_host, sv_port);
      out << "review service listening on http://" << sv_host << ":" << port << std::endl;
      g_service = &service;
      std::signal(SIGINT, stop_service);
      std::signal(SIGTERM, stop_service);
      service.listen();
      g_service = nullptr;
      return 0;
    }

    if (stats->parsed()) {
      emit(st_out, stats_to_json(corpus_stats(load_corpus_or_split(st_corpus))), out);
      return 0;
    }

    if (synth->parsed()) {
      SynthConfig sc = load_synth_resources(sy_data);
      sc.train = sy_train;
      sc.dev = sy_dev;
      sc.test = sy_test;
      sc.seed = sy_seed;
      sc.scheme = parse_scheme(sy_scheme);
      sc.id_prefix = sy_prefix;
      if (!sy_proportions.empty()) sc.proportions = parse_proportions(sy_proportions);
      const Corpus c = generate_synthetic(sc);
      save_corpus(c, sy_out);
      out << "wrote " << c.train.size() << "/" << c.dev.size() << "/" << c.test.size() << " sentences to " << sy_out
          << "\n";
      return 0;
    }

    if (experiment->parsed()) {
      const ExperimentResult r = run_experiment(load_manifest(ex_manifest), ex_out, &err);
      if (r.comparison) out << comparison_to_text(*r.comparison);
      if (!r.all_ok()) {
        for (const RunOutcome& o : r.runs)
          if (!o.ok()) err << "run " << o.name << " failed: " << o.error << "\n";
        return 2;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace acklab
