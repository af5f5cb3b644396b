#pragma once

// Manifest-driven experiment grid: shared embedding resources, per-run
// training and evaluation, and the comparison table.

#include "acklab/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace acklab {

// Static vectors and both char-LMs, loaded from configured paths or fitted
// on plain text (a text file, or sentences generated from the synthetic data
// directory). With embeddings.cache_dir set, fitted resources are written
// there and reused while the relevant keys stay the same.
Resources build_resources(const Config& cfg, std::ostream* progress = nullptr);

// "none", "org-merge" (FUND/COR/UNI -> ORG, MISC dropped), "no-misc" (MISC
// dropped) or "strings-plus-flert" (corpus unchanged).
Corpus apply_ablation(const Corpus& corpus, const std::string& ablation);

struct RunOutcome {
  std::string name;
  std::optional<EvalReport> report;
  std::vector<TrainingLogEntry> log;
  std::string error;  // nonempty when the run failed
  bool ok() const { return error.empty(); }
};

// Trains and evaluates one run on its corpus's test split. Files are written
// under `run_dir` when it is nonempty: report.json, training_log.jsonl,
// predictions.conll and optionally model.ckpt.
RunOutcome run_one(const ManifestRun& run, const Resources& resources, const std::filesystem::path& run_dir,
                   std::ostream* progress = nullptr);

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::vector<EvalReport> reports;
  std::optional<Comparison> comparison;  // present with two or more reports
  bool all_ok() const;
};

// Runs every manifest entry; one failing run does not stop the others. Writes
// reports.json, comparison.{json,txt,csv} and errors.json under out_dir.
ExperimentResult run_experiment(const Manifest& manifest, const std::filesystem::path& out_dir,
                                std::ostream* progress = nullptr);

}  // namespace acklab
