#pragma once

// Exact-match span scoring and run comparison tables.
//
// The overall score is micro-averaged span F1 over pooled counts. It is the
// number reported as "overall accuracy" in comparison tables.

#include "acklab/corpus.hpp"

#include <cstdint>

namespace acklab {

struct ClassScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // 0/0 is taken as 0 for all three.
  double precision() const;
  double recall() const;
  double f1() const;
  ClassScore& operator+=(const ClassScore& o);
};

struct RunMeta {
  std::string name;
  std::string family;
  std::string corpus;
  std::string ablation = "none";
  std::uint64_t seed = 0;

  std::string column() const;
  bool operator==(const RunMeta&) const = default;
};

struct EvalReport {
  RunMeta meta;
  std::map<Label, ClassScore> classes;

  ClassScore micro() const;
  double micro_f1() const { return micro().f1(); }
};

// Predictions keyed by sentence id; gold sentences without an entry count as
// predicting nothing. Throws DataError for ids absent from gold. `inventory`
// labels get a (possibly all-zero) row even when unseen.
EvalReport score_spans(std::span<const Sentence> gold, const std::map<std::string, std::vector<Span>>& predictions,
                       std::span<const Label> inventory = {});

// Predictions aligned by position with gold.
EvalReport score_aligned(std::span<const Sentence> gold, std::span<const std::vector<Span>> predictions,
                         std::span<const Label> inventory = {});

// {"runs":[{"meta":{...},"classes":{"L":{"tp","fp","fn","p","r","f1"}},"micro_f1":x}]}
std::string reports_to_json(std::span<const EvalReport> reports);
std::vector<EvalReport> reports_from_json(const std::string& text);

// Row order used by every table: FUND, GRNB, IND, UNI, COR, MISC, then any
// other label alphabetically.
std::vector<Label> report_row_order(const std::vector<Label>& present);

struct Comparison {
  std::vector<std::string> columns;
  std::vector<std::string> rows;                // labels then "overall"
  std::vector<std::vector<double>> f1;          // [row][column]; NaN when the run lacks the label
};

// Needs at least two reports with distinct metadata.
Comparison compare(std::span<const EvalReport> reports);
std::string comparison_to_json(const Comparison& c);
std::string comparison_to_text(const Comparison& c);
// "row,column,f1" lines for plotting.
std::string comparison_to_csv(const Comparison& c);

}  // namespace acklab
