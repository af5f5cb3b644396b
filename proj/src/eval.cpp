#include "acklab/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace acklab {

using json = nlohmann::ordered_json;

namespace {
double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double ClassScore::precision() const { return ratio(tp, tp + fp); }
double ClassScore::recall() const { return ratio(tp, tp + fn); }

double ClassScore::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

ClassScore& ClassScore::operator+=(const ClassScore& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

std::string RunMeta::column() const {
  if (!name.empty()) return name;
  return family + "/" + corpus + "/" + ablation;
}

ClassScore EvalReport::micro() const {
  ClassScore total;
  for (const auto& [_, s] : classes) total += s;
  return total;
}

namespace {

void score_sentence(const Sentence& gold, const std::vector<Span>& pred, std::map<Label, ClassScore>& classes) {
  std::multiset<Span> remaining(gold.spans.begin(), gold.spans.end());
  for (const Span& p : pred) {
    auto it = remaining.find(p);
    if (it != remaining.end()) {
      ++classes[p.label].tp;
      remaining.erase(it);
    } else {
      ++classes[p.label].fp;
    }
  }
  for (const Span& g : remaining) ++classes[g.label].fn;
}

}  // namespace

EvalReport score_spans(std::span<const Sentence> gold, const std::map<std::string, std::vector<Span>>& predictions,
                       std::span<const Label> inventory) {
  std::map<std::string, const Sentence*> by_id;
  for (const auto& s : gold) by_id[s.id] = &s;
  for (const auto& [id, _] : predictions)
    if (!by_id.count(id)) throw DataError("prediction for unknown sentence id " + id);

  EvalReport report;
  for (const Label& l : inventory) report.classes[l];
  static const std::vector<Span> kNone;
  for (const auto& s : gold) {
    auto it = predictions.find(s.id);
    score_sentence(s, it == predictions.end() ? kNone : it->second, report.classes);
  }
  return report;
}

EvalReport score_aligned(std::span<const Sentence> gold, std::span<const std::vector<Span>> predictions,
                         std::span<const Label> inventory) {
  if (gold.size() != predictions.size())
    throw DataError("score: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(gold.size()) + " sentences");
  EvalReport report;
  for (const Label& l : inventory) report.classes[l];
  for (std::size_t i = 0; i < gold.size(); ++i) score_sentence(gold[i], predictions[i], report.classes);
  return report;
}

std::string reports_to_json(std::span<const EvalReport> reports) {
  json runs = json::array();
  for (const auto& r : reports) {
    json meta = {{"name", r.meta.name},
                 {"family", r.meta.family},
                 {"corpus", r.meta.corpus},
                 {"ablation", r.meta.ablation},
                 {"seed", r.meta.seed}};
    json classes = json::object();
    for (const Label& l : report_row_order([&] {
           std::vector<Label> v;
           for (const auto& [k, _] : r.classes) v.push_back(k);
           return v;
         }())) {
      const ClassScore& s = r.classes.at(l);
      classes[l] = {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"p", s.precision()}, {"r", s.recall()}, {"f1", s.f1()}};
    }
    runs.push_back({{"meta", meta}, {"classes", classes}, {"micro_f1", r.micro_f1()}});
  }
  return json{{"runs", runs}}.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json(const std::string& text) {
  std::vector<EvalReport> out;
  try {
    const json j = json::parse(text);
    for (const auto& run : j.at("runs")) {
      EvalReport r;
      const auto& m = run.at("meta");
      r.meta.name = m.value("name", "");
      r.meta.family = m.value("family", "");
      r.meta.corpus = m.value("corpus", "");
      r.meta.ablation = m.value("ablation", "none");
      r.meta.seed = m.value("seed", std::uint64_t{0});
      for (const auto& [label, c] : run.at("classes").items()) {
        ClassScore s;
        s.tp = c.at("tp").get<std::size_t>();
        s.fp = c.at("fp").get<std::size_t>();
        s.fn = c.at("fn").get<std::size_t>();
        r.classes[label] = s;
      }
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("report JSON: ") + e.what());
  }
  return out;
}

std::vector<Label> report_row_order(const std::vector<Label>& present) {
  std::vector<Label> out;
  std::set<Label> rest(present.begin(), present.end());
  for (const Label& l : labels::acknowledgement_types()) {
    if (rest.erase(l)) out.push_back(l);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

Comparison compare(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw DataError("compare: need at least two reports");
  Comparison c;
  std::set<std::string> seen;
  std::vector<Label> present;
  std::set<Label> present_set;
  for (const auto& r : reports) {
    const std::string col = r.meta.column();
    if (!seen.insert(col).second) throw DataError("compare: duplicate run metadata '" + col + "'");
    c.columns.push_back(col);
    for (const auto& [l, _] : r.classes)
      if (present_set.insert(l).second) present.push_back(l);
  }
  const auto order = report_row_order(present);
  c.rows.assign(order.begin(), order.end());
  c.rows.push_back("overall");
  for (const auto& row : c.rows) {
    std::vector<double> line;
    for (const auto& r : reports) {
      if (row == "overall") {
        line.push_back(r.micro_f1());
      } else {
        auto it = r.classes.find(row);
        line.push_back(it == r.classes.end() ? std::nan("") : it->second.f1());
      }
    }
    c.f1.push_back(std::move(line));
  }
  return c;
}

std::string comparison_to_json(const Comparison& c) {
  json rows = json::array();
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    json cells = json::object();
    for (std::size_t j = 0; j < c.columns.size(); ++j) {
      const double v = c.f1[i][j];
      cells[c.columns[j]] = std::isnan(v) ? json(nullptr) : json(v);
    }
    rows.push_back({{"row", c.rows[i]}, {"f1", cells}});
  }
  return json{{"columns", c.columns}, {"rows", rows}}.dump(2) + "\n";
}

std::string comparison_to_text(const Comparison& c) {
  std::size_t first = std::string("overall").size();
  for (const auto& r : c.rows) first = std::max(first, r.size());
  std::vector<std::size_t> widths;
  for (const auto& col : c.columns) widths.push_back(std::max<std::size_t>(col.size(), 6));
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(first)) << "label";
  for (std::size_t j = 0; j < c.columns.size(); ++j) os << "  " << std::right << std::setw(static_cast<int>(widths[j])) << c.columns[j];
  os << "\n";
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    os << std::left << std::setw(static_cast<int>(first)) << c.rows[i];
    for (std::size_t j = 0; j < c.columns.size(); ++j) {
      std::ostringstream cell;
      if (std::isnan(c.f1[i][j])) {
        cell << "-";
      } else {
        cell << std::fixed << std::setprecision(4) << c.f1[i][j];
      }
      os << "  " << std::right << std::setw(static_cast<int>(widths[j])) << cell.str();
    }
    os << "\n";
  }
  return os.str();
}

std::string comparison_to_csv(const Comparison& c) {
  std::ostringstream os;
  os << "row,column,f1\n";
  for (std::size_t i = 0; i < c.rows.size(); ++i)
    for (std::size_t j = 0; j < c.columns.size(); ++j) {
      if (std::isnan(c.f1[i][j])) continue;
      os << c.rows[i] << "," << c.columns[j] << "," << c.f1[i][j] << "\n";
    }
  return os.str();
}

}  // namespace acklab
