#include "acklab/annotate.hpp"

#include "acklab/tokenize.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>

namespace acklab {

using json = nlohmann::ordered_json;

const char* source_name(DraftSource s) {
  switch (s) {
    case DraftSource::PretrainedPer: return "pretrained-per";
    case DraftSource::GrantIndex: return "wos-grant-index";
    case DraftSource::OrgIndex: return "wos-org-index";
    case DraftSource::Rule: return "rule";
    case DraftSource::Manual: return "manual";
  }
  return "?";
}

DraftSource parse_source(const std::string& s) {
  for (auto v : {DraftSource::PretrainedPer, DraftSource::GrantIndex, DraftSource::OrgIndex, DraftSource::Rule,
                 DraftSource::Manual})
    if (s == source_name(v)) return v;
  throw DataError("unknown draft source: " + s);
}

const char* status_name(DraftStatus s) {
  switch (s) {
    case DraftStatus::Proposed: return "proposed";
    case DraftStatus::Accepted: return "accepted";
    case DraftStatus::Rejected: return "rejected";
    case DraftStatus::Relabeled: return "relabeled";
  }
  return "?";
}

DraftStatus parse_status(const std::string& s) {
  for (auto v : {DraftStatus::Proposed, DraftStatus::Accepted, DraftStatus::Rejected, DraftStatus::Relabeled})
    if (s == status_name(v)) return v;
  throw DataError("unknown draft status: " + s);
}

const char* action_name(ReviewAction a) {
  switch (a) {
    case ReviewAction::Accept: return "accept";
    case ReviewAction::Reject: return "reject";
    case ReviewAction::Relabel: return "relabel";
    case ReviewAction::Add: return "add";
  }
  return "?";
}

ReviewAction parse_action(const std::string& s) {
  for (auto v : {ReviewAction::Accept, ReviewAction::Reject, ReviewAction::Relabel, ReviewAction::Add})
    if (s == action_name(v)) return v;
  throw DataError("unknown review action: " + s);
}

DraftDocument& DraftCorpus::find(const std::string& doc_id) {
  for (auto& d : documents)
    if (d.doc_id == doc_id) return d;
  throw DataError("unknown document id " + doc_id);
}

const DraftDocument& DraftCorpus::find(const std::string& doc_id) const {
  for (const auto& d : documents)
    if (d.doc_id == doc_id) return d;
  throw DataError("unknown document id " + doc_id);
}

// ---------------------------------------------------------------------------

namespace {

int target_rank(const Label& target) {
  if (target == labels::kUni) return 0;
  if (target == labels::kCor) return 1;
  if (target == labels::kFund) return 2;
  throw DataError("organisation rule target must be UNI, COR or FUND, got " + target);
}

}  // namespace

RuleTable::RuleTable(std::vector<OrgRule> rules, Label default_target)
    : rules_(std::move(rules)), default_(std::move(default_target)) {
  if (rules_.empty()) throw DataError("rule table is empty");
  target_rank(default_);
  std::stable_sort(rules_.begin(), rules_.end(),
                   [](const OrgRule& a, const OrgRule& b) { return target_rank(a.target) < target_rank(b.target); });
}

RuleTable RuleTable::parse(const std::string& text) {
  std::vector<OrgRule> rules;
  Label fallback = labels::kFund;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() == 2 && fields[0] == "default") {
      fallback = fields[1];
      continue;
    }
    if (fields.size() != 3) throw DataError("rules line " + std::to_string(lineno) + ": expected TARGET, FLAGS, PATTERN");
    OrgRule r;
    r.target = fields[0];
    target_rank(r.target);
    r.icase = fields[1] == "i";
    r.pattern = fields[2];
    try {
      auto flags = std::regex::ECMAScript;
      if (r.icase) flags |= std::regex::icase;
      r.regex = std::regex(r.pattern, flags);
    } catch (const std::regex_error& e) {
      throw DataError("rules line " + std::to_string(lineno) + ": bad pattern: " + e.what());
    }
    rules.push_back(std::move(r));
  }
  return RuleTable(std::move(rules), fallback);
}

RuleTable RuleTable::load(const std::string& path) { return parse(read_file(path)); }

RuleTable RuleTable::builtin() {
  return parse(
      "UNI\ti\tUniversit|College|Polytechnic|Institute of Technology\n"
      "COR\t-\t\\b(Inc|Ltd|LLC|GmbH|Corp(oration)?|Company|Co\\.)\\b\n"
      "FUND\ti\tFoundation|Fund|Council|Ministry|Agency|National Science\n"
      "default\tFUND\n");
}

Label RuleTable::classify(const std::string& name) const {
  for (const auto& r : rules_)
    if (std::regex_search(name, r.regex)) return r.target;
  return default_;
}

Label classify_org(const std::string& name, const RuleTable& rules) { return rules.classify(name); }

// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  Span span;
  DraftSource source;
  int priority;  // 0 GRNB, 1 IND, 2 organisation
};

std::vector<std::pair<int, int>> find_token_sequence(const Sentence& s, const std::vector<std::string>& needle) {
  std::vector<std::pair<int, int>> hits;
  if (needle.empty() || needle.size() > s.tokens.size()) return hits;
  for (std::size_t i = 0; i + needle.size() <= s.tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k) ok = s.tokens[i + k].text == needle[k];
    if (ok) hits.emplace_back(static_cast<int>(i), static_cast<int>(i + needle.size()));
  }
  return hits;
}

std::vector<std::string> token_strings(const std::string& entry) {
  std::vector<std::string> out;
  for (auto& t : tokenize(entry)) out.push_back(std::move(t.text));
  return out;
}

}  // namespace

DraftCorpus seed_annotations(std::span<const Sentence> upstream, std::span<const std::string> grant_index,
                             std::span<const std::string> org_index, const RuleTable& rules) {
  std::vector<std::vector<std::string>> grants, orgs;
  for (const auto& g : grant_index) grants.push_back(token_strings(g));
  for (const auto& o : org_index) orgs.push_back(token_strings(o));

  DraftCorpus out;
  for (const Sentence& s : upstream) {
    const int n = static_cast<int>(s.tokens.size());
    for (const Span& sp : s.spans)
      if (sp.start < 0 || sp.start >= sp.end || sp.end > n)
        throw DataError("upstream sentence " + s.id + ": span " + to_string(sp) + " out of bounds for " +
                        std::to_string(n) + " tokens");

    std::vector<Candidate> cands;
    for (const auto& g : grants)
      for (auto [b, e] : find_token_sequence(s, g)) cands.push_back({Span{b, e, labels::kGrnb}, DraftSource::GrantIndex, 0});
    for (const Span& sp : s.spans) {
      if (sp.label == "PER") {
        cands.push_back({Span{sp.start, sp.end, labels::kInd}, DraftSource::PretrainedPer, 1});
      } else if (sp.label == "ORG" || sp.label == "MISC") {
        cands.push_back({Span{sp.start, sp.end, rules.classify(s.span_text(sp))}, DraftSource::Rule, 2});
      }
    }
    for (const auto& o : orgs)
      for (auto [b, e] : find_token_sequence(s, o)) {
        Span sp{b, e, {}};
        sp.label = rules.classify(s.span_text(sp));
        cands.push_back({sp, DraftSource::OrgIndex, 2});
      }

    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.priority != b.priority) return a.priority < b.priority;
      if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
      return a.span.start < b.span.start;
    });

    std::vector<Candidate> kept;
    for (const Candidate& c : cands) {
      auto clash = std::find_if(kept.begin(), kept.end(), [&](const Candidate& k) { return k.span.overlaps(c.span); });
      if (clash == kept.end()) {
        kept.push_back(c);
        continue;
      }
      if (clash->span == c.span) continue;  // same proposal from a second source
      out.conflicts.push_back("sentence " + s.id + ": dropped " + to_string(c.span) + " [" + source_name(c.source) +
                              "] overlapping " + to_string(clash->span) + " [" + source_name(clash->source) + "]");
    }
    std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) { return a.span < b.span; });

    DraftDocument doc;
    doc.doc_id = s.id;
    doc.sentence = s;
    doc.sentence.spans.clear();
    for (std::size_t i = 0; i < kept.size(); ++i)
      doc.drafts.push_back(DraftSpan{s.id + ":d" + std::to_string(i), kept[i].span, kept[i].source, DraftStatus::Proposed, {}});
    out.documents.push_back(std::move(doc));
  }
  return out;
}

std::vector<std::string> load_index(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream is(read_file(path));
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json decision_json(const ReviewDecision& d) {
  json j = {{"doc_id", d.doc_id}, {"draft_id", d.draft_id}, {"action", action_name(d.action)}};
  if (!d.new_label.empty()) j["new_label"] = d.new_label;
  if (d.action == ReviewAction::Add) {
    j["start"] = d.start;
    j["end"] = d.end;
  }
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

ReviewDecision decision_from(const json& j) {
  ReviewDecision d;
  d.doc_id = j.value("doc_id", "");
  d.draft_id = j.value("draft_id", "");
  d.action = parse_action(j.at("action").get<std::string>());
  d.new_label = j.value("new_label", "");
  d.start = j.value("start", -1);
  d.end = j.value("end", -1);
  d.note = j.value("note", "");
  return d;
}

}  // namespace

std::string emit_review(const DraftCorpus& drafts) {
  json docs = json::array();
  for (const auto& d : drafts.documents) {
    json tokens = json::array();
    for (const auto& t : d.sentence.tokens) tokens.push_back(t.text);
    json items = json::array();
    for (const auto& ds : d.drafts) {
      json item = {{"id", ds.id},
                   {"start", ds.span.start},
                   {"end", ds.span.end},
                   {"label", ds.span.label},
                   {"source", source_name(ds.source)},
                   {"status", status_name(ds.status)}};
      if (!ds.note.empty()) item["note"] = ds.note;
      items.push_back(item);
    }
    json decisions = json::array();
    for (const auto& dec : d.decisions) decisions.push_back(decision_json(dec));
    json meta = json::object();
    for (const auto& [k, v] : d.sentence.meta) meta[k] = v;
    docs.push_back({{"doc_id", d.doc_id}, {"tokens", tokens}, {"drafts", items}, {"decisions", decisions}, {"meta", meta}});
  }
  return docs.dump(2) + "\n";
}

DraftCorpus load_review(const std::string& json_text) {
  DraftCorpus out;
  try {
    const json docs = json::parse(json_text);
    if (!docs.is_array()) throw DataError("review JSON: expected an array of documents");
    for (const auto& j : docs) {
      DraftDocument d;
      d.doc_id = j.at("doc_id").get<std::string>();
      d.sentence = make_sentence(d.doc_id, j.at("tokens").get<std::vector<std::string>>());
      if (j.contains("meta"))
        for (const auto& [k, v] : j.at("meta").items()) d.sentence.meta.emplace_back(k, v.get<std::string>());
      for (const auto& item : j.at("drafts")) {
        DraftSpan ds;
        ds.id = item.at("id").get<std::string>();
        ds.span = Span{item.at("start").get<int>(), item.at("end").get<int>(), item.at("label").get<std::string>()};
        ds.source = parse_source(item.at("source").get<std::string>());
        ds.status = parse_status(item.value("status", "proposed"));
        ds.note = item.value("note", "");
        const int n = static_cast<int>(d.sentence.size());
        if (ds.span.start < 0 || ds.span.start >= ds.span.end || ds.span.end > n)
          throw DataError("review document " + d.doc_id + ": draft " + ds.id + " out of bounds");
        d.drafts.push_back(std::move(ds));
      }
      if (j.contains("decisions"))
        for (const auto& dec : j.at("decisions")) d.decisions.push_back(decision_from(dec));
      out.documents.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("review JSON: ") + e.what());
  }
  return out;
}

std::string decision_to_json(const ReviewDecision& d) { return decision_json(d).dump(); }

ReviewDecision decision_from_json(const std::string& json_text) {
  try {
    return decision_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw DataError(std::string("decision JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_no_gold_overlap(const DraftDocument& doc, const Span& span, const std::string& except_id) {
  for (const auto& other : doc.drafts) {
    if (other.id == except_id || !other.is_gold()) continue;
    if (other.span.overlaps(span))
      throw DataError("document " + doc.doc_id + ": span " + to_string(span) + " overlaps accepted span " +
                      to_string(other.span) + " (" + other.id + ")");
  }
}

}  // namespace

void apply_decision(DraftDocument& doc, const ReviewDecision& decision) {
  if (decision.action == ReviewAction::Add) {
    const int n = static_cast<int>(doc.sentence.size());
    if (decision.new_label.empty()) throw DataError("document " + doc.doc_id + ": added span needs a label");
    Span span{decision.start, decision.end, decision.new_label};
    if (span.start < 0 || span.start >= span.end || span.end > n)
      throw DataError("document " + doc.doc_id + ": added span " + to_string(span) + " out of bounds for " +
                      std::to_string(n) + " tokens");
    check_no_gold_overlap(doc, span, "");
    std::size_t manual = 0;
    for (const auto& d : doc.drafts)
      if (d.source == DraftSource::Manual) ++manual;
    doc.drafts.push_back(DraftSpan{doc.doc_id + ":m" + std::to_string(manual), span, DraftSource::Manual,
                                   DraftStatus::Accepted, decision.note});
    doc.decisions.push_back(decision);
    return;
  }

  auto it = std::find_if(doc.drafts.begin(), doc.drafts.end(),
                         [&](const DraftSpan& d) { return d.id == decision.draft_id; });
  if (it == doc.drafts.end())
    throw DataError("document " + doc.doc_id + ": unknown draft id " + decision.draft_id);
  if (it->status != DraftStatus::Proposed)
    throw DataError("document " + doc.doc_id + ": draft " + it->id + " already " + status_name(it->status));
  switch (decision.action) {
    case ReviewAction::Accept:
      check_no_gold_overlap(doc, it->span, it->id);
      it->status = DraftStatus::Accepted;
      break;
    case ReviewAction::Reject:
      it->status = DraftStatus::Rejected;
      break;
    case ReviewAction::Relabel:
      if (decision.new_label.empty()) throw DataError("document " + doc.doc_id + ": relabel needs new_label");
      check_no_gold_overlap(doc, it->span, it->id);
      it->span.label = decision.new_label;
      it->status = DraftStatus::Relabeled;
      break;
    case ReviewAction::Add:
      break;
  }
  if (!decision.note.empty()) it->note = decision.note;
  doc.decisions.push_back(decision);
}

std::vector<Sentence> gold_sentences(const DraftCorpus& drafts) {
  std::vector<Sentence> out;
  for (const auto& d : drafts.documents) {
    Sentence s = d.sentence;
    s.id = d.doc_id;
    s.spans.clear();
    for (const auto& ds : d.drafts)
      if (ds.is_gold()) s.spans.push_back(ds.span);
    normalize_spans(s);
    out.push_back(std::move(s));
  }
  return out;
}

Corpus apply_review(const DraftCorpus& drafts, std::span<const ReviewDecision> decisions) {
  DraftCorpus copy = drafts;
  for (const auto& dec : decisions) apply_decision(copy.find(dec.doc_id), dec);
  Corpus c;
  c.train = gold_sentences(copy);
  c.recompute_labels();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Sentence> merge_split(const std::vector<Sentence>& split, const std::map<Label, Label>& mapping,
                                  const std::set<Label>& drop) {
  std::vector<Sentence> out = split;
  for (auto& s : out) {
    std::vector<Span> kept;
    for (Span sp : s.spans) {
      auto it = mapping.find(sp.label);
      if (it != mapping.end()) sp.label = it->second;
      if (drop.count(sp.label)) continue;
      kept.push_back(sp);
    }
    s.spans = std::move(kept);
  }
  return out;
}

}  // namespace

Corpus merge_categories(const Corpus& corpus, const std::map<Label, Label>& mapping, const std::set<Label>& drop) {
  Corpus out;
  out.scheme = corpus.scheme;
  out.train = merge_split(corpus.train, mapping, drop);
  out.dev = merge_split(corpus.dev, mapping, drop);
  out.test = merge_split(corpus.test, mapping, drop);
  out.recompute_labels();
  return out;
}

std::map<Label, Label> org_merge_mapping() {
  return {{labels::kFund, labels::kOrg}, {labels::kCor, labels::kOrg}, {labels::kUni, labels::kOrg}};
}

}  // namespace acklab
