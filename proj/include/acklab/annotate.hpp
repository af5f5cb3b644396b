#pragma once

// Semi-automated annotation: entity drafts seeded from an upstream 4-class
// tagger, index files and organisation rules, then corrected by a reviewer.

#include "acklab/corpus.hpp"

#include <regex>
#include <set>

namespace acklab {

enum class DraftSource { PretrainedPer, GrantIndex, OrgIndex, Rule, Manual };
enum class DraftStatus { Proposed, Accepted, Rejected, Relabeled };

const char* source_name(DraftSource s);
DraftSource parse_source(const std::string& s);
const char* status_name(DraftStatus s);
DraftStatus parse_status(const std::string& s);

struct DraftSpan {
  std::string id;
  Span span;
  DraftSource source = DraftSource::Manual;
  DraftStatus status = DraftStatus::Proposed;
  std::string note;

  // Accepted, relabeled and manual spans become gold.
  bool is_gold() const { return status == DraftStatus::Accepted || status == DraftStatus::Relabeled; }
};

enum class ReviewAction { Accept, Reject, Relabel, Add };

const char* action_name(ReviewAction a);
ReviewAction parse_action(const std::string& s);

struct ReviewDecision {
  std::string doc_id;
  std::string draft_id;  // empty for Add
  ReviewAction action = ReviewAction::Accept;
  Label new_label;       // Relabel and Add
  int start = -1;        // Add only
  int end = -1;
  std::string note;
};

struct DraftDocument {
  std::string doc_id;
  Sentence sentence;  // tokens and metadata; spans unused
  std::vector<DraftSpan> drafts;
  std::vector<ReviewDecision> decisions;  // applied decisions, in order
};

struct DraftCorpus {
  std::vector<DraftDocument> documents;
  std::vector<std::string> conflicts;  // priority-resolution log from seeding

  DraftDocument& find(const std::string& doc_id);
  const DraftDocument& find(const std::string& doc_id) const;
};

// --- organisation rules ----------------------------------------------------

struct OrgRule {
  Label target;  // UNI, COR or FUND
  std::string pattern;
  bool icase = false;
  std::regex regex;
};

// Rules are grouped by target class in the order UNI, COR, FUND (file order
// kept within a class); the first match wins, otherwise the default target.
class RuleTable {
 public:
  RuleTable(std::vector<OrgRule> rules, Label default_target);

  // Tab-separated lines: "TARGET<TAB>FLAGS<TAB>PATTERN" where FLAGS is "i"
  // (case-insensitive) or "-"; "default<TAB>TARGET" sets the fallback.
  static RuleTable parse(const std::string& text);
  static RuleTable load(const std::string& path);
  // The shipped table (data/rules/org_rules.tsv content).
  static RuleTable builtin();

  Label classify(const std::string& name) const;
  const std::vector<OrgRule>& rules() const { return rules_; }
  const Label& default_target() const { return default_; }

 private:
  std::vector<OrgRule> rules_;
  Label default_;
};

Label classify_org(const std::string& name, const RuleTable& rules);

// --- seeding -----------------------------------------------------------------

// `upstream` sentences carry PER/LOC/ORG/MISC spans from an upstream tagger.
// PER becomes IND; exact token-sequence matches of grant_index entries become
// GRNB; org_index matches and upstream ORG/MISC mentions are classified by
// the rule table. Overlaps resolve by GRNB > IND > organisation, longer first;
// dropped proposals are logged in DraftCorpus::conflicts. MISC is never
// proposed.
DraftCorpus seed_annotations(std::span<const Sentence> upstream, std::span<const std::string> grant_index,
                             std::span<const std::string> org_index, const RuleTable& rules);

std::vector<std::string> load_index(const std::string& path);

// --- review documents -------------------------------------------------------

// JSON array, one object per document:
// {doc_id, tokens[], drafts[{id,start,end,label,source,status}], decisions[]}
std::string emit_review(const DraftCorpus& drafts);
DraftCorpus load_review(const std::string& json_text);

std::string decision_to_json(const ReviewDecision& d);
ReviewDecision decision_from_json(const std::string& json_text);

// Applies one decision in place. Throws DataError for unknown drafts, drafts
// that are no longer proposed, invalid bounds, or gold overlaps.
void apply_decision(DraftDocument& doc, const ReviewDecision& decision);

// Gold sentences from accepted/relabeled/added spans, in document order.
std::vector<Sentence> gold_sentences(const DraftCorpus& drafts);

// Applies decisions to a copy and returns the gold corpus (all in train).
Corpus apply_review(const DraftCorpus& drafts, std::span<const ReviewDecision> decisions);

// --- category merging -------------------------------------------------------

// Relabels spans through `mapping` (labels absent from the map are kept) and
// removes spans whose label (after mapping) is in `drop`.
Corpus merge_categories(const Corpus& corpus, const std::map<Label, Label>& mapping, const std::set<Label>& drop);

// FUND, COR, UNI -> ORG.
std::map<Label, Label> org_merge_mapping();

}  // namespace acklab
