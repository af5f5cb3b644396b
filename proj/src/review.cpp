#include "acklab/review.hpp"

#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <unistd.h>

namespace acklab {

using json = nlohmann::ordered_json;

namespace {

json decision_log_line(const ReviewDecision& d, int version) {
  json j = json::parse(decision_to_json(d));
  j["version"] = version;
  return j;
}

}  // namespace

ReviewSession::ReviewSession(DraftCorpus drafts, std::optional<std::string> log_path) : drafts_(std::move(drafts)) {
  for (const auto& d : drafts_.documents) versions_[d.doc_id] = 0;
  if (!log_path) return;
  if (std::filesystem::exists(*log_path)) {
    std::istringstream is(read_file(*log_path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      ReviewDecision d = decision_from_json(line);
      try {
        apply_decision(drafts_.find(d.doc_id), d);
      } catch (const DataError& e) {
        throw DataError("decision log line " + std::to_string(lineno) + ": " + e.what());
      }
      ++versions_[d.doc_id];
    }
  }
  log_ = std::fopen(log_path->c_str(), "a");
  if (!log_) throw DataError("cannot open decision log " + *log_path);
}

ReviewSession::~ReviewSession() {
  if (log_) std::fclose(log_);
}

std::string ReviewSession::documents_json() const {
  std::lock_guard lock(mutex_);
  json docs = json::array();
  for (const auto& d : drafts_.documents) {
    std::size_t proposed = 0;
    for (const auto& ds : d.drafts)
      if (ds.status == DraftStatus::Proposed) ++proposed;
    docs.push_back({{"doc_id", d.doc_id},
                    {"version", versions_.at(d.doc_id)},
                    {"drafts", d.drafts.size()},
                    {"proposed", proposed},
                    {"text", d.sentence.text()}});
  }
  return json{{"documents", docs}}.dump() + "\n";
}

std::optional<std::string> ReviewSession::document_json(const std::string& doc_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& d : drafts_.documents) {
    if (d.doc_id != doc_id) continue;
    DraftCorpus one;
    one.documents.push_back(d);
    json j = json::parse(emit_review(one)).at(0);
    j["version"] = versions_.at(doc_id);
    return j.dump() + "\n";
  }
  return std::nullopt;
}

int ReviewSession::version(const std::string& doc_id) const {
  std::lock_guard lock(mutex_);
  auto it = versions_.find(doc_id);
  if (it == versions_.end()) throw DataError("unknown document id " + doc_id);
  return it->second;
}

SubmitResult ReviewSession::submit(const std::string& doc_id, const ReviewDecision& decision, int expected_version) {
  std::lock_guard lock(mutex_);
  auto vit = versions_.find(doc_id);
  if (vit == versions_.end()) return {404, 0, "unknown document id " + doc_id};
  if (expected_version != vit->second)
    return {409, vit->second,
            "version conflict: expected " + std::to_string(expected_version) + ", current " + std::to_string(vit->second)};
  ReviewDecision d = decision;
  d.doc_id = doc_id;
  DraftDocument& doc = drafts_.find(doc_id);
  DraftDocument before = doc;
  try {
    apply_decision(doc, d);
  } catch (const DataError& e) {
    doc = std::move(before);
    return {400, vit->second, e.what()};
  }
  try {
    append_log(d, vit->second + 1);
  } catch (const Error& e) {
    doc = std::move(before);
    return {500, vit->second, e.what()};
  }
  ++vit->second;
  return {200, vit->second, ""};
}

void ReviewSession::append_log(const ReviewDecision& decision, int version) {
  if (!log_) return;
  const std::string line = decision_log_line(decision, version).dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0)
    throw Error("failed writing decision log");
  ::fsync(::fileno(log_));
}

std::string ReviewSession::export_conll() const {
  std::lock_guard lock(mutex_);
  return write_conll(gold_sentences(drafts_), Scheme::Bioes);
}

DraftCorpus ReviewSession::snapshot() const {
  std::lock_guard lock(mutex_);
  return drafts_;
}

std::string replay_decision_log(const DraftCorpus& initial, const std::string& log_text) {
  DraftCorpus state = initial;
  std::istringstream is(log_text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ReviewDecision d = decision_from_json(line);
    apply_decision(state.find(d.doc_id), d);
  }
  return write_conll(gold_sentences(state), Scheme::Bioes);
}

}  // namespace acklab
