#pragma once

// Review state shared by the HTTP service: per-document version counters and
// an append-only newline-delimited JSON decision log.

#include "acklab/annotate.hpp"

#include <cstdio>
#include <mutex>
#include <optional>

namespace acklab {

struct SubmitResult {
  int status = 200;  // 200 ok, 400 invalid decision, 404 unknown document, 409 version conflict
  int version = 0;   // current version after the call
  std::string error;
};

class ReviewSession {
 public:
  // Replays `log_path` when it exists, then appends new decisions to it.
  explicit ReviewSession(DraftCorpus drafts, std::optional<std::string> log_path = std::nullopt);
  ~ReviewSession();
  ReviewSession(const ReviewSession&) = delete;
  ReviewSession& operator=(const ReviewSession&) = delete;

  std::string documents_json() const;
  // Review document plus "version"; nullopt for unknown ids.
  std::optional<std::string> document_json(const std::string& doc_id) const;
  int version(const std::string& doc_id) const;

  // The decision is applied only when expected_version equals the current
  // version; the log line is flushed to disk before returning success.
  SubmitResult submit(const std::string& doc_id, const ReviewDecision& decision, int expected_version);

  std::string export_conll() const;
  DraftCorpus snapshot() const;

 private:
  void append_log(const ReviewDecision& decision, int version);

  mutable std::mutex mutex_;
  DraftCorpus drafts_;
  std::map<std::string, int> versions_;
  std::FILE* log_ = nullptr;
};

// Rebuilds the exported CoNLL from the initial drafts and a decision log.
std::string replay_decision_log(const DraftCorpus& initial, const std::string& log_text);

struct ServiceHandle;

// Serves GET /health, GET /documents, GET /documents/{id},
// POST /documents/{id}/decisions, GET /export.conll. Blocks until stop().
class ReviewService {
 public:
  explicit ReviewService(ReviewSession& session);
  ~ReviewService();

  // Binds and returns the bound port (0 picks a free port).
  int bind(const std::string& host, int port);
  void listen();  // blocking
  void stop();

 private:
  std::unique_ptr<ServiceHandle> impl_;
};

}  // namespace acklab
