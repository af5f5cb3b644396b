#include "acklab/review.hpp"

#include <httplib.h>
#include <json.hpp>

namespace acklab {

using json = nlohmann::json;

struct ServiceHandle {
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, int version = -1) {
  json j = {{"error", message}};
  if (version >= 0) j["version"] = version;
  send_json(res, status, j.dump() + "\n");
}

}  // namespace

ReviewService::ReviewService(ReviewSession& session) : impl_(std::make_unique<ServiceHandle>()) {
  auto& srv = impl_->server;
  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, "{\"status\":\"ok\"}\n"); });
  srv.Get("/documents", [&session](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, session.documents_json());
  });
  srv.Get(R"(/documents/([^/]+))", [&session](const httplib::Request& req, httplib::Response& res) {
    auto doc = session.document_json(req.matches[1]);
    if (!doc) return send_error(res, 404, "unknown document id " + std::string(req.matches[1]));
    send_json(res, 200, *doc);
  });
  srv.Post(R"(/documents/([^/]+)/decisions)", [&session](const httplib::Request& req, httplib::Response& res) {
    const std::string doc_id = req.matches[1];
    ReviewDecision decision;
    int version = 0;
    try {
      const json body = json::parse(req.body);
      if (!body.contains("version")) return send_error(res, 400, "missing version");
      version = body.at("version").get<int>();
      decision = decision_from_json(req.body);
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what());
    }
    const SubmitResult r = session.submit(doc_id, decision, version);
    if (r.status != 200) return send_error(res, r.status, r.error, r.version);
    send_json(res, 200, json{{"version", r.version}}.dump() + "\n");
  });
  srv.Get("/export.conll", [&session](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(session.export_conll(), "text/plain; charset=utf-8");
  });
}

ReviewService::~ReviewService() = default;

int ReviewService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ReviewService::listen() { impl_->server.listen_after_bind(); }

void ReviewService::stop() { impl_->server.stop(); }

}  // namespace acklab
