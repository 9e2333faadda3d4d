#pragma once

#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "roomforge/event_log.hpp"
#include "roomforge/gsb.hpp"

namespace httplib {
class Server;
}

namespace roomforge::evalproto {

/// Event-sourced set of GSB sessions. Every mutation is appended to the log
/// before it is applied, so replaying the log rebuilds the same state.
///
/// Event kinds:
///   session_created  payload = GsbSession::to_json()
///   judgment         payload = {"session_id", "judgment": Judgment::to_json()}
///   session_closed   payload = {"session_id"}
class GsbStore {
 public:
  /// Replays whatever the log already holds. An empty path keeps events in
  /// memory only.
  explicit GsbStore(std::string log_path = {});

  /// Rebuilds a store from events without writing anywhere.
  static std::unique_ptr<GsbStore> replay(const std::vector<Event>& events);

  /// Assigns "s<N>" when the session has no id. Throws GsbError(conflict) on
  /// a repeated id.
  std::string create_session(GsbSession session);
  Judgment submit(const std::string& session_id, const std::string& evaluator, const std::string& item_id,
                  const std::string& dimension, RawChoice raw, std::int64_t timestamp_ms);
  void close(const std::string& session_id);

  /// {"done": bool, "completed", "total", "dimension", and, while not done,
  /// "item_id", "prompt", "left_image_url", "right_image_url"}. Never says
  /// which side is system A.
  Json queue(const std::string& session_id, const std::string& evaluator, const std::string& dimension,
             const std::string& image_prefix = "/images/") const;
  GsbSummary summary(const std::string& session_id, bool allow_partial) const;
  Json session_info(const std::string& session_id) const;

  /// Deterministic dump of every session's judgments and state, for replay
  /// comparisons.
  Json snapshot() const;
  std::vector<Event> events() const { return log_.events(); }
  bool recovered_torn_tail() const { return log_.recovered_torn_tail(); }

 private:
  struct Entry {
    explicit Entry(GsbSession s) : state(std::move(s)) {}
    mutable std::shared_mutex mutex;
    SessionState state;
  };

  void apply(const Event& event);
  std::shared_ptr<Entry> find(const std::string& session_id) const;

  EventLog log_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

struct ServiceOptions {
  std::string images_dir;  // served under /images/ when non-empty
  std::function<std::int64_t()> clock;  // ms since epoch; system clock by default
};

/// HTTP front end:
///   POST /v1/sessions                      -> 201 {"session_id"}
///   GET  /v1/sessions/{id}                 -> session info
///   GET  /v1/sessions/{id}/queue?evaluator=E&dimension=D
///   POST /v1/sessions/{id}/judgments       {evaluator, item_id, dimension, choice: left|right|same}
///   GET  /v1/sessions/{id}/summary[?allow_partial=true]
///   POST /v1/sessions/{id}/close
///   POST /v1/gate                          {baseline, candidate, directions?, threshold?, inclusive?}
/// Errors come back as {"error": message} with 400 (bad request), 403 (not
/// assigned), 404 (unknown session or evaluator) or 409 (duplicate, closed,
/// incomplete).
class GsbService {
 public:
  GsbService(GsbStore& store, ServiceOptions options = {});
  ~GsbService();

  httplib::Server& server() { return *server_; }
  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen_after_bind();
  void stop();

 private:
  void install_routes();

  GsbStore& store_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace roomforge::evalproto
