#include "roomforge/gsb_service.hpp"

#include <chrono>
#include <mutex>

#include <httplib.h>

#include "roomforge/gate.hpp"

namespace roomforge::evalproto {

namespace {

GsbError not_found(const std::string& session_id) {
  return GsbError(GsbError::Kind::not_found, "no session \"" + session_id + "\"");
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

GsbStore::GsbStore(std::string log_path) : log_(std::move(log_path)) {
  for (const Event& e : log_.recovered()) apply(e);
}

std::unique_ptr<GsbStore> GsbStore::replay(const std::vector<Event>& events) {
  auto store = std::make_unique<GsbStore>();
  for (const Event& e : events) store->apply(e);
  return store;
}

void GsbStore::apply(const Event& event) {
  try {
    if (event.kind == "session_created") {
      GsbSession session = GsbSession::from_json(event.payload);
      const std::string id = session.id;
      std::unique_lock lock(sessions_mutex_);
      sessions_[id] = std::make_shared<Entry>(std::move(session));
    } else if (event.kind == "judgment") {
      auto entry = find(event.payload.at("session_id").get<std::string>());
      std::unique_lock lock(entry->mutex);
      entry->state.apply(Judgment::from_json(event.payload.at("judgment")));
    } else if (event.kind == "session_closed") {
      auto entry = find(event.payload.at("session_id").get<std::string>());
      std::unique_lock lock(entry->mutex);
      entry->state.close();
    } else {
      throw InputError("unknown event kind \"" + event.kind + "\"");
    }
  } catch (const Json::exception& e) {
    throw InputError("event " + std::to_string(event.seq) + ": " + e.what());
  } catch (const GsbError& e) {
    throw InputError("event " + std::to_string(event.seq) + " does not replay: " + e.what());
  }
}

std::shared_ptr<GsbStore::Entry> GsbStore::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw not_found(session_id);
  return it->second;
}

std::string GsbStore::create_session(GsbSession session) {
  std::unique_lock lock(sessions_mutex_);
  if (session.id.empty()) session.id = "s" + std::to_string(sessions_.size() + 1);
  if (sessions_.contains(session.id)) {
    throw GsbError(GsbError::Kind::conflict, "session \"" + session.id + "\" already exists");
  }
  log_.append("session_created", session.to_json());
  const std::string id = session.id;
  sessions_[id] = std::make_shared<Entry>(std::move(session));
  return id;
}

Judgment GsbStore::submit(const std::string& session_id, const std::string& evaluator, const std::string& item_id,
                          const std::string& dimension, RawChoice raw, std::int64_t timestamp_ms) {
  auto entry = find(session_id);
  std::unique_lock lock(entry->mutex);
  Judgment j = entry->state.prepare_judgment(evaluator, item_id, dimension, raw, timestamp_ms);
  log_.append("judgment", {{"session_id", session_id}, {"judgment", j.to_json()}});
  entry->state.apply(j);
  return j;
}

void GsbStore::close(const std::string& session_id) {
  auto entry = find(session_id);
  std::unique_lock lock(entry->mutex);
  if (entry->state.closed()) throw GsbError(GsbError::Kind::conflict, "session \"" + session_id + "\" is already closed");
  log_.append("session_closed", {{"session_id", session_id}});
  entry->state.close();
}

Json GsbStore::queue(const std::string& session_id, const std::string& evaluator, const std::string& dimension,
                     const std::string& image_prefix) const {
  auto entry = find(session_id);
  std::shared_lock lock(entry->mutex);
  const SessionState::QueueEntry q = entry->state.next_for(evaluator, dimension);
  Json out = {{"done", q.assignment == nullptr}, {"completed", q.completed}, {"total", q.total}, {"dimension", dimension}};
  if (q.assignment != nullptr) {
    const PromptPair& item = entry->state.session().items[q.assignment->item_index];
    const bool a_left = q.assignment->side == Side::a_left;
    out["item_id"] = item.prompt_id;
    out["prompt"] = item.prompt;
    out["position"] = q.completed + 1;
    out["left_image_url"] = image_prefix + (a_left ? item.image_a : item.image_b);
    out["right_image_url"] = image_prefix + (a_left ? item.image_b : item.image_a);
  }
  return out;
}

GsbSummary GsbStore::summary(const std::string& session_id, bool allow_partial) const {
  auto entry = find(session_id);
  std::shared_lock lock(entry->mutex);
  return entry->state.summarize(allow_partial);
}

Json GsbStore::session_info(const std::string& session_id) const {
  auto entry = find(session_id);
  std::shared_lock lock(entry->mutex);
  const GsbSession& s = entry->state.session();
  return {{"session_id", s.id},
          {"state", entry->state.closed() ? "closed" : "open"},
          {"items", s.items.size()},
          {"dimensions", s.config.dimensions},
          {"roster", s.config.roster},
          {"seed", s.config.seed},
          {"min_per_item", s.config.min_per_item},
          {"judgments", entry->state.judgments().size()},
          {"assignments", entry->state.assignments().size()}};
}

Json GsbStore::snapshot() const {
  std::shared_lock lock(sessions_mutex_);
  Json out = Json::object();
  for (const auto& [id, entry] : sessions_) {
    std::shared_lock entry_lock(entry->mutex);
    Json judgments = Json::array();
    for (const auto& [key, j] : entry->state.judgments()) judgments.push_back(j.to_json());
    out[id] = {{"session", entry->state.session().to_json()},
               {"closed", entry->state.closed()},
               {"judgments", judgments}};
  }
  return out;
}

GsbService::GsbService(GsbStore& store, ServiceOptions options)
    : store_(store), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (!options_.clock) options_.clock = system_clock_ms;
  install_routes();
}

GsbService::~GsbService() { stop(); }

int GsbService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool GsbService::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool GsbService::listen_after_bind() { return server_->listen_after_bind(); }

void GsbService::stop() {
  if (server_) server_->stop();
}

void GsbService::install_routes() {
  using httplib::Request;
  using httplib::Response;

  auto reply = [](Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  // Runs a handler and maps library errors onto status codes.
  auto guarded = [reply](auto handler) {
    return [handler, reply](const Request& req, Response& res) {
      try {
        handler(req, res);
      } catch (const GsbError& e) {
        int status = 400;
        switch (e.kind()) {
          case GsbError::Kind::invalid: status = 400; break;
          case GsbError::Kind::forbidden: status = 403; break;
          case GsbError::Kind::not_found: status = 404; break;
          case GsbError::Kind::conflict: status = 409; break;
        }
        reply(res, status, {{"error", e.what()}});
      } catch (const Json::exception& e) {
        reply(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
      } catch (const ValidationError& e) {
        reply(res, 400, {{"error", e.what()}});
      } catch (const InputError& e) {
        reply(res, 400, {{"error", e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
    };
  };

  auto body_json = [](const Request& req) {
    if (req.body.empty()) throw GsbError(GsbError::Kind::invalid, "request body is empty");
    try {
      return parse_json_strict(req.body, "request body");
    } catch (const InputError& e) {
      throw GsbError(GsbError::Kind::invalid, e.what());
    }
  };

  server_->Post("/v1/sessions", guarded([this, reply, body_json](const Request& req, Response& res) {
    Json doc = body_json(req);
    if (doc.contains("prompts") && !doc.contains("items")) doc["items"] = doc["prompts"];
    const std::string id = store_.create_session(GsbSession::from_json(doc));
    reply(res, 201, {{"session_id", id}});
  }));

  server_->Get(R"(/v1/sessions/([^/]+))", guarded([this, reply](const Request& req, Response& res) {
    reply(res, 200, store_.session_info(req.matches[1]));
  }));

  server_->Get(R"(/v1/sessions/([^/]+)/queue)", guarded([this, reply](const Request& req, Response& res) {
    if (!req.has_param("evaluator") || !req.has_param("dimension")) {
      throw GsbError(GsbError::Kind::invalid, "queue needs evaluator and dimension parameters");
    }
    reply(res, 200, store_.queue(req.matches[1], req.get_param_value("evaluator"), req.get_param_value("dimension")));
  }));

  server_->Post(R"(/v1/sessions/([^/]+)/judgments)", guarded([this, reply, body_json](const Request& req, Response& res) {
    const Json doc = body_json(req);
    const Judgment j = store_.submit(req.matches[1], doc.at("evaluator").get<std::string>(),
                                     doc.at("item_id").get<std::string>(), doc.at("dimension").get<std::string>(),
                                     parse_raw_choice(doc.at("choice").get<std::string>()), options_.clock());
    // The acknowledgment echoes the raw side only; the A-relative choice stays server-side.
    reply(res, 201, {{"status", "recorded"}, {"item_id", j.item_id}, {"dimension", j.dimension}, {"choice", to_string(j.raw)}});
  }));

  server_->Get(R"(/v1/sessions/([^/]+)/summary)", guarded([this, reply](const Request& req, Response& res) {
    const std::string partial = req.has_param("allow_partial") ? req.get_param_value("allow_partial") : "false";
    reply(res, 200, store_.summary(req.matches[1], partial == "true" || partial == "1").to_json());
  }));

  server_->Post(R"(/v1/sessions/([^/]+)/close)", guarded([this, reply](const Request& req, Response& res) {
    store_.close(req.matches[1]);
    reply(res, 200, {{"session_id", std::string(req.matches[1])}, {"state", "closed"}});
  }));

  server_->Post("/v1/gate", guarded([reply, body_json](const Request& req, Response& res) {
    const Json doc = body_json(req);
    const auto baseline = metrics::MetricReport::from_json(doc.at("baseline"));
    const auto candidate = metrics::MetricReport::from_json(doc.at("candidate"));
    const double threshold = doc.value("threshold", 0.70);
    const bool inclusive = doc.value("inclusive", false);
    GateDecision decision;
    if (doc.contains("directions")) {
      std::map<std::string, metrics::Direction> directions;
      for (const auto& [name, dir] : doc.at("directions").items()) {
        directions[name] = metrics::parse_direction(dir.get<std::string>());
      }
      decision = dual_gate(baseline, candidate, directions, threshold, inclusive);
    } else {
      decision = dual_gate(baseline, candidate, threshold, inclusive);
    }
    reply(res, 200, decision.to_json());
  }));

  if (!options_.images_dir.empty()) server_->set_mount_point("/images", options_.images_dir);
}

}  // namespace roomforge::evalproto
