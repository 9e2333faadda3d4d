#include "roomforge/gsb_service.hpp"

#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "test_support.hpp"

namespace roomforge::evalproto {
namespace {

Json session_body(std::size_t items, std::size_t evaluators, std::vector<std::string> dims, std::uint64_t seed) {
  Json prompts = Json::array();
  for (std::size_t i = 0; i < items; ++i) {
    const std::string id = "p" + std::to_string(100 + i);
    prompts.push_back({{"prompt_id", id}, {"prompt", "room " + id}, {"image_a", id + "_a.png"}, {"image_b", id + "_b.png"}});
  }
  Json roster = Json::array();
  for (std::size_t e = 0; e < evaluators; ++e) roster.push_back("e" + std::to_string(e));
  return {{"prompts", prompts}, {"roster", roster}, {"dimensions", dims}, {"seed", seed}, {"min_per_item", 3}};
}

GsbSession session_from(Json body, std::string id = {}) {
  body["items"] = body["prompts"];
  body["session_id"] = std::move(id);
  return GsbSession::from_json(body);
}

// Drives a store with random traffic until the log holds `target` events.
// Invalid requests are mixed in; they must leave no trace.
void random_traffic(GsbStore& store, std::size_t target, std::uint64_t seed) {
  rftest::Draw d(seed);
  std::vector<std::string> sessions;
  while (store.events().size() < target) {
    const auto roll = d.below(100);
    if (sessions.empty() || roll < 2) {
      sessions.push_back(store.create_session(session_from(
          session_body(d.between(2, 12), d.between(3, 6), {"aesthetic", "layout"}, d.below(1000)))));
      continue;
    }
    const std::string sid = d.pick(sessions);
    if (roll < 3) {
      try {
        store.close(sid);
      } catch (const GsbError&) {
      }
      continue;
    }
    const Json info = store.session_info(sid);
    const auto roster = info.at("roster").get<std::vector<std::string>>();
    const auto dims = info.at("dimensions").get<std::vector<std::string>>();
    const std::string evaluator = d.chance(0.05) ? "intruder" : d.pick(roster);
    const std::string dim = d.pick(dims);
    std::string item = "p" + std::to_string(100 + d.below(info.at("items").get<std::size_t>()));
    if (evaluator != "intruder" && d.chance(0.8)) {
      const Json q = store.queue(sid, evaluator, dim);
      if (!q.at("done").get<bool>()) item = q.at("item_id").get<std::string>();
    }
    const RawChoice raw = std::vector<RawChoice>{RawChoice::left, RawChoice::right, RawChoice::same}[d.below(3)];
    try {
      store.submit(sid, evaluator, item, dim, raw, static_cast<std::int64_t>(store.events().size()));
    } catch (const GsbError&) {
    }
  }
}

std::vector<Json> summaries(const GsbStore& store) {
  std::vector<Json> out;
  const Json snapshot = store.snapshot();
  for (const auto& [id, s] : snapshot.items()) {
    try {
      out.push_back(store.summary(id, true).to_json());
    } catch (const GsbError& e) {
      out.push_back(e.what());
    }
  }
  return out;
}

TEST(Store, ReplayReproducesLiveStateOverThousandEvents) {
  rftest::TempDir dir;
  const std::string path = dir.file("gsb.log");
  Json live_snapshot;
  std::vector<Json> live_summaries;
  std::vector<Event> events;
  {
    GsbStore live(path);
    random_traffic(live, 1000, 2024);
    live_snapshot = live.snapshot();
    live_summaries = summaries(live);
    events = live.events();
  }
  EXPECT_EQ(events.size(), 1000u);
  const auto replayed = GsbStore::replay(events);
  EXPECT_EQ(replayed->snapshot(), live_snapshot);
  EXPECT_EQ(summaries(*replayed), live_summaries);
  GsbStore reopened(path);
  EXPECT_EQ(reopened.snapshot(), live_snapshot);
  EXPECT_FALSE(reopened.recovered_torn_tail());
}

TEST(Store, ReplayRejectsInconsistentEvents) {
  GsbStore store;
  store.create_session(session_from(session_body(2, 3, {"layout"}, 1), "s"));
  std::vector<Event> events = store.events();
  events.push_back({2, "judgment", {{"session_id", "s"}, {"judgment", {{"item_id", "p100"}, {"evaluator", "nobody"},
                                                                       {"dimension", "layout"}, {"raw", "left"},
                                                                       {"choice", "good"}, {"timestamp_ms", 0}}}}});
  EXPECT_THROW(GsbStore::replay(events), InputError);
  events.back() = {2, "mystery", Json::object()};
  EXPECT_THROW(GsbStore::replay(events), InputError);
}

TEST(Store, DuplicateSessionAndDoubleClose) {
  GsbStore store;
  EXPECT_EQ(store.create_session(session_from(session_body(2, 3, {"layout"}, 1))), "s1");
  EXPECT_THROW(store.create_session(session_from(session_body(2, 3, {"layout"}, 1), "s1")), GsbError);
  store.close("s1");
  EXPECT_THROW(store.close("s1"), GsbError);
  EXPECT_THROW(store.close("s9"), GsbError);
}

TEST(Store, QueueNeverRevealsSystemIdentity) {
  GsbStore store;
  store.create_session(session_from(session_body(20, 3, {"layout"}, 5), "s"));
  std::size_t flipped = 0;
  for (int i = 0; i < 20; ++i) {
    const Json q = store.queue("s", "e0", "layout");
    for (const auto& [key, value] : q.items()) {
      EXPECT_EQ(key.find("side"), std::string::npos);
      EXPECT_EQ(key.find("image_a"), std::string::npos);
    }
    flipped += q.at("left_image_url").get<std::string>().ends_with("_b.png");
    EXPECT_EQ(q.at("position"), i + 1);
    store.submit("s", "e0", q.at("item_id"), "layout", RawChoice::same, 0);
  }
  EXPECT_GT(flipped, 0u);
  EXPECT_LT(flipped, 20u);
  EXPECT_TRUE(store.queue("s", "e0", "layout").at("done").get<bool>());
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_ = std::make_unique<GsbService>(store_, ServiceOptions{dir_.file(""), [] { return 1700000000000; }});
    port_ = service_->bind_any_port();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { service_->listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/v1/sessions/none"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  void TearDown() override {
    service_->stop();
    thread_.join();
  }

  Json post(const std::string& path, const Json& body, int expected) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << " " << res->body;
    return Json::parse(res->body);
  }
  Json get(const std::string& path, int expected) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << " " << res->body;
    return Json::parse(res->body);
  }

  rftest::TempDir dir_;
  GsbStore store_;
  std::unique_ptr<GsbService> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServiceTest, FullJudgingRound) {
  const std::string sid = post("/v1/sessions", session_body(6, 3, {"layout"}, 3), 201).at("session_id");
  EXPECT_EQ(get("/v1/sessions/" + sid, 200).at("items"), 6);
  get("/v1/sessions/" + sid + "/summary", 409);

  for (const std::string e : {"e0", "e1", "e2"}) {
    for (int i = 0; i < 6; ++i) {
      const Json q = get("/v1/sessions/" + sid + "/queue?evaluator=" + e + "&dimension=layout", 200);
      ASSERT_FALSE(q.at("done").get<bool>());
      EXPECT_EQ(q.at("total"), 6);
      EXPECT_EQ(q.at("completed"), i);
      const std::string left = q.at("left_image_url");
      // Every evaluator prefers system A's image.
      const std::string click = left.ends_with("_a.png") ? "left" : "right";
      const Json ack = post("/v1/sessions/" + sid + "/judgments",
                            {{"evaluator", e}, {"item_id", q.at("item_id")}, {"dimension", "layout"}, {"choice", click}}, 201);
      EXPECT_EQ(ack.at("choice"), click);
      EXPECT_FALSE(ack.contains("judgment"));
      EXPECT_EQ(ack.dump().find("good"), std::string::npos);
    }
    EXPECT_TRUE(get("/v1/sessions/" + sid + "/queue?evaluator=" + e + "&dimension=layout", 200).at("done").get<bool>());
  }
  const Json summary = get("/v1/sessions/" + sid + "/summary", 200);
  EXPECT_EQ(summary.at("dimensions").at("layout").at("good"), 6);
  EXPECT_EQ(summary.at("dimensions").at("layout").at("win_rate"), 1.0);
  EXPECT_EQ(store_.events().back().payload.at("judgment").at("timestamp_ms"), 1700000000000);

  post("/v1/sessions/" + sid + "/close", Json::object(), 200);
  post("/v1/sessions/" + sid + "/close", Json::object(), 409);
}

TEST_F(ServiceTest, ErrorStatuses) {
  const std::string sid = post("/v1/sessions", session_body(4, 4, {"layout"}, 3), 201).at("session_id");
  get("/v1/sessions/nope", 404);
  get("/v1/sessions/" + sid + "/queue?evaluator=e0", 400);
  get("/v1/sessions/" + sid + "/queue?evaluator=ghost&dimension=layout", 404);
  post("/v1/sessions", {{"prompts", Json::array()}, {"roster", {"a", "b", "c"}}}, 400);
  auto raw = client_->Post("/v1/sessions", "{not json", "application/json");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 400);

  const Json q = get("/v1/sessions/" + sid + "/queue?evaluator=e0&dimension=layout", 200);
  const Json body = {{"evaluator", "e0"}, {"item_id", q.at("item_id")}, {"dimension", "layout"}, {"choice", "same"}};
  post("/v1/sessions/" + sid + "/judgments", body, 201);
  post("/v1/sessions/" + sid + "/judgments", body, 409);
  Json bad_choice = body;
  bad_choice["choice"] = "maybe";
  post("/v1/sessions/" + sid + "/judgments", bad_choice, 400);

  // Find the evaluator left out of the first item's slots.
  std::string outsider;
  for (const std::string e : {"e0", "e1", "e2", "e3"}) {
    Json attempt = body;
    attempt["evaluator"] = e;
    auto res = client_->Post("/v1/sessions/" + sid + "/judgments", attempt.dump(), "application/json");
    if (res && res->status == 403) outsider = e;
  }
  EXPECT_FALSE(outsider.empty());
}

TEST_F(ServiceTest, GateEndpoint) {
  auto load = [](const char* name) {
    return parse_json_strict(read_file(rftest::source_path(std::string("tests/fixtures/published/") + name + ".json")), name);
  };
  const Json g = post("/v1/gate", {{"baseline", load("sd")}, {"candidate", load("room")}}, 200);
  EXPECT_EQ(g.at("improved"), 7);
  EXPECT_EQ(g.at("pass"), true);
  const Json same = post("/v1/gate", {{"baseline", load("sd")}, {"candidate", load("sd")}}, 200);
  EXPECT_EQ(same.at("pass"), false);
  post("/v1/gate", {{"baseline", load("sd")}}, 400);
}

TEST_F(ServiceTest, ServesImages) {
  write_file(dir_.file("p100_a.png"), "PNGDATA");
  auto res = client_->Get("/images/p100_a.png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "PNGDATA");
}

}  // namespace
}  // namespace roomforge::evalproto
