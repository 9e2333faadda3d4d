#include "roomforge/gate.hpp"

#include <gtest/gtest.h>

#include "roomforge/error.hpp"
#include "test_support.hpp"

namespace roomforge::evalproto {
namespace {

using metrics::Direction;
using metrics::MetricReport;

MetricReport fixture(const std::string& name) {
  return MetricReport::from_json(parse_json_strict(read_file(rftest::source_path("tests/fixtures/published/" + name + ".json")), name));
}

const char* const kBaselines[] = {"sd", "epicrealism", "realistic_vision", "sdxl", "sdxl_refiner"};

TEST(PublishedReports, FixturesHoldSevenMetricsWithPublishedDirections) {
  for (const char* name : {"sd", "epicrealism", "realistic_vision", "sdxl", "sdxl_refiner", "room"}) {
    const MetricReport r = fixture(name);
    ASSERT_EQ(r.metrics.size(), 7u) << name;
    EXPECT_NO_THROW(r.validate());
    for (auto metric : metrics::kMetricNames) EXPECT_EQ(r.metrics.at(std::string(metric)).direction, metrics::default_direction(metric));
  }
  EXPECT_DOUBLE_EQ(fixture("room").metrics.at("AS").value, 78.3);
  EXPECT_DOUBLE_EQ(fixture("sd").metrics.at("FRR").value, 27.3);
  EXPECT_DOUBLE_EQ(fixture("sd").metrics.at("FID").value, 47.4);
}

TEST(PublishedReports, RoomBeatsEveryBaselineOnAllSeven) {
  const MetricReport room = fixture("room");
  for (const char* base : kBaselines) {
    const GateDecision g = dual_gate(fixture(base), room);
    EXPECT_EQ(g.improved, 7u) << base;
    EXPECT_EQ(g.total, 7u);
    EXPECT_TRUE(g.pass) << base;
  }
}

TEST(PublishedReports, EpicRealismOverStableDiffusionIsSixOfSeven) {
  const GateDecision g = dual_gate(fixture("sd"), fixture("epicrealism"));
  EXPECT_EQ(g.improved, 6u);
  EXPECT_NEAR(g.fraction, 6.0 / 7.0, 1e-15);
  EXPECT_TRUE(g.pass);
  for (const MetricOutcome& o : g.outcomes) EXPECT_EQ(o.improved, o.name != "AS") << o.name;
}

TEST(Gate, IdenticalReportsFail) {
  const MetricReport r = fixture("room");
  const GateDecision g = dual_gate(r, r);
  EXPECT_EQ(g.improved, 0u);
  EXPECT_FALSE(g.pass);
}

TEST(Gate, ThresholdIsStrictUnlessInclusive) {
  MetricReport base, cand;
  for (int i = 0; i < 10; ++i) {
    const std::string name = "m" + std::to_string(i);
    base.metrics[name] = {1.0, 1, Direction::up};
    cand.metrics[name] = {i < 7 ? 2.0 : 1.0, 1, Direction::up};
  }
  EXPECT_FALSE(dual_gate(base, cand).pass);
  EXPECT_TRUE(dual_gate(base, cand, 0.70, true).pass);
  EXPECT_EQ(dual_gate(base, cand).to_json().at("comparison"), ">");
}

TEST(Gate, MonotoneInImprovements) {
  const MetricReport sd = fixture("sd");
  MetricReport cand = sd;
  bool passed = false;
  for (auto metric : metrics::kMetricNames) {
    auto& m = cand.metrics.at(std::string(metric));
    m.value += m.direction == Direction::up ? 1.0 : -1.0;
    const bool pass = dual_gate(sd, cand).pass;
    EXPECT_TRUE(!passed || pass);
    passed = pass;
  }
  EXPECT_TRUE(passed);
}

TEST(Gate, DirectionOverridesAndErrors) {
  const MetricReport sd = fixture("sd"), room = fixture("room");
  std::map<std::string, Direction> dirs;
  for (auto m : metrics::kMetricNames) dirs[std::string(m)] = Direction::up;
  EXPECT_EQ(dual_gate(sd, room, dirs).improved, 5u);  // FRR and FID read the wrong way round
  dirs.erase("CS");
  EXPECT_THROW(dual_gate(sd, room, dirs), ValidationError);
  MetricReport fewer = room;
  fewer.metrics.erase("AS");
  EXPECT_THROW(dual_gate(sd, fewer), ValidationError);
  EXPECT_THROW(dual_gate(sd, room, 1.5), ValidationError);
  MetricReport flipped = room;
  flipped.metrics.at("FID").direction = Direction::up;
  EXPECT_THROW(dual_gate(sd, flipped), ValidationError);
}

}  // namespace
}  // namespace roomforge::evalproto
