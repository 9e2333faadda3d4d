#include "roomforge/curation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "roomforge/error.hpp"
#include "test_support.hpp"

namespace roomforge::curation {
namespace {

std::vector<RatingBallot> ballots_for(const std::string& id, std::vector<int> levels) {
  std::vector<RatingBallot> out;
  for (std::size_t i = 0; i < levels.size(); ++i) out.push_back({id, "r" + std::to_string(i), levels[i]});
  return out;
}

TEST(Ratings, MeanOfThree) {
  const auto rated = aggregate_ratings(ballots_for("a", {3, 4, 5}));
  ASSERT_EQ(rated.size(), 1u);
  EXPECT_DOUBLE_EQ(rated[0].mean, 4.0);
  EXPECT_EQ(rated[0].count, 3u);
  EXPECT_FALSE(rated[0].under_rated);
}

TEST(Ratings, SingleBallotIsFlagged) {
  const auto rated = aggregate_ratings(ballots_for("a", {5}), 3);
  ASSERT_EQ(rated.size(), 1u);
  EXPECT_DOUBLE_EQ(rated[0].mean, 5.0);
  EXPECT_TRUE(rated[0].under_rated);
}

TEST(Ratings, RejectsRepeatsAndOutOfRangeLevels) {
  auto twice = ballots_for("a", {3, 4});
  twice.push_back({"a", "r0", 5});
  EXPECT_THROW(aggregate_ratings(twice), ValidationError);
  EXPECT_THROW(aggregate_ratings(ballots_for("a", {0})), ValidationError);
  EXPECT_THROW(aggregate_ratings(ballots_for("a", {6})), ValidationError);
}

TEST(Ratings, ParseJsonl) {
  const auto ballots = parse_ballots_jsonl(
      "{\"image_id\": \"a\", \"rater_id\": \"x\", \"level\": 4}\n\n{\"image_id\": \"b\", \"rater_id\": \"x\", \"level\": 2}\n");
  ASSERT_EQ(ballots.size(), 2u);
  EXPECT_EQ(ballots[1].level, 2);
  EXPECT_THROW(parse_ballots_jsonl("{\"image_id\": \"a\"}\n"), InputError);
}

TEST(Ratings, MatchesGroupingOracle) {
  rftest::Draw d(500);
  std::vector<RatingBallot> ballots;
  std::map<std::string, std::vector<int>> groups;
  std::set<std::pair<std::string, std::string>> pairs;
  while (ballots.size() < 500) {
    const std::string id = "img" + std::to_string(d.below(80));
    const std::string rater = "r" + std::to_string(d.below(30));
    if (!pairs.emplace(id, rater).second) continue;
    const int level = d.between(1, 5);
    ballots.push_back({id, rater, level});
    groups[id].push_back(level);
  }
  const auto rated = aggregate_ratings(ballots, 4);
  ASSERT_EQ(rated.size(), groups.size());
  for (const RatedImage& r : rated) {
    const auto& g = groups.at(r.image_id);
    double sum = 0;
    for (int v : g) sum += v;
    EXPECT_DOUBLE_EQ(r.mean, sum / g.size());
    EXPECT_EQ(r.count, g.size());
    EXPECT_EQ(r.under_rated, g.size() < 4);
  }
  EXPECT_TRUE(std::is_sorted(rated.begin(), rated.end(),
                             [](const RatedImage& a, const RatedImage& b) { return a.image_id < b.image_id; }));
}

TEST(TopCount, CeilWithGuard) {
  EXPECT_EQ(top_count(10, 0.10), 1u);
  EXPECT_EQ(top_count(30, 0.10), 3u);
  EXPECT_EQ(top_count(31, 0.10), 4u);
  EXPECT_EQ(top_count(1, 0.10), 1u);
  EXPECT_EQ(top_count(7, 1.0), 7u);
  EXPECT_THROW(top_count(10, 0.0), ValidationError);
  EXPECT_THROW(top_count(10, 1.5), ValidationError);
  for (std::size_t n = 1; n <= 2000; ++n) {
    EXPECT_EQ(top_count(n, 0.10), (n + 9) / 10) << n;
  }
}

TEST(TopFraction, UniqueMax) {
  std::vector<RatedImage> rated;
  for (int i = 0; i < 10; ++i) rated.push_back({"i" + std::to_string(i), 3, i == 6 ? 4.5 : 2.0 + 0.1 * i, false});
  EXPECT_EQ(select_top_fraction(rated, 0.10), std::vector<std::string>{"i6"});
}

TEST(TopFraction, TieBreakByCountThenId) {
  std::vector<RatedImage> rated = {{"d", 3, 4.0, false}, {"c", 3, 4.0, false}, {"b", 3, 4.0, false}, {"a", 3, 4.0, false}};
  EXPECT_EQ(select_top_fraction(rated, 0.5), (std::vector<std::string>{"a", "b"}));
  rated[0].count = 5;
  EXPECT_EQ(select_top_fraction(rated, 0.5), (std::vector<std::string>{"d", "a"}));
}

TEST(TopFraction, MatchesSortAndSliceOracle) {
  rftest::Draw d(1000);
  std::vector<RatedImage> rated;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t count = d.between(1, 6);
    double sum = 0;
    for (std::size_t k = 0; k < count; ++k) sum += d.between(1, 5);
    rated.push_back({"img" + std::to_string(d.below(1u << 30)) + "-" + std::to_string(i), count, sum / count, false});
  }
  for (double fraction : {0.10, 0.25, 0.5, 1.0}) {
    std::vector<RatedImage> sorted = rated;
    std::sort(sorted.begin(), sorted.end(), [](const RatedImage& a, const RatedImage& b) {
      return std::tie(b.mean, b.count, a.image_id) < std::tie(a.mean, a.count, b.image_id);
    });
    const std::size_t k = static_cast<std::size_t>(std::ceil(fraction * 1000 - 1e-9));
    std::vector<std::string> expected;
    for (std::size_t i = 0; i < k; ++i) expected.push_back(sorted[i].image_id);
    EXPECT_EQ(select_top_fraction(rated, fraction), expected) << fraction;
  }
}

ManifestParse manifest_of(const std::string& text) { return parse_manifest(text, LabelSchema::default_schema()); }

// 100 screen survivors; 40 of them pass the strict profile; 10 of those
// carry ratings. ceil(0.1 * 10) = 1 premium image.
TEST(Layers, HundredFortyTenGivesOnePremium) {
  std::string text;
  for (int i = 0; i < 100; ++i) {
    Json labels = rftest::benign_labels();
    labels["aesthetics.aesthetic_score"] = i < 40 ? 80 + (i % 7) : 55;
    text += Json{{"id", "m" + std::to_string(100 + i)}, {"width", 1024}, {"height", 1024}, {"labels", labels}}.dump() + "\n";
  }
  std::vector<RatingBallot> ballots;
  for (int i = 0; i < 10; ++i) {
    auto b = ballots_for("m" + std::to_string(100 + i * 4), {3, i == 5 ? 5 : 4, 4});
    ballots.insert(ballots.end(), b.begin(), b.end());
  }
  const auto rated = aggregate_ratings(ballots);
  const LayeredDataset layers = build_layers(manifest_of(text), quality::default_rules(), quality::strict_rules(), rated, {});
  EXPECT_EQ(layers.screen.size(), 100u);
  EXPECT_EQ(layers.curated.size(), 40u);
  EXPECT_EQ(layers.premium, std::vector<std::string>{"m120"});
  EXPECT_EQ(layers.tier("m120"), Tier::premium);
  EXPECT_EQ(layers.tier("m101"), Tier::curated);
  EXPECT_EQ(layers.tier("m150"), Tier::screen);
  EXPECT_EQ(layers.tier("nope"), std::nullopt);
}

TEST(Layers, PremiumWithoutRatingsIsAnError) {
  const std::string text = rftest::synthetic_manifest(10, 1);
  EXPECT_THROW(build_layers(manifest_of(text), quality::default_rules(), quality::strict_rules(), {}, {}),
               ValidationError);
  LayerConfig no_premium;
  no_premium.premium = false;
  EXPECT_NO_THROW(build_layers(manifest_of(text), quality::default_rules(), quality::strict_rules(), {}, no_premium));
}

TEST(Layers, CuratedCapKeepsHighestAesthetic) {
  std::string text;
  for (int i = 0; i < 6; ++i) {
    Json labels = rftest::benign_labels();
    labels["aesthetics.aesthetic_score"] = 70 + i * 5;
    text += Json{{"id", "c" + std::to_string(i)}, {"width", 900}, {"height", 900}, {"labels", labels}}.dump() + "\n";
  }
  LayerConfig config;
  config.premium = false;
  config.curated_cap = 2;
  const LayeredDataset layers = build_layers(manifest_of(text), quality::default_rules(), quality::strict_rules(), {}, config);
  EXPECT_EQ(layers.curated, (std::vector<std::string>{"c4", "c5"}));
  config.curated_cap = 50;
  const LayeredDataset wide = build_layers(manifest_of(text), quality::default_rules(), quality::strict_rules(), {}, config);
  EXPECT_EQ(wide.curated.size(), 6u);
  EXPECT_FALSE(wide.warnings.empty());
}

TEST(Layers, TiersNestUnderFuzzedConfigs) {
  rftest::Draw d(64);
  for (int trial = 0; trial < 25; ++trial) {
    const std::string text = rftest::synthetic_manifest(150, 1000 + trial);
    const ManifestParse manifest = manifest_of(text);
    std::vector<RatingBallot> ballots;
    for (const auto& r : manifest.records) {
      if (!d.chance(0.6)) continue;
      for (int k = d.between(1, 4); k > 0; --k) ballots.push_back({r.id, "r" + std::to_string(k), d.between(1, 5)});
    }
    LayerConfig config;
    config.fraction = d.uniform(0.01, 1.0);
    config.premium_cap = d.between(1, 30);
    if (d.chance(0.5)) config.curated_cap = d.between(0, 80);
    const auto rated = aggregate_ratings(ballots, 3);
    const LayeredDataset layers =
        build_layers(manifest, quality::default_rules(), quality::strict_rules(), rated, config);
    const std::set<std::string> screen(layers.screen.begin(), layers.screen.end());
    const std::set<std::string> curated(layers.curated.begin(), layers.curated.end());
    for (const auto& id : layers.curated) ASSERT_TRUE(screen.contains(id));
    for (const auto& id : layers.premium) ASSERT_TRUE(curated.contains(id));
    EXPECT_LE(layers.premium.size(), config.premium_cap);
    if (config.curated_cap) {
      EXPECT_LE(layers.curated.size(), *config.curated_cap);
    }
  }
}

TEST(Layers, JsonlAndSummary) {
  const std::string text = rftest::synthetic_manifest(60, 3);
  LayerConfig config;
  config.premium = false;
  const LayeredDataset layers =
      build_layers(manifest_of(text), quality::default_rules(), quality::strict_rules(), {}, config);
  const auto lines = split_lines(layers.to_jsonl());
  ASSERT_EQ(lines.size(), layers.screen.size());
  const Json first = Json::parse(lines[0].text);
  EXPECT_EQ(first.at("image_id"), layers.screen[0]);
  EXPECT_EQ(layers.summary().at("curated"), layers.curated.size());
}

}  // namespace
}  // namespace roomforge::curation
