#include "roomforge/curation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "roomforge/error.hpp"

namespace roomforge::curation {

std::vector<RatingBallot> parse_ballots_jsonl(std::string_view text) {
  std::vector<RatingBallot> ballots;
  for (const JsonLine& line : split_lines(text)) {
    const Json doc = parse_json_strict(line.text, "ballots line " + std::to_string(line.line_number));
    try {
      RatingBallot b;
      b.image_id = doc.at("image_id").get<std::string>();
      b.rater_id = doc.at("rater_id").get<std::string>();
      const Json& level = doc.at("level");
      if (!level.is_number_integer()) throw InputError("level must be an integer");
      b.level = level.get<int>();
      ballots.push_back(std::move(b));
    } catch (const Json::exception& e) {
      throw InputError("ballots line " + std::to_string(line.line_number) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("ballots line " + std::to_string(line.line_number) + ": " + e.what());
    }
  }
  return ballots;
}

std::vector<RatedImage> aggregate_ratings(std::span<const RatingBallot> ballots, std::size_t min_ballots) {
  struct Sum {
    long total = 0;
    std::size_t count = 0;
  };
  std::map<std::string, Sum> sums;
  std::set<std::pair<std::string, std::string>> seen;
  for (const RatingBallot& b : ballots) {
    if (b.level < 1 || b.level > 5) {
      throw ValidationError("ballot for " + b.image_id + " by " + b.rater_id + ": level " + std::to_string(b.level) +
                            " outside 1..5");
    }
    if (!seen.emplace(b.image_id, b.rater_id).second) {
      throw ValidationError("rater " + b.rater_id + " rated image " + b.image_id + " twice");
    }
    Sum& s = sums[b.image_id];
    s.total += b.level;
    ++s.count;
  }
  std::vector<RatedImage> rated;
  rated.reserve(sums.size());
  for (const auto& [id, s] : sums) {
    rated.push_back({id, s.count, static_cast<double>(s.total) / static_cast<double>(s.count), s.count < min_ballots});
  }
  return rated;
}

std::size_t top_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const double exact = fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  return std::clamp<std::size_t>(k, n == 0 ? 0 : 1, n);
}

std::vector<std::string> select_top_fraction(std::span<const RatedImage> rated, double fraction) {
  const std::size_t k = top_count(rated.size(), fraction);
  std::vector<const RatedImage*> order;
  order.reserve(rated.size());
  for (const RatedImage& r : rated) order.push_back(&r);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [](const RatedImage* a, const RatedImage* b) {
                      if (a->mean != b->mean) return a->mean > b->mean;
                      if (a->count != b->count) return a->count > b->count;
                      return a->image_id < b->image_id;
                    });
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(order[i]->image_id);
  return ids;
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::screen: return "screen";
    case Tier::curated: return "curated";
    case Tier::premium: return "premium";
  }
  return "screen";
}

std::optional<Tier> LayeredDataset::tier(std::string_view image_id) const {
  auto it = tiers_.find(image_id);
  if (it == tiers_.end()) return std::nullopt;
  return it->second;
}

std::string LayeredDataset::to_jsonl() const {
  std::string out;
  for (const std::string& id : screen) {
    out += dump_canonical(Json{{"image_id", id}, {"tier", to_string(tiers_.at(id))}});
    out += '\n';
  }
  return out;
}

Json LayeredDataset::summary() const {
  return {{"screen", screen.size()}, {"curated", curated.size()}, {"premium", premium.size()},
          {"warnings", warnings}, {"screen_report", screen_report.to_json()}};
}

LayeredDataset build_layers(const ManifestParse& manifest, const quality::RuleSet& screen_rules,
                            const quality::RuleSet& strict_rules, std::span<const RatedImage> ratings,
                            const LayerConfig& config) {
  if (config.premium && ratings.empty()) throw ValidationError("premium tier requested but no ratings were given");

  LayeredDataset out;
  quality::FilterResult screened = quality::filter_manifest(manifest, screen_rules);
  out.screen_report = std::move(screened.report);

  struct Candidate {
    const ImageRecord* record;
    double aesthetic;
  };
  std::vector<Candidate> strict_pass;
  for (const ImageRecord& r : screened.kept) {
    out.screen.push_back(r.id);
    out.tiers_[r.id] = Tier::screen;
    if (!quality::evaluate_image(*r.labels, strict_rules).keep) continue;
    double aesthetic = 0.0;
    if (config.curated_cap) {
      auto it = r.labels->find(config.aesthetic_key);
      if (it == r.labels->end() || !std::holds_alternative<double>(it->second)) {
        throw ValidationError("image " + r.id + ": curated cap needs numeric label " + config.aesthetic_key);
      }
      aesthetic = std::get<double>(it->second);
    }
    strict_pass.push_back({&r, aesthetic});
  }

  std::set<std::string> curated;
  if (config.curated_cap && *config.curated_cap < strict_pass.size()) {
    std::vector<Candidate> ranked = strict_pass;
    std::stable_sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
      if (a.aesthetic != b.aesthetic) return a.aesthetic > b.aesthetic;
      return a.record->id < b.record->id;
    });
    for (std::size_t i = 0; i < *config.curated_cap; ++i) curated.insert(ranked[i].record->id);
  } else {
    for (const Candidate& c : strict_pass) curated.insert(c.record->id);
  }
  if (config.curated_cap && *config.curated_cap > out.screen.size()) {
    out.warnings.push_back("curated cap " + std::to_string(*config.curated_cap) + " exceeds screen size " +
                           std::to_string(out.screen.size()));
  }
  for (const std::string& id : out.screen) {
    if (curated.contains(id)) {
      out.curated.push_back(id);
      out.tiers_[id] = Tier::curated;
    }
  }

  if (config.premium) {
    std::vector<RatedImage> rated_curated;
    for (const RatedImage& r : ratings) {
      if (curated.contains(r.image_id)) rated_curated.push_back(r);
    }
    std::set<std::string> premium;
    if (rated_curated.empty()) {
      out.warnings.push_back("no curated image has ratings; premium tier is empty");
    } else {
      std::vector<std::string> top = select_top_fraction(rated_curated, config.fraction);
      if (top.size() > config.premium_cap) top.resize(config.premium_cap);
      premium.insert(top.begin(), top.end());
    }
    const auto under = std::count_if(rated_curated.begin(), rated_curated.end(), [](const RatedImage& r) { return r.under_rated; });
    if (under > 0) out.warnings.push_back(std::to_string(under) + " rated curated images have fewer ballots than the minimum");
    for (const std::string& id : out.curated) {
      if (premium.contains(id)) {
        out.premium.push_back(id);
        out.tiers_[id] = Tier::premium;
      }
    }
  }
  return out;
}

}  // namespace roomforge::curation
