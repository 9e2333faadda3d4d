#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roomforge/manifest.hpp"
#include "roomforge/quality_filter.hpp"

namespace roomforge::curation {

/// One designer's 1-5 beauty level for one image.
struct RatingBallot {
  std::string image_id;
  std::string rater_id;
  int level = 0;
};

struct RatedImage {
  std::string image_id;
  std::size_t count = 0;
  double mean = 0.0;
  bool under_rated = false;  // fewer ballots than the configured minimum
};

/// JSONL {image_id, rater_id, level}. Throws InputError on malformed lines.
std::vector<RatingBallot> parse_ballots_jsonl(std::string_view text);

/// Per-image mean level, sorted by image id. Images under `min_ballots` are
/// flagged and kept. Throws ValidationError on a repeated (image, rater) pair
/// or a level outside 1..5.
std::vector<RatedImage> aggregate_ratings(std::span<const RatingBallot> ballots, std::size_t min_ballots = 3);

/// ceil(fraction * n), guarded against products like 0.1 * 30 landing a hair
/// above an integer. Throws ValidationError unless 0 < fraction <= 1.
std::size_t top_count(std::size_t n, double fraction);

/// The top_count(n, fraction) images ranked by mean descending, then ballot
/// count descending, then image id ascending. Returned in rank order.
std::vector<std::string> select_top_fraction(std::span<const RatedImage> rated, double fraction);

enum class Tier { screen, curated, premium };

std::string_view to_string(Tier tier);

struct LayerConfig {
  std::optional<std::size_t> curated_cap;  // none = keep every strict survivor
  bool premium = true;
  double fraction = 0.10;
  std::size_t premium_cap = 5000;
  std::string aesthetic_key = "aesthetics.aesthetic_score";
};

struct LayeredDataset {
  std::vector<std::string> screen;   // manifest order
  std::vector<std::string> curated;  // manifest order
  std::vector<std::string> premium;  // manifest order
  std::vector<std::string> warnings;
  quality::DropReport screen_report;

  /// Highest tier per image, null for images that did not survive screening.
  std::optional<Tier> tier(std::string_view image_id) const;
  /// One {image_id, tier} line per screened image, manifest order.
  std::string to_jsonl() const;
  Json summary() const;

 private:
  friend LayeredDataset build_layers(const ManifestParse&, const quality::RuleSet&, const quality::RuleSet&,
                                     std::span<const RatedImage>, const LayerConfig&);
  std::map<std::string, Tier, std::less<>> tiers_;
};

/// screen   = records passing `screen_rules`
/// curated  = screen records also passing `strict_rules`, capped by the
///            aesthetic label (descending, id ascending on ties)
/// premium  = select_top_fraction over the rated curated images, capped
/// Throws ValidationError when premium is requested with no ratings.
LayeredDataset build_layers(const ManifestParse& manifest, const quality::RuleSet& screen_rules,
                            const quality::RuleSet& strict_rules, std::span<const RatedImage> ratings,
                            const LayerConfig& config);

}  // namespace roomforge::curation
