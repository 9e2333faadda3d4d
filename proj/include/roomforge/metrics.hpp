#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roomforge/json_util.hpp"

namespace roomforge::metrics {

/// n x d row-major feature matrix.
struct FeatureSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
};

/// Binary layout (all little-endian):
///   bytes 0..3   magic "RFMX"
///   bytes 4..7   u32 n (rows)
///   bytes 8..11  u32 d (columns)
///   bytes 12..15 u32 reserved, written as 0
///   then n*d f32 values, row-major
/// Throws InputError on bad magic, truncation, trailing bytes or non-finite values.
FeatureSet read_feature_set(std::span<const std::uint8_t> bytes);
FeatureSet read_feature_file(const std::string& path);
std::vector<std::uint8_t> write_feature_set(const FeatureSet& features);

struct GaussianStats {
  std::size_t d = 0;
  std::vector<double> mean;        // d
  std::vector<double> covariance;  // d x d row-major, symmetric
};

/// Sample mean and unbiased (n - 1) covariance, symmetrized as (C + C^T) / 2.
/// Covariance entries are computed in parallel over rows of the upper
/// triangle. Throws ValidationError when n < 2 or entries are non-finite.
GaussianStats gaussian_stats(const FeatureSet& features);

/// Symmetric PSD square root through eigendecomposition; eigenvalues in
/// [-1e-8 * max(1, largest), 0) are clamped to 0, anything more negative is
/// rejected. Throws ValidationError / Error on non-convergence.
std::vector<double> symmetric_sqrt(std::span<const double> matrix, std::size_t d);

/// ||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^(1/2)), with the trace of the
/// product root computed as Tr sqrt(sqrt(Ca) Cb sqrt(Ca)). Result clamped at 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Mean over pairs of scale * max(cos(image_i, text_i), 0).
double clip_score(const FeatureSet& image_embeddings, const FeatureSet& text_embeddings, double scale = 100.0);

/// Arithmetic mean of per-image aesthetic scores in [0, 100].
double aesthetic_score(std::span<const double> scores);

/// Named class vocabularies. The default file holds 49 furniture classes,
/// 8 styles, 10 floor/ceiling elements and per-room singleton classes.
struct Vocabularies {
  std::set<std::string> furniture;
  std::set<std::string> styles;
  std::set<std::string> hard;
  std::map<std::string, std::set<std::string>> singletons;  // room -> classes

  static Vocabularies parse(std::string_view json_text);
  static const Vocabularies& defaults();
};

struct DetectionRecord {
  std::string image_id;
  std::string room;
  std::map<std::string, int> objects;  // class -> count (>= 1)
  std::string style;
  std::set<std::string> hard;
  std::optional<double> aesthetic;
};

struct PromptExpectation {
  std::string image_id;
  std::set<std::string> furniture;
  std::string style;
  std::set<std::string> hard;
};

DetectionRecord parse_detection(const Json& doc);
PromptExpectation parse_expectation(const Json& doc);
/// Keyed by image id; duplicate ids are an InputError.
std::map<std::string, DetectionRecord> parse_detections_jsonl(std::string_view text);
std::vector<PromptExpectation> parse_expectations_jsonl(std::string_view text);

enum class Decoration { soft, hard };

/// Percentage of required items present in the matching detection, counted
/// per item over all images. Soft uses furniture vs detected objects, hard
/// uses floor/ceiling elements. Throws on requirements outside `vocabulary`,
/// missing detections, or when nothing is required at all.
double follow_rate(std::span<const PromptExpectation> expectations,
                   const std::map<std::string, DetectionRecord>& detections, Decoration kind,
                   const std::set<std::string>& vocabulary);

double style_accuracy(std::span<const PromptExpectation> expectations,
                      const std::map<std::string, DetectionRecord>& detections,
                      const std::set<std::string>& styles);

enum class UnknownRoom { skip, error };

struct RepetitionResult {
  double rate = 0.0;
  std::size_t evaluated = 0;
  std::size_t repetitive = 0;
  std::size_t skipped = 0;
};

/// An image is repetitive iff a singleton class of its room appears twice or
/// more. Images whose room has no rule are skipped and counted, or rejected.
RepetitionResult repetition_rate(std::span<const DetectionRecord> detections,
                                 const std::map<std::string, std::set<std::string>>& singletons,
                                 UnknownRoom policy = UnknownRoom::skip);

enum class Direction { up, down };

std::string_view to_string(Direction direction);
Direction parse_direction(std::string_view text);

struct MetricValue {
  double value = 0.0;
  std::size_t count = 0;
  Direction direction = Direction::up;
};

inline constexpr std::string_view kMetricNames[] = {"AS", "SFR", "SA", "HFR", "FRR", "FID", "CS"};

/// Default improvement direction. FRR is lower-is-better.
Direction default_direction(std::string_view metric);

/// Metric name -> value, serialized as {"AS": {"value", "count", "direction"}, ...}.
struct MetricReport {
  std::map<std::string, MetricValue> metrics;

  Json to_json() const;
  static MetricReport from_json(const Json& doc);
  /// Throws ValidationError when a bounded metric leaves its range.
  void validate() const;
};

struct MetricInputs {
  std::optional<FeatureSet> reference_features;  // FID side A
  std::optional<FeatureSet> generated_features;  // FID side B
  std::optional<FeatureSet> image_embeddings;
  std::optional<FeatureSet> text_embeddings;
  std::optional<std::vector<double>> aesthetic_scores;
  std::optional<std::vector<PromptExpectation>> expectations;
  std::optional<std::map<std::string, DetectionRecord>> detections;
  Vocabularies vocabularies = Vocabularies::defaults();
  double clip_scale = 100.0;
};

/// Computes all seven metrics. Throws ValidationError listing every missing
/// input when the bundle is incomplete.
MetricReport metric_report(const MetricInputs& inputs);

}  // namespace roomforge::metrics
