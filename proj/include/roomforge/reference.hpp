#pragma once

// Serial reference versions of the parallel kernels. They share no code
// with the parallel paths beyond the public data types and exist so tests
// and benchmarks have something simple to compare against.

#include <span>
#include <string>
#include <vector>

#include "roomforge/bucketing.hpp"
#include "roomforge/captioning.hpp"
#include "roomforge/fusion.hpp"
#include "roomforge/metrics.hpp"
#include "roomforge/quality_filter.hpp"

namespace roomforge::reference {

quality::FilterResult filter_manifest(const ManifestParse& manifest, const quality::RuleSet& rules);

/// Exhaustive scan over every bucket.
std::vector<bucketing::Assignment> assign_buckets(std::span<const bucketing::ImageDims> images,
                                                  const bucketing::BucketPlan& plan);

/// Two-pass mean / covariance, one entry at a time.
metrics::GaussianStats gaussian_stats(const metrics::FeatureSet& features);

fusion::MergeResult merge(const fusion::MergeRecipe& recipe);

std::vector<std::vector<int>> tokenize_batch(const captioning::BpeVocabulary& vocab, std::span<const std::string> texts);

}  // namespace roomforge::reference
