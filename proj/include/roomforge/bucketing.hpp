#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roomforge/json_util.hpp"

namespace roomforge::bucketing {

struct Bucket {
  int id = 0;
  int width = 0;
  int height = 0;

  double aspect() const { return static_cast<double>(width) / height; }
  std::int64_t area() const { return static_cast<std::int64_t>(width) * height; }
};

struct BucketConstraints {
  int quantum = 64;
  int min_side = 448;
  int max_side = 1024;
  std::int64_t max_pixels = 589824;
};

/// Buckets sorted by aspect, then width; ids are positions in that order.
struct BucketPlan {
  BucketConstraints constraints;
  std::vector<Bucket> buckets;

  const Bucket& bucket(int id) const;
  Json to_json() const;
  static BucketPlan from_json(const Json& doc);
};

/// Every (w, h) with w and h multiples of `quantum` in [min_side, max_side]
/// and w*h <= max_pixels. Throws ValidationError when the constraints are
/// malformed or admit no bucket.
BucketPlan generate_buckets(const BucketConstraints& constraints);

struct Assignment {
  std::string image_id;
  int bucket_id = 0;
  double distance = 0.0;  // |ln(w/h) - ln(bw/bh)|
  int width = 0;          // original image size
  int height = 0;
};

/// Closest bucket in log-aspect space. Ties go to the larger bucket area,
/// then the smaller bucket width. Binary search over the plan's sorted
/// aspects; O(log B) per image.
Assignment assign_bucket(int width, int height, const BucketPlan& plan);

struct ImageDims {
  std::string id;
  int width = 0;
  int height = 0;
};

/// Parallel assign_bucket over many images; output order matches input.
std::vector<Assignment> assign_buckets(std::span<const ImageDims> images, const BucketPlan& plan);

struct ResolutionCondition {
  int target_width = 0;
  int target_height = 0;
  int original_width = 0;
  int original_height = 0;
};

struct Iteration {
  std::size_t index = 0;
  int bucket_id = 0;
  int target_width = 0;
  int target_height = 0;
  std::vector<std::string> image_ids;
  std::vector<ResolutionCondition> conditions;  // parallel to image_ids
};

enum class BucketChoice {
  remaining_weighted,  // probability proportional to unscheduled images left
  uniform,             // uniform over buckets that still have images
};

struct EpochSchedule {
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::vector<Iteration> iterations;

  /// One JSON object per line: {iter, bucket_id, target_w, target_h,
  /// image_ids, conditions}.
  std::string to_jsonl() const;
};

/// Deterministic bucket-homogeneous epoch.
///
/// Images are grouped per bucket in input order, then each bucket is
/// shuffled (ascending bucket id) with one Xoshiro256 stream seeded by
/// `seed`. Each iteration then draws r = below(total remaining) from the same
/// stream and takes the bucket whose cumulative remaining count (ascending
/// bucket id) first exceeds r; uniform mode draws below(non-empty buckets).
/// The iteration takes the next min(batch_size, remaining) images of that
/// bucket. Throws ValidationError on batch_size == 0 or no assignments.
EpochSchedule plan_epoch(std::span<const Assignment> assignments, const BucketPlan& plan, std::size_t batch_size,
                         std::uint64_t seed, BucketChoice choice = BucketChoice::remaining_weighted);

struct ResizeSpec {
  std::string image_id;
  int source_width = 0;
  int source_height = 0;
  int target_width = 0;
  int target_height = 0;
  double distortion = 1.0;  // (w/h) / (bw/bh)
  struct Crop {
    int x, y, width, height;
  };
  std::optional<Crop> crop;  // never set: buckets are reached by resizing only
};

ResizeSpec resize_spec(int width, int height, const Bucket& bucket, std::string image_id = {});

}  // namespace roomforge::bucketing
