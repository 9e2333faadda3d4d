#include "roomforge/bucketing.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "roomforge/error.hpp"
#include "roomforge/rng.hpp"

namespace roomforge::bucketing {

namespace {

// a.aspect < b.aspect, exactly, via cross multiplication.
bool aspect_less(const Bucket& a, const Bucket& b) { return std::int64_t{a.width} * b.height < std::int64_t{b.width} * a.height; }
bool aspect_equal(const Bucket& a, const Bucket& b) { return std::int64_t{a.width} * b.height == std::int64_t{b.width} * a.height; }

// Preferred bucket among equal distances: larger area, then smaller width.
bool preferred(const Bucket& a, const Bucket& b) {
  if (a.area() != b.area()) return a.area() > b.area();
  return a.width < b.width;
}

double log_aspect(int width, int height) { return std::log(static_cast<double>(width) / height); }

/// Distinct aspects of a plan in ascending order, each represented by its
/// preferred bucket.
class AspectIndex {
 public:
  explicit AspectIndex(const BucketPlan& plan) {
    if (plan.buckets.empty()) throw ValidationError("empty bucket plan");
    for (const Bucket& b : plan.buckets) {
      if (!groups_.empty() && aspect_equal(*groups_.back().bucket, b)) {
        if (preferred(b, *groups_.back().bucket)) groups_.back().bucket = &b;
        continue;
      }
      groups_.push_back({log_aspect(b.width, b.height), &b});
    }
  }

  std::pair<const Bucket*, double> nearest(int width, int height) const {
    const double target = log_aspect(width, height);
    auto it = std::lower_bound(groups_.begin(), groups_.end(), target,
                               [](const Group& g, double v) { return g.log_aspect < v; });
    const Group* best = nullptr;
    double best_distance = 0.0;
    auto consider = [&](const Group& g) {
      const double d = std::abs(target - g.log_aspect);
      if (best == nullptr || d < best_distance || (d == best_distance && preferred(*g.bucket, *best->bucket))) {
        best = &g;
        best_distance = d;
      }
    };
    if (it != groups_.end()) consider(*it);
    if (it != groups_.begin()) consider(*std::prev(it));
    return {best->bucket, best_distance};
  }

 private:
  struct Group {
    double log_aspect;
    const Bucket* bucket;
  };
  std::vector<Group> groups_;
};

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

}  // namespace

const Bucket& BucketPlan::bucket(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= buckets.size() || buckets[id].id != id) {
    throw ValidationError("unknown bucket id " + std::to_string(id));
  }
  return buckets[id];
}

Json BucketPlan::to_json() const {
  Json list = Json::array();
  for (const Bucket& b : buckets) list.push_back({{"id", b.id}, {"width", b.width}, {"height", b.height}});
  return Json{{"quantum", constraints.quantum},
              {"min_side", constraints.min_side},
              {"max_side", constraints.max_side},
              {"max_pixels", constraints.max_pixels},
              {"buckets", list}};
}

BucketPlan BucketPlan::from_json(const Json& doc) {
  BucketPlan plan;
  try {
    plan.constraints.quantum = doc.at("quantum").get<int>();
    plan.constraints.min_side = doc.at("min_side").get<int>();
    plan.constraints.max_side = doc.at("max_side").get<int>();
    plan.constraints.max_pixels = doc.at("max_pixels").get<std::int64_t>();
    for (const Json& b : doc.at("buckets")) {
      plan.buckets.push_back({b.at("id").get<int>(), b.at("width").get<int>(), b.at("height").get<int>()});
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("bucket plan: ") + e.what());
  }
  if (plan.buckets.empty()) throw ValidationError("bucket plan has no buckets");
  for (std::size_t i = 0; i < plan.buckets.size(); ++i) {
    const Bucket& b = plan.buckets[i];
    if (b.id != static_cast<int>(i)) throw ValidationError("bucket ids must be 0..n-1 in order");
    if (b.width <= 0 || b.height <= 0) throw ValidationError("bucket with non-positive size");
    if (i > 0) {
      const Bucket& prev = plan.buckets[i - 1];
      const bool ordered = aspect_less(prev, b) || (aspect_equal(prev, b) && prev.width < b.width);
      if (!ordered) throw ValidationError("bucket plan is not sorted by aspect then width");
    }
  }
  return plan;
}

BucketPlan generate_buckets(const BucketConstraints& c) {
  if (c.quantum < 1) throw ValidationError("quantum must be >= 1");
  if (c.min_side < 1) throw ValidationError("min_side must be >= 1");
  if (c.min_side > c.max_side) {
    throw ValidationError("min_side " + std::to_string(c.min_side) + " exceeds max_side " +
                          std::to_string(c.max_side));
  }
  if (c.max_pixels < std::int64_t{c.min_side} * c.min_side) throw ValidationError("max_pixels below min_side^2");

  const int first = (c.min_side + c.quantum - 1) / c.quantum * c.quantum;
  BucketPlan plan;
  plan.constraints = c;
  for (int w = first; w <= c.max_side; w += c.quantum) {
    for (int h = first; h <= c.max_side; h += c.quantum) {
      if (std::int64_t{w} * h <= c.max_pixels) plan.buckets.push_back({0, w, h});
    }
  }
  if (plan.buckets.empty()) throw ValidationError("constraints admit no bucket");
  std::sort(plan.buckets.begin(), plan.buckets.end(), [](const Bucket& a, const Bucket& b) {
    if (!aspect_equal(a, b)) return aspect_less(a, b);
    return a.width < b.width;
  });
  for (std::size_t i = 0; i < plan.buckets.size(); ++i) plan.buckets[i].id = static_cast<int>(i);
  return plan;
}

Assignment assign_bucket(int width, int height, const BucketPlan& plan) {
  check_dims(width, height);
  const auto [bucket, distance] = AspectIndex(plan).nearest(width, height);
  return {{}, bucket->id, distance, width, height};
}

std::vector<Assignment> assign_buckets(std::span<const ImageDims> images, const BucketPlan& plan) {
  for (const ImageDims& image : images) check_dims(image.width, image.height);
  const AspectIndex index(plan);
  std::vector<Assignment> out(images.size());
  const auto n = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const ImageDims& image = images[i];
    const auto [bucket, distance] = index.nearest(image.width, image.height);
    out[i] = {image.id, bucket->id, distance, image.width, image.height};
  }
  return out;
}

EpochSchedule plan_epoch(std::span<const Assignment> assignments, const BucketPlan& plan, std::size_t batch_size,
                         std::uint64_t seed, BucketChoice choice) {
  if (batch_size == 0) throw ValidationError("batch size must be >= 1");
  if (assignments.empty()) throw ValidationError("no assignments to schedule");

  std::map<int, std::vector<const Assignment*>> queues;
  for (const Assignment& a : assignments) {
    plan.bucket(a.bucket_id);
    queues[a.bucket_id].push_back(&a);
  }

  Xoshiro256 rng(seed);
  for (auto& [id, queue] : queues) rng.shuffle(std::span(queue));

  struct Cursor {
    int bucket_id;
    std::vector<const Assignment*>* queue;
    std::size_t next = 0;
    std::size_t remaining() const { return queue->size() - next; }
  };
  std::vector<Cursor> cursors;
  for (auto& [id, queue] : queues) cursors.push_back({id, &queue});

  EpochSchedule schedule;
  schedule.seed = seed;
  schedule.batch_size = batch_size;
  std::size_t remaining = assignments.size();
  while (remaining > 0) {
    Cursor* chosen = nullptr;
    if (choice == BucketChoice::remaining_weighted) {
      std::uint64_t r = rng.below(remaining);
      for (Cursor& c : cursors) {
        if (r < c.remaining()) {
          chosen = &c;
          break;
        }
        r -= c.remaining();
      }
    } else {
      std::size_t live = 0;
      for (const Cursor& c : cursors) live += c.remaining() > 0 ? 1 : 0;
      std::uint64_t r = rng.below(live);
      for (Cursor& c : cursors) {
        if (c.remaining() == 0) continue;
        if (r-- == 0) {
          chosen = &c;
          break;
        }
      }
    }

    const Bucket& bucket = plan.bucket(chosen->bucket_id);
    Iteration it;
    it.index = schedule.iterations.size();
    it.bucket_id = bucket.id;
    it.target_width = bucket.width;
    it.target_height = bucket.height;
    const std::size_t take = std::min(batch_size, chosen->remaining());
    for (std::size_t k = 0; k < take; ++k) {
      const Assignment* a = (*chosen->queue)[chosen->next++];
      it.image_ids.push_back(a->image_id);
      it.conditions.push_back({bucket.width, bucket.height, a->width, a->height});
    }
    remaining -= take;
    schedule.iterations.push_back(std::move(it));
  }
  return schedule;
}

std::string EpochSchedule::to_jsonl() const {
  std::string out;
  for (const Iteration& it : iterations) {
    Json conditions = Json::array();
    for (const auto& c : it.conditions) {
      conditions.push_back({{"target_w", c.target_width},
                            {"target_h", c.target_height},
                            {"original_w", c.original_width},
                            {"original_h", c.original_height}});
    }
    Json line{{"iter", it.index},
              {"bucket_id", it.bucket_id},
              {"target_w", it.target_width},
              {"target_h", it.target_height},
              {"image_ids", it.image_ids},
              {"conditions", conditions}};
    out += dump_canonical(line);
    out += '\n';
  }
  return out;
}

ResizeSpec resize_spec(int width, int height, const Bucket& bucket, std::string image_id) {
  check_dims(width, height);
  ResizeSpec spec;
  spec.image_id = std::move(image_id);
  spec.source_width = width;
  spec.source_height = height;
  spec.target_width = bucket.width;
  spec.target_height = bucket.height;
  spec.distortion = (static_cast<double>(width) / height) / bucket.aspect();
  return spec;
}

}  // namespace roomforge::bucketing
