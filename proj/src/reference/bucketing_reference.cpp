#include <cmath>

#include "roomforge/error.hpp"
#include "roomforge/reference.hpp"

namespace roomforge::reference {

std::vector<bucketing::Assignment> assign_buckets(std::span<const bucketing::ImageDims> images,
                                                  const bucketing::BucketPlan& plan) {
  if (plan.buckets.empty()) throw ValidationError("empty bucket plan");
  std::vector<bucketing::Assignment> out;
  out.reserve(images.size());
  for (const auto& image : images) {
    if (image.width <= 0 || image.height <= 0) throw ValidationError("image dimensions must be positive");
    const double target = std::log(static_cast<double>(image.width) / image.height);
    const bucketing::Bucket* best = nullptr;
    double best_distance = 0.0;
    for (const auto& b : plan.buckets) {
      const double d = std::abs(target - std::log(b.aspect()));
      const bool better = best == nullptr || d < best_distance ||
                          (d == best_distance && (b.area() > best->area() ||
                                                  (b.area() == best->area() && b.width < best->width)));
      if (better) {
        best = &b;
        best_distance = d;
      }
    }
    out.push_back({image.id, best->id, best_distance, image.width, image.height});
  }
  return out;
}

}  // namespace roomforge::reference
