#include "roomforge/reference.hpp"

namespace roomforge::reference {

fusion::MergeResult merge(const fusion::MergeRecipe& recipe) {
  const fusion::MergePlan plan = fusion::prepare_merge(recipe);
  fusion::MergeResult result;
  for (const std::string& key : plan.keys) {
    const fusion::Tensor& shape_source = plan.ordered.front().archive->tensors.at(key);
    std::vector<double> acc(shape_source.element_count(), 0.0);
    std::vector<bool> started(acc.size(), false);
    for (const fusion::MergeInput& in : plan.ordered) {
      if (in.weight == 0.0) continue;
      const std::vector<float> values = in.archive->tensors.at(key).to_f32();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double term = in.weight * static_cast<double>(values[i]);
        acc[i] = started[i] ? acc[i] + term : term;
        started[i] = true;
      }
    }
    std::vector<float> narrowed(acc.begin(), acc.end());
    result.archive.tensors.emplace(key, fusion::Tensor::from_f32(shape_source.shape, narrowed));
  }
  result.archive.metadata = plan.metadata;
  result.warnings = plan.warnings;
  return result;
}

}  // namespace roomforge::reference
