#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "roomforge/json_util.hpp"

namespace roomforge::fusion {

enum class DType { F32, F16 };

std::string_view to_string(DType dtype);
std::size_t dtype_size(DType dtype);

struct Tensor {
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> data;  // little-endian elements

  std::size_t element_count() const;
  /// Decodes every element to float (F16 is widened exactly).
  std::vector<float> to_f32() const;
  static Tensor from_f32(std::vector<std::int64_t> shape, std::span<const float> values);

  bool operator==(const Tensor&) const = default;
};

/// Parsed checkpoint in the safetensors layout:
///
///   u64 little-endian N | N bytes of JSON header | tensor data
///
/// The header maps tensor name -> {"dtype", "shape", "data_offsets": [begin, end]}
/// with offsets relative to the start of the data section, plus an optional
/// "__metadata__" string map. Entries are kept sorted by name, so two archives
/// holding the same tensors compare equal whatever their on-disk order.
struct TensorArchive {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;

  bool operator==(const TensorArchive&) const = default;
};

/// Throws InputError on truncation, a malformed header, offsets that overlap,
/// leave gaps or run past the buffer, sizes that disagree with the shape, or
/// dtypes other than F32/F16.
TensorArchive read_tensor_archive(std::span<const std::uint8_t> bytes);
TensorArchive read_tensor_archive_file(const std::string& path);

/// Canonical form: names in byte order, dense offsets, compact header with
/// no padding. "__metadata__" is omitted when empty.
std::vector<std::uint8_t> write_tensor_archive(const TensorArchive& archive);
void write_tensor_archive_file(const std::string& path, const TensorArchive& archive);

struct ShapeMismatch {
  std::string key;
  std::vector<std::vector<std::int64_t>> shapes;  // one per archive
};

struct CompatReport {
  std::vector<std::vector<std::string>> only_in;  // per archive: keys some other archive lacks
  std::vector<std::string> shared;                // keys present everywhere
  std::vector<ShapeMismatch> shape_mismatches;    // shared keys only
  std::vector<std::string> dtype_differences;     // shared keys; promoted on merge
  bool compatible = true;                         // shared keys agree in shape
  bool identical_keys = true;

  Json to_json() const;
};

/// Throws ValidationError for fewer than two archives.
CompatReport validate_compat(std::span<const TensorArchive* const> archives);

enum class KeyPolicy { strict, intersect };

KeyPolicy parse_key_policy(std::string_view text);
std::string_view to_string(KeyPolicy policy);

struct MergeInput {
  std::string label;  // recorded in provenance, usually the source path
  const TensorArchive* archive = nullptr;
  double weight = 0.0;
};

struct MergeRecipe {
  std::vector<MergeInput> inputs;
  KeyPolicy policy = KeyPolicy::strict;
  bool allow_negative = false;
};

/// Validated merge work: the keys to produce, and the inputs in canonical
/// order (weight descending, then content hash, then label). Zero-weight
/// inputs take part in key checks but not in accumulation.
struct MergePlan {
  std::vector<std::string> keys;
  std::vector<MergeInput> ordered;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> metadata;
};

/// Throws ValidationError when weights are non-finite, negative without
/// allow_negative, or do not sum to 1 within 1e-9; under the strict policy
/// when key sets or shapes differ; and when no key survives.
MergePlan prepare_merge(const MergeRecipe& recipe);

struct MergeResult {
  TensorArchive archive;
  std::vector<std::string> warnings;
};

/// Per key: sum of weight * tensor accumulated in double, emitted as F32.
/// Keys are merged in parallel.
MergeResult merge(const MergeRecipe& recipe);

/// Writes the F32 result of the accumulation for one key from a plan.
void merge_key(const MergePlan& plan, const std::string& key, Tensor& out);

float half_to_float(std::uint16_t h);
std::uint16_t float_to_half(float f);

}  // namespace roomforge::fusion
