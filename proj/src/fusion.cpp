#include "roomforge/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include "roomforge/error.hpp"

namespace roomforge::fusion {

namespace {

constexpr std::string_view kMetadataKey = "__metadata__";

std::uint64_t load_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

DType parse_dtype(const std::string& text) {
  if (text == "F32") return DType::F32;
  if (text == "F16") return DType::F16;
  throw InputError("unsupported dtype \"" + text + "\" (only F32 and F16)");
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

struct Fnv {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  void add(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h ^= p[i];
      h *= 0x100000001B3ULL;
    }
  }
};

std::uint64_t content_hash(const TensorArchive& archive) {
  Fnv f;
  for (const auto& [name, t] : archive.tensors) {
    f.add(name.data(), name.size() + 1);
    const auto dtype = static_cast<std::uint8_t>(t.dtype);
    f.add(&dtype, 1);
    for (std::int64_t dim : t.shape) f.add(&dim, sizeof dim);
    f.add(t.data.data(), t.data.size());
  }
  return f.h;
}

}  // namespace

std::string_view to_string(DType dtype) { return dtype == DType::F32 ? "F32" : "F16"; }

std::size_t dtype_size(DType dtype) { return dtype == DType::F32 ? 4 : 2; }

float half_to_float(std::uint16_t h) {
  const bool negative = (h & 0x8000) != 0;
  const int exponent = (h >> 10) & 0x1F;
  const int mantissa = h & 0x3FF;
  float value;
  if (exponent == 0) {
    value = std::ldexp(static_cast<float>(mantissa), -24);
  } else if (exponent == 31) {
    value = mantissa ? std::numeric_limits<float>::quiet_NaN() : std::numeric_limits<float>::infinity();
  } else {
    value = std::ldexp(static_cast<float>(mantissa | 0x400), exponent - 25);
  }
  return negative ? -value : value;
}

std::uint16_t float_to_half(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000);
  const std::uint32_t magnitude = x & 0x7FFFFFFF;
  if (magnitude >= 0x7F800000) return sign | 0x7C00 | (magnitude > 0x7F800000 ? 0x200 : 0);
  if (magnitude >= 0x477FF000) return sign | 0x7C00;  // rounds past 65504
  if (magnitude < 0x38800000) {
    // Subnormal half: scale so one unit is 2^-24; exact in float, then round to even.
    const float scaled = std::bit_cast<float>(magnitude) * 16777216.0f;
    return sign | static_cast<std::uint16_t>(std::nearbyint(scaled));
  }
  const std::uint32_t exponent = (magnitude >> 23) - 127 + 15;
  std::uint32_t half = (exponent << 10) | ((magnitude & 0x7FFFFF) >> 13);
  const std::uint32_t rest = magnitude & 0x1FFF;
  if (rest > 0x1000 || (rest == 0x1000 && (half & 1))) ++half;
  return sign | static_cast<std::uint16_t>(half);
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::int64_t dim : shape) n *= static_cast<std::size_t>(dim);
  return n;
}

std::vector<float> Tensor::to_f32() const {
  const std::size_t n = data.size() / dtype_size(dtype);
  std::vector<float> out(n);
  if (dtype == DType::F32) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int k = 3; k >= 0; --k) bits = (bits << 8) | data[4 * i + k];
      out[i] = std::bit_cast<float>(bits);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = half_to_float(static_cast<std::uint16_t>(data[2 * i] | (data[2 * i + 1] << 8)));
    }
  }
  return out;
}

Tensor Tensor::from_f32(std::vector<std::int64_t> shape, std::span<const float> values) {
  Tensor t;
  t.dtype = DType::F32;
  t.shape = std::move(shape);
  if (t.element_count() != values.size()) throw ValidationError("tensor values do not match shape " + shape_string(t.shape));
  t.data.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) t.data[4 * i + k] = static_cast<std::uint8_t>(bits >> (8 * k));
  }
  return t;
}

TensorArchive read_tensor_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw InputError("archive truncated: fewer than 8 bytes");
  const std::uint64_t header_len = load_u64(bytes.data());
  if (header_len > bytes.size() - 8) {
    throw InputError("archive truncated: header length " + std::to_string(header_len) + " exceeds the " +
                     std::to_string(bytes.size() - 8) + " bytes that follow");
  }
  const std::string_view header_text(reinterpret_cast<const char*>(bytes.data() + 8), header_len);
  const Json header = parse_json_strict(header_text, "archive header");
  if (!header.is_object()) throw InputError("archive header is not a JSON object");

  const std::span<const std::uint8_t> buffer = bytes.subspan(8 + header_len);
  TensorArchive archive;
  struct Range {
    std::uint64_t begin, end;
    std::string name;
  };
  std::vector<Range> ranges;
  for (const auto& [name, entry] : header.items()) {
    if (name == kMetadataKey) {
      if (!entry.is_object()) throw InputError("__metadata__ must be an object");
      for (const auto& [k, v] : entry.items()) {
        if (!v.is_string()) throw InputError("__metadata__ value for \"" + k + "\" is not a string");
        archive.metadata[k] = v.get<std::string>();
      }
      continue;
    }
    if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") || !entry.contains("data_offsets")) {
      throw InputError("tensor \"" + name + "\": entry needs dtype, shape and data_offsets");
    }
    const Json& dtype = entry.at("dtype");
    const Json& shape = entry.at("shape");
    const Json& offsets = entry.at("data_offsets");
    if (!dtype.is_string()) throw InputError("tensor \"" + name + "\": dtype is not a string");
    if (!shape.is_array()) throw InputError("tensor \"" + name + "\": shape is not an array");
    if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() || !offsets[1].is_number_unsigned()) {
      throw InputError("tensor \"" + name + "\": data_offsets must be two non-negative integers");
    }
    Tensor t;
    t.dtype = parse_dtype(dtype.get<std::string>());
    std::uint64_t count = 1;
    for (const Json& dim : shape) {
      if (!dim.is_number_unsigned()) throw InputError("tensor \"" + name + "\": shape entries must be non-negative integers");
      const auto d = dim.get<std::uint64_t>();
      if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 16 / d) {
        throw InputError("tensor \"" + name + "\": shape overflows");
      }
      count *= d;
      t.shape.push_back(static_cast<std::int64_t>(d));
    }
    const auto begin = offsets[0].get<std::uint64_t>();
    const auto end = offsets[1].get<std::uint64_t>();
    if (begin > end || end > buffer.size()) {
      throw InputError("tensor \"" + name + "\": offsets [" + std::to_string(begin) + ", " + std::to_string(end) +
                       ") fall outside the " + std::to_string(buffer.size()) + "-byte data section");
    }
    if (end - begin != count * dtype_size(t.dtype)) {
      throw InputError("tensor \"" + name + "\": byte length " + std::to_string(end - begin) + " does not match shape " +
                       shape_string(t.shape) + " of " + std::string(to_string(t.dtype)));
    }
    t.data.assign(buffer.begin() + static_cast<std::ptrdiff_t>(begin), buffer.begin() + static_cast<std::ptrdiff_t>(end));
    ranges.push_back({begin, end, name});
    archive.tensors.emplace(name, std::move(t));
  }

  std::sort(ranges.begin(), ranges.end(), [](const Range& a, const Range& b) {
    return std::tie(a.begin, a.end) < std::tie(b.begin, b.end);
  });
  std::uint64_t cursor = 0;
  for (const Range& r : ranges) {
    if (r.begin < cursor) throw InputError("tensor \"" + r.name + "\" overlaps the previous tensor");
    if (r.begin > cursor) throw InputError("gap in data section before tensor \"" + r.name + "\"");
    cursor = r.end;
  }
  if (cursor != buffer.size()) throw InputError("data section has " + std::to_string(buffer.size() - cursor) + " unclaimed trailing bytes");
  return archive;
}

TensorArchive read_tensor_archive_file(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    return read_tensor_archive({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<std::uint8_t> write_tensor_archive(const TensorArchive& archive) {
  Json header = Json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    if (t.data.size() != t.element_count() * dtype_size(t.dtype)) {
      throw ValidationError("tensor \"" + name + "\": data size does not match shape");
    }
    header[name] = {{"dtype", to_string(t.dtype)}, {"shape", t.shape}, {"data_offsets", {offset, offset + t.data.size()}}};
    offset += t.data.size();
  }
  if (!archive.metadata.empty()) header[std::string(kMetadataKey)] = archive.metadata;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + offset);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(text.size()) >> (8 * k)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, t] : archive.tensors) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void write_tensor_archive_file(const std::string& path, const TensorArchive& archive) {
  const std::vector<std::uint8_t> bytes = write_tensor_archive(archive);
  write_file(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

Json CompatReport::to_json() const {
  Json mismatches = Json::array();
  for (const auto& m : shape_mismatches) mismatches.push_back({{"key", m.key}, {"shapes", m.shapes}});
  return {{"compatible", compatible}, {"identical_keys", identical_keys}, {"only_in", only_in},
          {"shared", shared.size()}, {"shape_mismatches", mismatches}, {"dtype_differences", dtype_differences}};
}

CompatReport validate_compat(std::span<const TensorArchive* const> archives) {
  if (archives.size() < 2) throw ValidationError("compatibility check needs at least two archives");
  CompatReport report;
  report.only_in.resize(archives.size());
  std::set<std::string> all;
  for (const TensorArchive* a : archives) {
    for (const auto& [name, t] : a->tensors) all.insert(name);
  }
  for (const std::string& key : all) {
    bool everywhere = true;
    for (const TensorArchive* a : archives) everywhere = everywhere && a->tensors.contains(key);
    if (!everywhere) {
      report.identical_keys = false;
      for (std::size_t i = 0; i < archives.size(); ++i) {
        if (archives[i]->tensors.contains(key)) report.only_in[i].push_back(key);
      }
      continue;
    }
    report.shared.push_back(key);
    ShapeMismatch m{key, {}};
    bool shape_differs = false;
    bool dtype_differs = false;
    const Tensor& first = archives[0]->tensors.at(key);
    for (const TensorArchive* a : archives) {
      const Tensor& t = a->tensors.at(key);
      m.shapes.push_back(t.shape);
      shape_differs = shape_differs || t.shape != first.shape;
      dtype_differs = dtype_differs || t.dtype != first.dtype;
    }
    if (shape_differs) {
      report.shape_mismatches.push_back(std::move(m));
      report.compatible = false;
    }
    if (dtype_differs) report.dtype_differences.push_back(key);
  }
  return report;
}

KeyPolicy parse_key_policy(std::string_view text) {
  if (text == "strict") return KeyPolicy::strict;
  if (text == "intersect") return KeyPolicy::intersect;
  throw ValidationError("key policy must be strict or intersect, got \"" + std::string(text) + "\"");
}

std::string_view to_string(KeyPolicy policy) { return policy == KeyPolicy::strict ? "strict" : "intersect"; }

MergePlan prepare_merge(const MergeRecipe& recipe) {
  if (recipe.inputs.empty()) throw ValidationError("merge recipe has no inputs");
  double total = 0.0;
  for (const MergeInput& in : recipe.inputs) {
    if (in.archive == nullptr) throw ValidationError("merge input \"" + in.label + "\" has no archive");
    if (!std::isfinite(in.weight)) throw ValidationError("merge weight for \"" + in.label + "\" is not finite");
    if (in.weight < 0.0 && !recipe.allow_negative) {
      throw ValidationError("merge weight for \"" + in.label + "\" is negative; signed weights need the signed flag");
    }
    total += in.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("merge weights sum to " + std::to_string(total) + ", expected 1");
  }

  MergePlan plan;
  std::vector<std::pair<std::uint64_t, std::size_t>> hashed;
  for (std::size_t i = 0; i < recipe.inputs.size(); ++i) hashed.emplace_back(content_hash(*recipe.inputs[i].archive), i);
  std::sort(hashed.begin(), hashed.end(), [&](const auto& a, const auto& b) {
    const MergeInput& x = recipe.inputs[a.second];
    const MergeInput& y = recipe.inputs[b.second];
    if (x.weight != y.weight) return x.weight > y.weight;
    if (a.first != b.first) return a.first < b.first;
    return x.label < y.label;
  });
  for (const auto& [hash, i] : hashed) plan.ordered.push_back(recipe.inputs[i]);

  if (recipe.inputs.size() == 1) {
    for (const auto& [name, t] : recipe.inputs[0].archive->tensors) plan.keys.push_back(name);
  } else {
    std::vector<const TensorArchive*> archives;
    for (const MergeInput& in : plan.ordered) archives.push_back(in.archive);
    const CompatReport compat = validate_compat(archives);
    if (recipe.policy == KeyPolicy::strict) {
      if (!compat.identical_keys) {
        std::string message = "strict merge needs identical key sets;";
        for (std::size_t i = 0; i < archives.size(); ++i) {
          for (const auto& key : compat.only_in[i]) message += " \"" + key + "\" only in " + plan.ordered[i].label + ";";
        }
        throw ValidationError(message);
      }
      if (!compat.compatible) {
        const ShapeMismatch& m = compat.shape_mismatches.front();
        throw ValidationError("shape mismatch on \"" + m.key + "\" under strict merge");
      }
      plan.keys = compat.shared;
    } else {
      std::set<std::string> mismatched;
      for (const auto& m : compat.shape_mismatches) {
        mismatched.insert(m.key);
        plan.warnings.push_back("dropped \"" + m.key + "\": shapes differ");
      }
      for (std::size_t i = 0; i < archives.size(); ++i) {
        for (const auto& key : compat.only_in[i]) {
          plan.warnings.push_back("dropped \"" + key + "\": only in " + plan.ordered[i].label);
        }
      }
      for (const auto& key : compat.shared) {
        if (!mismatched.contains(key)) plan.keys.push_back(key);
      }
    }
  }
  if (plan.keys.empty()) throw ValidationError("merge produces no tensors: the inputs share no compatible key");

  Json provenance = {{"policy", to_string(recipe.policy)}, {"inputs", Json::array()}};
  for (const MergeInput& in : plan.ordered) provenance["inputs"].push_back({{"label", in.label}, {"weight", in.weight}});
  plan.metadata["roomforge.merge"] = provenance.dump();
  return plan;
}

void merge_key(const MergePlan& plan, const std::string& key, Tensor& out) {
  std::vector<double> acc;
  std::vector<std::int64_t> shape;
  bool first = true;
  for (const MergeInput& in : plan.ordered) {
    if (in.weight == 0.0) continue;
    const Tensor& t = in.archive->tensors.at(key);
    const std::vector<float> values = t.to_f32();
    if (first) {
      shape = t.shape;
      acc.resize(values.size());
      for (std::size_t i = 0; i < values.size(); ++i) acc[i] = in.weight * static_cast<double>(values[i]);
      first = false;
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) acc[i] += in.weight * static_cast<double>(values[i]);
    }
  }
  if (first) {
    // Unreachable while weights sum to one.
    shape = plan.ordered.front().archive->tensors.at(key).shape;
    acc.assign(plan.ordered.front().archive->tensors.at(key).element_count(), 0.0);
  }
  std::vector<float> narrowed(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) narrowed[i] = static_cast<float>(acc[i]);
  out = Tensor::from_f32(std::move(shape), narrowed);
}

MergeResult merge(const MergeRecipe& recipe) {
  const MergePlan plan = prepare_merge(recipe);
  std::vector<Tensor> outputs(plan.keys.size());
  const auto count = static_cast<std::ptrdiff_t>(plan.keys.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) merge_key(plan, plan.keys[i], outputs[i]);

  MergeResult result;
  for (std::size_t i = 0; i < plan.keys.size(); ++i) result.archive.tensors.emplace(plan.keys[i], std::move(outputs[i]));
  result.archive.metadata = plan.metadata;
  result.warnings = plan.warnings;
  return result;
}

}  // namespace roomforge::fusion
