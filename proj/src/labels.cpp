#include "roomforge/labels.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "roomforge/error.hpp"

namespace roomforge {

std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::boolean:
      return "bool";
    case LabelKind::number:
      return "number";
    case LabelKind::category:
      return "category";
  }
  return "?";
}

std::string describe(const LabelValue& value) {
  if (const bool* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  if (const double* d = std::get_if<double>(&value)) {
    std::ostringstream os;
    os << *d;
    return os.str();
  }
  return "\"" + std::get<std::string>(value) + "\"";
}

Json label_value_to_json(const LabelValue& value) {
  return std::visit([](const auto& v) { return Json(v); }, value);
}

namespace {

LabelKind parse_kind(const std::string& text, const std::string& key) {
  if (text == "bool") return LabelKind::boolean;
  if (text == "number") return LabelKind::number;
  if (text == "category") return LabelKind::category;
  throw ValidationError("label " + key + ": unknown kind \"" + text + "\"");
}

}  // namespace

LabelSchema LabelSchema::parse(std::string_view json_text) {
  const Json doc = parse_json_strict(json_text, "label schema");
  LabelSchema schema;
  try {
    for (const Json& group : doc.at("groups")) {
      const auto group_name = group.at("name").get<std::string>();
      if (group_name.empty() || group_name.find('.') != std::string::npos) {
        throw ValidationError("label schema: invalid group name \"" + group_name + "\"");
      }
      for (const auto& existing : schema.groups_) {
        if (existing == group_name) throw ValidationError("label schema: duplicate group " + group_name);
      }
      schema.groups_.push_back(group_name);
      for (const Json& label : group.at("labels")) {
        LabelSpec spec;
        spec.group = group_name;
        spec.key = group_name + "." + label.at("key").get<std::string>();
        spec.kind = parse_kind(label.at("kind").get<std::string>(), spec.key);
        if (spec.kind == LabelKind::number) {
          spec.min = label.value("min", -HUGE_VAL);
          spec.max = label.value("max", HUGE_VAL);
          if (!(spec.min <= spec.max)) throw ValidationError("label " + spec.key + ": min > max");
        }
        if (spec.kind == LabelKind::category) {
          spec.values = label.at("values").get<std::vector<std::string>>();
          if (spec.values.empty()) throw ValidationError("label " + spec.key + ": empty enumeration");
          std::set<std::string> unique(spec.values.begin(), spec.values.end());
          if (unique.size() != spec.values.size()) {
            throw ValidationError("label " + spec.key + ": duplicate category value");
          }
        }
        if (!schema.index_.emplace(spec.key, schema.labels_.size()).second) {
          throw ValidationError("label schema: duplicate key " + spec.key);
        }
        schema.labels_.push_back(std::move(spec));
        LabelSpec& stored = schema.labels_.back();
        if (label.contains("benign")) {
          stored.benign = schema.coerce(stored, label.at("benign"));
        } else if (stored.kind == LabelKind::number) {
          stored.benign = stored.min;
        } else if (stored.kind == LabelKind::category) {
          stored.benign = stored.values.front();
        } else {
          stored.benign = false;
        }
      }
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("label schema: ") + e.what());
  }
  return schema;
}

const LabelSpec* LabelSchema::find(std::string_view key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &labels_[it->second];
}

LabelValue LabelSchema::coerce(const LabelSpec& spec, const Json& value) const {
  switch (spec.kind) {
    case LabelKind::boolean:
      if (!value.is_boolean()) throw ValidationError("label " + spec.key + ": expected bool");
      return value.get<bool>();
    case LabelKind::number: {
      if (!value.is_number()) throw ValidationError("label " + spec.key + ": expected number");
      const double v = value.get<double>();
      if (!std::isfinite(v)) throw ValidationError("label " + spec.key + ": non-finite value");
      if (v < spec.min || v > spec.max) {
        throw ValidationError("label " + spec.key + ": value " + describe(v) + " outside [" + describe(spec.min) +
                              ", " + describe(spec.max) + "]");
      }
      return v;
    }
    case LabelKind::category: {
      if (!value.is_string()) throw ValidationError("label " + spec.key + ": expected category string");
      auto v = value.get<std::string>();
      for (const auto& allowed : spec.values) {
        if (allowed == v) return v;
      }
      throw ValidationError("label " + spec.key + ": \"" + v + "\" is not a known category");
    }
  }
  throw ValidationError("label " + spec.key + ": bad kind");
}

QualityLabelSet parse_label_set(const Json& labels, const LabelSchema& schema) {
  if (!labels.is_object()) throw ValidationError("labels must be an object");
  QualityLabelSet out;
  for (const auto& [key, value] : labels.items()) {
    const LabelSpec* spec = schema.find(key);
    if (spec == nullptr) throw ValidationError("unknown label key \"" + key + "\"");
    out.emplace(key, schema.coerce(*spec, value));
  }
  return out;
}

}  // namespace roomforge
