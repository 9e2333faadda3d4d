#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "roomforge/json_util.hpp"

namespace roomforge {

/// Value of one quality label: a flag, a measurement or a category name.
using LabelValue = std::variant<bool, double, std::string>;

enum class LabelKind { boolean, number, category };

std::string_view to_string(LabelKind kind);
std::string describe(const LabelValue& value);

struct LabelSpec {
  std::string key;    // dotted path, "group.label"
  std::string group;  // primary group name
  LabelKind kind = LabelKind::boolean;
  double min = 0.0;   // number kind only
  double max = 0.0;
  std::vector<std::string> values;  // category kind only
  LabelValue benign;                // value under which no default rule fires
};

/// The quality labeling system: primary groups, each owning secondary labels.
/// The default schema ships 5 groups and 19 labels (data/quality_schema.json).
class LabelSchema {
 public:
  /// Throws ValidationError on duplicate keys or inconsistent label specs.
  static LabelSchema parse(std::string_view json_text);
  static const LabelSchema& default_schema();

  const LabelSpec* find(std::string_view key) const;
  const std::vector<std::string>& groups() const { return groups_; }
  const std::vector<LabelSpec>& labels() const { return labels_; }

  /// Converts a JSON value to a LabelValue for `spec`, checking kind, range
  /// and enumeration membership. Throws ValidationError.
  LabelValue coerce(const LabelSpec& spec, const Json& value) const;

 private:
  std::vector<std::string> groups_;
  std::vector<LabelSpec> labels_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Per-image label values keyed by dotted path.
using QualityLabelSet = std::map<std::string, LabelValue, std::less<>>;

/// Parses a flat {"group.label": value} object against the schema.
QualityLabelSet parse_label_set(const Json& labels, const LabelSchema& schema);

Json label_value_to_json(const LabelValue& value);

}  // namespace roomforge
