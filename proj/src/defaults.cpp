#include <string_view>

#include "roomforge/labels.hpp"
#include "roomforge/metrics.hpp"
#include "roomforge/quality_filter.hpp"

namespace roomforge {

namespace {
#include "embedded_defaults.inc"
}  // namespace

const LabelSchema& LabelSchema::default_schema() {
  static const LabelSchema schema = LabelSchema::parse(kDefaultQualitySchema);
  return schema;
}

namespace quality {

const RuleSet& default_rules() {
  static const RuleSet rules = parse_rules(kDefaultRules, LabelSchema::default_schema());
  return rules;
}

const RuleSet& strict_rules() {
  static const RuleSet rules = parse_rules(kStrictRules, LabelSchema::default_schema());
  return rules;
}

}  // namespace quality

namespace metrics {

const Vocabularies& Vocabularies::defaults() {
  static const Vocabularies vocab = Vocabularies::parse(kDefaultMetricsVocab);
  return vocab;
}

}  // namespace metrics

}  // namespace roomforge
