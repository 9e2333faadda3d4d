#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "roomforge/labels.hpp"
#include "roomforge/manifest.hpp"

namespace roomforge::quality {

enum class CompareOp { eq, ne, lt, le, gt, ge };

/// Predicate tree over label keys.
///
/// Grammar (keywords are case-sensitive):
///   expr       := or_expr
///   or_expr    := and_expr ("or" and_expr)*
///   and_expr   := unary ("and" unary)*
///   unary      := "not" unary | "(" expr ")" | comparison
///   comparison := KEY OP literal | KEY "in" "[" literal ("," literal)* "]" | KEY
///   OP         := "==" | "!=" | "<" | "<=" | ">" | ">="
///   literal    := "true" | "false" | NUMBER | "quoted string" | bare_word
/// A bare KEY is shorthand for KEY == true and requires a boolean label.
struct Predicate {
  enum class Kind { compare, member, negate, all_of, any_of };

  Kind kind = Kind::compare;
  std::string key;
  CompareOp op = CompareOp::eq;
  std::vector<LabelValue> operands;  // compare: exactly one; member: the list
  std::vector<Predicate> children;   // negate: one; all_of/any_of: two or more

  /// Throws ValidationError when a referenced key is missing from `labels`.
  bool evaluate(const QualityLabelSet& labels) const;
  void collect_keys(std::set<std::string>& out) const;
  std::size_t depth() const;
};

/// Parses one predicate expression, validating keys and operand types.
/// Throws ParseError (with offset) on syntax errors and ValidationError on
/// unknown keys or type mismatches.
Predicate parse_predicate(std::string_view expr, const LabelSchema& schema);

enum class RuleAction { drop, keep, tag };

std::string_view to_string(RuleAction action);

struct Rule {
  Predicate predicate;
  RuleAction action = RuleAction::drop;
  std::string reason;
  std::string expression;  // source text of the predicate
  std::set<std::string> keys;
};

struct RuleSet {
  int schema_version = 1;
  std::vector<Rule> rules;
};

/// Accepts either the JSON rules file
///   {"schema_version": 1, "rules": [{"if": EXPR, "action": "drop", "reason": "..."}]}
/// or, for quick use, one rule per line: `ACTION if EXPR` (reason defaults to
/// the expression text; '#' starts a comment line).
RuleSet parse_rules(std::string_view config_text, const LabelSchema& schema);

const RuleSet& default_rules();
const RuleSet& strict_rules();

struct FilterVerdict {
  bool keep = true;
  std::vector<std::string> reasons;  // every rule that fired, in rule order
  std::vector<std::string> drop_reasons;  // the subset coming from drop rules
};

/// Ordered semantics: walking rules in order, a firing keep rule seen before
/// any firing drop rule keeps the image; otherwise any firing drop rule drops
/// it. Tag rules only contribute reasons.
FilterVerdict evaluate_image(const QualityLabelSet& labels, const RuleSet& rules);

struct DropReport {
  std::size_t records = 0;  // valid records
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::map<std::string, std::size_t> by_reason;
  std::vector<MalformedLine> malformed;

  Json to_json() const;
};

struct DroppedRecord {
  std::string id;
  std::vector<std::string> reasons;
};

struct FilterResult {
  std::vector<ImageRecord> kept;  // input order
  std::vector<DroppedRecord> dropped;
  DropReport report;

  /// Kept records' original lines, newline terminated.
  std::string kept_jsonl() const;
};

/// Filters a parsed manifest. Rule evaluation runs in parallel; the kept
/// stream preserves input order. Records lacking a label the rules need are
/// reported as malformed and excluded from both streams.
FilterResult filter_manifest(const ManifestParse& manifest, const RuleSet& rules);
FilterResult filter_manifest(std::string_view manifest_text, const RuleSet& rules, const LabelSchema& schema);

}  // namespace roomforge::quality
