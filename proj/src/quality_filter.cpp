#include "roomforge/quality_filter.hpp"

#include <algorithm>
#include <optional>

#include "roomforge/error.hpp"

namespace roomforge::quality {

std::string_view to_string(RuleAction action) {
  switch (action) {
    case RuleAction::drop:
      return "drop";
    case RuleAction::keep:
      return "keep";
    case RuleAction::tag:
      return "tag";
  }
  return "?";
}

namespace {

RuleAction parse_action(std::string_view text) {
  if (text == "drop") return RuleAction::drop;
  if (text == "keep") return RuleAction::keep;
  if (text == "tag") return RuleAction::tag;
  throw ValidationError("unknown rule action \"" + std::string(text) + "\"");
}

Rule make_rule(std::string_view expr, RuleAction action, std::string reason, const LabelSchema& schema,
               std::size_t index) {
  Rule rule;
  try {
    rule.predicate = parse_predicate(expr, schema);
  } catch (const ParseError& e) {
    throw ParseError("rule " + std::to_string(index + 1) + ": " + e.what(), e.position());
  } catch (const ValidationError& e) {
    throw ValidationError("rule " + std::to_string(index + 1) + ": " + e.what());
  }
  rule.action = action;
  rule.expression = std::string(expr);
  rule.reason = reason.empty() ? rule.expression : std::move(reason);
  rule.predicate.collect_keys(rule.keys);
  return rule;
}

RuleSet parse_line_rules(std::string_view text, const LabelSchema& schema) {
  RuleSet set;
  for (const JsonLine& line : split_lines(text)) {
    std::string_view s = line.text;
    const auto first = s.find_first_not_of(" \t");
    s.remove_prefix(first);
    if (s.front() == '#') continue;
    const auto space = s.find(' ');
    if (space == std::string_view::npos) throw ParseError("expected `ACTION if EXPR`", first);
    const RuleAction action = parse_action(s.substr(0, space));
    std::string_view rest = s.substr(space + 1);
    rest.remove_prefix(std::min(rest.find_first_not_of(' '), rest.size()));
    if (rest.substr(0, 3) != "if ") {
      throw ParseError("expected 'if' on line " + std::to_string(line.line_number), first + space + 1);
    }
    set.rules.push_back(make_rule(rest.substr(3), action, {}, schema, set.rules.size()));
  }
  return set;
}

}  // namespace

RuleSet parse_rules(std::string_view config_text, const LabelSchema& schema) {
  const auto first = config_text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) throw ParseError("empty rules config", 0);
  if (config_text[first] != '{') return parse_line_rules(config_text, schema);

  Json doc;
  try {
    doc = parse_json_strict(config_text, "rules config");
  } catch (const InputError& e) {
    throw ParseError(e.what(), first);
  }
  RuleSet set;
  try {
    set.schema_version = doc.value("schema_version", 1);
    for (const Json& entry : doc.at("rules")) {
      const auto expr = entry.at("if").get<std::string>();
      const RuleAction action = parse_action(entry.value("action", "drop"));
      set.rules.push_back(make_rule(expr, action, entry.value("reason", ""), schema, set.rules.size()));
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("rules config: ") + e.what());
  }
  return set;
}

FilterVerdict evaluate_image(const QualityLabelSet& labels, const RuleSet& rules) {
  for (const Rule& rule : rules.rules) {
    for (const auto& key : rule.keys) {
      if (!labels.contains(key)) throw ValidationError("missing label \"" + key + "\"");
    }
  }
  FilterVerdict verdict;
  std::optional<RuleAction> decided;
  for (const Rule& rule : rules.rules) {
    if (!rule.predicate.evaluate(labels)) continue;
    verdict.reasons.push_back(rule.reason);
    if (rule.action == RuleAction::drop) verdict.drop_reasons.push_back(rule.reason);
    if (!decided && rule.action != RuleAction::tag) decided = rule.action;
  }
  verdict.keep = !decided || *decided == RuleAction::keep;
  if (decided == RuleAction::keep) verdict.drop_reasons.clear();
  return verdict;
}

Json DropReport::to_json() const {
  Json malformed_json = Json::array();
  for (const auto& m : malformed) malformed_json.push_back({{"line", m.line_number}, {"error", m.message}});
  return Json{{"records", records},
              {"kept", kept},
              {"dropped", dropped},
              {"by_reason", by_reason},
              {"malformed_count", malformed.size()},
              {"malformed", malformed_json}};
}

std::string FilterResult::kept_jsonl() const {
  std::string out;
  for (const auto& record : kept) {
    out += record.raw;
    out += '\n';
  }
  return out;
}

FilterResult filter_manifest(const ManifestParse& manifest, const RuleSet& rules) {
  const auto n = static_cast<std::ptrdiff_t>(manifest.records.size());
  std::vector<std::optional<FilterVerdict>> verdicts(manifest.records.size());
  std::vector<std::string> errors(manifest.records.size());

#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const ImageRecord& record = manifest.records[i];
    if (!record.labels) {
      errors[i] = "record " + record.id + " has no labels";
      continue;
    }
    try {
      verdicts[i] = evaluate_image(*record.labels, rules);
    } catch (const Error& e) {
      errors[i] = "record " + record.id + ": " + e.what();
    }
  }

  FilterResult result;
  result.report.malformed = manifest.malformed;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (!verdicts[i]) {
      result.report.malformed.push_back({manifest.line_numbers[i], errors[i]});
      continue;
    }
    ++result.report.records;
    if (verdicts[i]->keep) {
      result.kept.push_back(manifest.records[i]);
    } else {
      for (const auto& reason : verdicts[i]->drop_reasons) ++result.report.by_reason[reason];
      result.dropped.push_back({manifest.records[i].id, verdicts[i]->reasons});
    }
  }
  std::stable_sort(result.report.malformed.begin(), result.report.malformed.end(),
                   [](const MalformedLine& a, const MalformedLine& b) { return a.line_number < b.line_number; });
  result.report.kept = result.kept.size();
  result.report.dropped = result.dropped.size();
  return result;
}

FilterResult filter_manifest(std::string_view manifest_text, const RuleSet& rules, const LabelSchema& schema) {
  return filter_manifest(parse_manifest(manifest_text, schema), rules);
}

}  // namespace roomforge::quality
