#include "roomforge/error.hpp"
#include "roomforge/reference.hpp"

namespace roomforge::reference {

quality::FilterResult filter_manifest(const ManifestParse& manifest, const quality::RuleSet& rules) {
  quality::FilterResult result;
  result.report.malformed = manifest.malformed;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const ImageRecord& record = manifest.records[i];
    quality::FilterVerdict verdict;
    try {
      if (!record.labels) throw ValidationError("has no labels");
      verdict = quality::evaluate_image(*record.labels, rules);
    } catch (const Error& e) {
      result.report.malformed.push_back({manifest.line_numbers[i], "record " + record.id + ": " + e.what()});
      continue;
    }
    ++result.report.records;
    if (verdict.keep) {
      result.kept.push_back(record);
    } else {
      for (const auto& reason : verdict.drop_reasons) ++result.report.by_reason[reason];
      result.dropped.push_back({record.id, verdict.reasons});
    }
  }
  result.report.kept = result.kept.size();
  result.report.dropped = result.dropped.size();
  return result;
}

}  // namespace roomforge::reference
