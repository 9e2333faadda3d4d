#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "roomforge/labels.hpp"

namespace roomforge {

/// Caption ingredients carried by a manifest record.
struct CaptionParts {
  std::string room;
  std::string style;
  std::vector<std::string> quality_labels;
  std::vector<std::string> furniture;
  std::string natural_text;
};

/// One manifest line. Unknown fields survive through `raw`, which is what
/// filtering writes back out.
struct ImageRecord {
  std::string id;
  int width = 0;
  int height = 0;
  std::optional<QualityLabelSet> labels;
  CaptionParts caption;
  std::optional<std::string> caption_text;  // precomposed "caption" string, if any
  std::string raw;
};

struct MalformedLine {
  std::size_t line_number = 0;
  std::string message;
};

struct ManifestParse {
  std::vector<ImageRecord> records;  // input order
  std::vector<std::size_t> line_numbers;  // parallel to records
  std::vector<MalformedLine> malformed;
};

/// Parses one JSONL record. Throws InputError/ValidationError on bad input.
ImageRecord parse_image_record(std::string_view line, const LabelSchema& schema);

/// Parses a whole manifest. Bad lines (including repeated ids) are skipped and
/// reported; parsing runs in parallel but output order is input order.
ManifestParse parse_manifest(std::string_view text, const LabelSchema& schema);

}  // namespace roomforge
