#include "roomforge/manifest.hpp"

#include <unordered_set>

#include "roomforge/error.hpp"

namespace roomforge {

namespace {

std::vector<std::string> string_list(const Json& obj, const char* field) {
  if (!obj.contains(field)) return {};
  return obj.at(field).get<std::vector<std::string>>();
}

}  // namespace

ImageRecord parse_image_record(std::string_view line, const LabelSchema& schema) {
  Json doc = parse_json_strict(line, "manifest record");
  if (!doc.is_object()) throw InputError("manifest record is not an object");
  ImageRecord record;
  try {
    const Json& id = doc.at("id");
    record.id = id.is_string() ? id.get<std::string>() : id.dump();
    if (record.id.empty()) throw ValidationError("empty id");
    record.width = doc.at("width").get<int>();
    record.height = doc.at("height").get<int>();
    if (record.width <= 0 || record.height <= 0) {
      throw ValidationError("non-positive dimensions for " + record.id);
    }
    if (doc.contains("labels")) record.labels = parse_label_set(doc.at("labels"), schema);
    if (auto it = doc.find("caption"); it != doc.end()) {
      if (it->is_string()) {
        record.caption_text = it->get<std::string>();
      } else {
        const Json& c = *it;
        record.caption.room = c.value("room", "");
        record.caption.style = c.value("style", "");
        record.caption.quality_labels = string_list(c, "quality_labels");
        record.caption.furniture = string_list(c, "furniture");
        record.caption.natural_text = c.value("natural_text", "");
        if (c.contains("text")) record.caption_text = c.at("text").get<std::string>();
      }
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("manifest record: ") + e.what());
  }
  record.raw = std::string(line);
  return record;
}

ManifestParse parse_manifest(std::string_view text, const LabelSchema& schema) {
  const std::vector<JsonLine> lines = split_lines(text);
  const auto n = static_cast<std::ptrdiff_t>(lines.size());
  std::vector<std::optional<ImageRecord>> parsed(lines.size());
  std::vector<std::string> errors(lines.size());

#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      parsed[i] = parse_image_record(lines[i].text, schema);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }

  ManifestParse out;
  out.records.reserve(lines.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!parsed[i]) {
      out.malformed.push_back({lines[i].line_number, errors[i]});
      continue;
    }
    if (!seen.insert(parsed[i]->id).second) {
      out.malformed.push_back({lines[i].line_number, "duplicate id " + parsed[i]->id});
      continue;
    }
    out.records.push_back(std::move(*parsed[i]));
    out.line_numbers.push_back(lines[i].line_number);
  }
  return out;
}

}  // namespace roomforge
