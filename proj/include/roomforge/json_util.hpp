#pragma once

#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace roomforge {

using Json = nlohmann::json;

/// Parses JSON text and rejects objects that repeat a key. nlohmann silently
/// keeps the last duplicate, which hides corrupt vocabularies and headers.
/// Throws InputError on malformed text or duplicate keys.
Json parse_json_strict(std::string_view text, std::string_view what);

/// One line of a JSONL stream.
struct JsonLine {
  std::size_t line_number = 0;  // 1-based
  std::string text;
};

/// Splits text into non-blank lines, keeping 1-based line numbers.
std::vector<JsonLine> split_lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Compact, key-sorted serialization used for every file we emit.
std::string dump_canonical(const Json& value);

}  // namespace roomforge
