#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "roomforge/json_util.hpp"
#include "roomforge/manifest.hpp"

namespace roomforge::captioning {

/// Joins room, style, quality labels, furniture and natural text with ", ",
/// skipping empty (or all-whitespace) components. The result is trimmed.
std::string compose_caption(const CaptionParts& parts);

inline constexpr std::string_view kStartOfText = "<|startoftext|>";
inline constexpr std::string_view kEndOfText = "<|endoftext|>";
inline constexpr std::size_t kContextLength = 77;

/// Byte-level BPE vocabulary in the layout of the public CLIP tokenizer:
/// a token -> id JSON object plus a merges file ("#version" header line,
/// then one "left right" pair per line, lowest rank first).
class BpeVocabulary {
 public:
  /// Throws InputError on malformed text and ValidationError on duplicate
  /// tokens, non-dense ids, merges over unknown symbols or missing specials.
  static BpeVocabulary load(std::string_view vocab_json, std::string_view merges_text,
                            std::size_t context_length = kContextLength);
  static BpeVocabulary load_files(const std::string& vocab_path, const std::string& merges_path);

  std::size_t size() const { return tokens_.size(); }
  std::size_t merge_count() const { return merge_count_; }
  std::size_t context_length() const { return context_length_; }
  int start_id() const { return start_id_; }
  int end_id() const { return end_id_; }

  std::optional<int> id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  /// Rank of merging (left, right); lower merges first.
  std::optional<int> merge_rank(std::string_view left, std::string_view right) const;
  /// Comma or period tokens, the preferred chunk boundaries.
  bool is_separator(int id) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::unordered_map<std::string, int> ranks_;  // "left right" -> rank
  std::vector<bool> separator_;
  std::size_t merge_count_ = 0;
  std::size_t context_length_ = kContextLength;
  int start_id_ = -1;
  int end_id_ = -1;
};

/// Collapses runs of Unicode whitespace to one space, trims, and lowercases
/// with full Unicode case mapping. Throws InputError on invalid UTF-8.
std::string normalize_caption(std::string_view text);

/// One content token and the byte range of `normalized` it came from.
struct Token {
  int id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Tokenizes already-normalized text, recording byte spans. Pre-splitting
/// follows the CLIP pattern (special tokens, English contractions, letter
/// runs, single digits, runs of other non-space symbols); each piece is
/// byte-mapped and merged by lowest BPE rank with an end-of-word marker.
std::vector<Token> tokenize_normalized(const BpeVocabulary& vocab, std::string_view normalized);

/// Content token ids (no specials) for raw caption text.
std::vector<int> tokenize(const BpeVocabulary& vocab, std::string_view text);

/// Parallel tokenize over many captions; output order matches input.
std::vector<std::vector<int>> tokenize_batch(const BpeVocabulary& vocab, std::span<const std::string> texts);

struct Chunk {
  std::vector<int> ids;  // start + content + end
  std::size_t begin = 0;  // byte span in ChunkPlan::normalized
  std::size_t end = 0;
};

struct ChunkPlan {
  std::string normalized;
  std::vector<Chunk> chunks;
  std::size_t content_tokens = 0;

  Json to_json() const;
};

struct ChunkOptions {
  std::size_t lookback = 20;    // separator search window at the end of a full chunk
  bool hard_split_only = false;  // always cut at exactly max content tokens
};

/// Splits a caption into chunks of at most context_length - 2 content tokens,
/// each framed by start/end ids. A full window is cut after the last comma or
/// period within its final `lookback` tokens, else hard-cut at the limit.
/// Spans partition the normalized caption: each chunk runs from its first
/// token to the next chunk's first token (the first from 0, the last to the
/// end). An empty caption yields one chunk holding only the two specials.
ChunkPlan chunk_caption(const BpeVocabulary& vocab, std::string_view text, ChunkOptions options = {});

}  // namespace roomforge::captioning
