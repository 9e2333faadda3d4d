#include "roomforge/captioning.hpp"

#include <algorithm>

#include "roomforge/error.hpp"
#include "unicode.hpp"

namespace roomforge::captioning {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

constexpr char32_t kCapitalSigma = 0x03A3;
constexpr char32_t kSmallSigma = 0x03C3;
constexpr char32_t kFinalSigma = 0x03C2;

// Capital sigma lowercases to final sigma after a cased letter and not
// before one, skipping case-ignorable characters on both sides.
bool is_final_sigma(const std::vector<char32_t>& cps, std::size_t i) {
  std::size_t j = i;
  while (j > 0 && unicode::is_case_ignorable(cps[j - 1])) --j;
  if (j == 0 || !unicode::is_cased(cps[j - 1])) return false;
  std::size_t k = i + 1;
  while (k < cps.size() && unicode::is_case_ignorable(cps[k])) ++k;
  return k == cps.size() || !unicode::is_cased(cps[k]);
}

}  // namespace

std::string compose_caption(const CaptionParts& parts) {
  std::vector<std::string_view> fields;
  auto add = [&](std::string_view s) {
    s = trim(s);
    if (!s.empty()) fields.push_back(s);
  };
  add(parts.room);
  add(parts.style);
  for (const auto& q : parts.quality_labels) add(q);
  for (const auto& f : parts.furniture) add(f);
  add(parts.natural_text);

  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ", ";
    out += fields[i];
  }
  return out;
}

std::string normalize_caption(std::string_view text) {
  std::vector<unicode::Decoded> decoded;
  if (!unicode::decode_utf8(text, decoded)) throw InputError("caption is not valid UTF-8");

  // Whitespace runs -> single space, trimmed.
  std::vector<char32_t> collapsed;
  collapsed.reserve(decoded.size());
  bool pending_space = false;
  for (const auto& d : decoded) {
    if (unicode::is_space(d.cp)) {
      pending_space = !collapsed.empty();
      continue;
    }
    if (pending_space) collapsed.push_back(U' ');
    pending_space = false;
    collapsed.push_back(d.cp);
  }

  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < collapsed.size(); ++i) {
    const char32_t cp = collapsed[i];
    if (cp == kCapitalSigma) {
      unicode::append_utf8(out, is_final_sigma(collapsed, i) ? kFinalSigma : kSmallSigma);
    } else if (const auto* m = unicode::lower_mapping(cp)) {
      for (int k = 0; k < m->length; ++k) unicode::append_utf8(out, m->lower[k]);
    } else {
      unicode::append_utf8(out, cp);
    }
  }
  return out;
}

ChunkPlan chunk_caption(const BpeVocabulary& vocab, std::string_view text, ChunkOptions options) {
  ChunkPlan plan;
  plan.normalized = normalize_caption(text);
  const std::vector<Token> tokens = tokenize_normalized(vocab, plan.normalized);
  plan.content_tokens = tokens.size();

  const std::size_t limit = vocab.context_length() - 2;
  std::vector<std::size_t> starts;  // first token index of each chunk
  for (std::size_t pos = 0; pos < tokens.size();) {
    starts.push_back(pos);
    if (tokens.size() - pos <= limit) break;
    std::size_t cut = pos + limit;
    if (!options.hard_split_only) {
      const std::size_t window_begin = pos + limit - std::min(options.lookback, limit);
      for (std::size_t j = pos + limit; j > window_begin; --j) {
        if (vocab.is_separator(tokens[j - 1].id)) {
          cut = j;
          break;
        }
      }
    }
    pos = cut;
  }

  if (starts.empty()) {
    plan.chunks.push_back({{vocab.start_id(), vocab.end_id()}, 0, plan.normalized.size()});
    return plan;
  }
  for (std::size_t c = 0; c < starts.size(); ++c) {
    const std::size_t first = starts[c];
    const std::size_t last = c + 1 < starts.size() ? starts[c + 1] : tokens.size();
    Chunk chunk;
    chunk.ids.reserve(last - first + 2);
    chunk.ids.push_back(vocab.start_id());
    for (std::size_t t = first; t < last; ++t) chunk.ids.push_back(tokens[t].id);
    chunk.ids.push_back(vocab.end_id());
    chunk.begin = c == 0 ? 0 : tokens[first].begin;
    chunk.end = c + 1 < starts.size() ? tokens[last].begin : plan.normalized.size();
    plan.chunks.push_back(std::move(chunk));
  }
  return plan;
}

Json ChunkPlan::to_json() const {
  Json chunk_list = Json::array();
  for (const Chunk& c : chunks) {
    chunk_list.push_back({{"ids", c.ids}, {"span", {c.begin, c.end}}});
  }
  return Json{{"normalized", normalized}, {"content_tokens", content_tokens}, {"chunks", chunk_list}};
}

}  // namespace roomforge::captioning
