#include <array>
#include <climits>

#include "roomforge/captioning.hpp"
#include "roomforge/error.hpp"
#include "unicode.hpp"

namespace roomforge::captioning {

namespace {

constexpr std::string_view kEndOfWord = "</w>";

// GPT-2/CLIP reversible byte -> printable code point table.
const std::array<std::string, 256>& byte_symbols() {
  static const std::array<std::string, 256> table = [] {
    std::array<char32_t, 256> cps{};
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) cps[b] = direct[b] ? static_cast<char32_t>(b) : next++;
    std::array<std::string, 256> out;
    for (int b = 0; b < 256; ++b) unicode::append_utf8(out[b], cps[b]);
    return out;
  }();
  return table;
}

std::string merge_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left).push_back(' ');
  key.append(right);
  return key;
}

struct Symbol {
  std::string text;
  std::size_t bytes;  // source bytes covered
};

// Greedy lowest-rank merging over one pre-token.
std::vector<Symbol> bpe_word(const BpeVocabulary& vocab, std::string_view piece) {
  const auto& symbols = byte_symbols();
  std::vector<Symbol> word;
  word.reserve(piece.size());
  for (unsigned char b : piece) word.push_back({symbols[b], 1});
  word.back().text.append(kEndOfWord);

  while (word.size() > 1) {
    int best_rank = INT_MAX;
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
      if (auto rank = vocab.merge_rank(word[i].text, word[i + 1].text); rank && *rank < best_rank) {
        best_rank = *rank;
        best_at = i;
      }
    }
    if (best_rank == INT_MAX) break;
    const std::string first = word[best_at].text;
    const std::string second = word[best_at + 1].text;
    std::vector<Symbol> merged;
    merged.reserve(word.size());
    for (std::size_t i = 0; i < word.size();) {
      if (i + 1 < word.size() && word[i].text == first && word[i + 1].text == second) {
        merged.push_back({first + second, word[i].bytes + word[i + 1].bytes});
        i += 2;
      } else {
        merged.push_back(std::move(word[i]));
        ++i;
      }
    }
    word = std::move(merged);
  }
  return word;
}

bool starts_with_at(const std::vector<unicode::Decoded>& cps, std::size_t i, std::string_view literal) {
  if (i + literal.size() > cps.size()) return false;
  for (std::size_t k = 0; k < literal.size(); ++k) {
    if (cps[i + k].cp != static_cast<unsigned char>(literal[k])) return false;
  }
  return true;
}

// Case-insensitive ASCII letter match; U+017F (long s) folds to 's'.
bool letter_is(char32_t cp, char lower) {
  if (cp == static_cast<char32_t>(lower) || cp == static_cast<char32_t>(lower - 'a' + 'A')) return true;
  return lower == 's' && cp == 0x017F;
}

// Length in code points of a contraction ('s 't 're 've 'm 'll 'd) at i, or 0.
std::size_t contraction_at(const std::vector<unicode::Decoded>& cps, std::size_t i) {
  if (cps[i].cp != U'\'' || i + 1 >= cps.size()) return 0;
  const char32_t a = cps[i + 1].cp;
  if (letter_is(a, 's') || letter_is(a, 't') || letter_is(a, 'm') || letter_is(a, 'd')) return 2;
  if (i + 2 < cps.size()) {
    const char32_t b = cps[i + 2].cp;
    if ((letter_is(a, 'r') || letter_is(a, 'v')) && letter_is(b, 'e')) return 3;
    if (letter_is(a, 'l') && letter_is(b, 'l')) return 3;
  }
  return 0;
}

}  // namespace

BpeVocabulary BpeVocabulary::load(std::string_view vocab_json, std::string_view merges_text,
                                  std::size_t context_length) {
  if (context_length < 3) throw ValidationError("context length must leave room for content tokens");
  const Json doc = parse_json_strict(vocab_json, "vocabulary");
  if (!doc.is_object() || doc.empty()) throw InputError("vocabulary must be a non-empty JSON object");

  BpeVocabulary vocab;
  vocab.context_length_ = context_length;
  vocab.tokens_.resize(doc.size());
  std::vector<bool> seen(doc.size(), false);
  for (const auto& [token, value] : doc.items()) {
    if (!value.is_number_integer()) throw InputError("vocabulary id for \"" + token + "\" is not an integer");
    const auto id = value.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= doc.size()) {
      throw ValidationError("vocabulary ids are not dense: \"" + token + "\" -> " + std::to_string(id));
    }
    if (seen[id]) throw ValidationError("vocabulary id " + std::to_string(id) + " used twice");
    seen[id] = true;
    vocab.tokens_[id] = token;
    vocab.ids_.emplace(token, static_cast<int>(id));
  }

  const auto start = vocab.id(kStartOfText);
  const auto end = vocab.id(kEndOfText);
  if (!start || !end) throw ValidationError("vocabulary lacks <|startoftext|> or <|endoftext|>");
  vocab.start_id_ = *start;
  vocab.end_id_ = *end;

  const std::vector<JsonLine> lines = split_lines(merges_text);
  if (lines.empty() || lines.front().line_number != 1 || lines.front().text.front() != '#') {
    throw InputError("merges file must start with a '#' header line");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i].text;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw InputError("merges line " + std::to_string(lines[i].line_number) + ": expected two symbols");
    }
    const std::string left = line.substr(0, space);
    const std::string right = line.substr(space + 1);
    for (const std::string& part : {left, right, left + right}) {
      if (!vocab.ids_.contains(part)) {
        throw ValidationError("merges line " + std::to_string(lines[i].line_number) + ": unknown symbol \"" +
                              part + "\"");
      }
    }
    vocab.ranks_.emplace(merge_key(left, right), static_cast<int>(vocab.merge_count_));
    ++vocab.merge_count_;
  }

  vocab.separator_.assign(vocab.tokens_.size(), false);
  for (std::string_view sep : {",", ".", ",</w>", ".</w>"}) {
    if (auto id = vocab.id(sep)) vocab.separator_[*id] = true;
  }
  return vocab;
}

BpeVocabulary BpeVocabulary::load_files(const std::string& vocab_path, const std::string& merges_path) {
  return load(read_file(vocab_path), read_file(merges_path));
}

std::optional<int> BpeVocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> BpeVocabulary::merge_rank(std::string_view left, std::string_view right) const {
  auto it = ranks_.find(merge_key(left, right));
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

bool BpeVocabulary::is_separator(int id) const {
  return id >= 0 && static_cast<std::size_t>(id) < separator_.size() && separator_[id];
}

std::vector<Token> tokenize_normalized(const BpeVocabulary& vocab, std::string_view normalized) {
  std::vector<unicode::Decoded> cps;
  if (!unicode::decode_utf8(normalized, cps)) throw InputError("caption is not valid UTF-8");
  auto byte_at = [&](std::size_t i) { return i < cps.size() ? cps[i].offset : normalized.size(); };

  std::vector<Token> out;
  auto emit_piece = [&](std::size_t from, std::size_t to) {
    const std::size_t begin = byte_at(from);
    const std::string_view piece = normalized.substr(begin, byte_at(to) - begin);
    std::size_t offset = begin;
    for (const Symbol& s : bpe_word(vocab, piece)) {
      const auto id = vocab.id(s.text);
      if (!id) throw ValidationError("token \"" + s.text + "\" missing from vocabulary");
      out.push_back({*id, offset, offset + s.bytes});
      offset += s.bytes;
    }
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    bool special = false;
    for (std::string_view literal : {kStartOfText, kEndOfText}) {
      if (starts_with_at(cps, i, literal)) {
        const std::size_t begin = byte_at(i);
        out.push_back({literal == kStartOfText ? vocab.start_id() : vocab.end_id(), begin, begin + literal.size()});
        i += literal.size();
        special = true;
        break;
      }
    }
    if (special) continue;
    if (const std::size_t n = contraction_at(cps, i)) {
      emit_piece(i, i + n);
      i += n;
      continue;
    }
    const char32_t cp = cps[i].cp;
    std::size_t j = i + 1;
    if (unicode::is_letter(cp)) {
      while (j < cps.size() && unicode::is_letter(cps[j].cp)) ++j;
    } else if (unicode::is_number(cp)) {
      // single code point
    } else if (unicode::is_other(cp)) {
      while (j < cps.size() && unicode::is_other(cps[j].cp)) ++j;
    } else {
      ++i;  // whitespace: not part of any piece
      continue;
    }
    emit_piece(i, j);
    i = j;
  }
  return out;
}

std::vector<int> tokenize(const BpeVocabulary& vocab, std::string_view text) {
  const std::string normalized = normalize_caption(text);
  std::vector<int> ids;
  for (const Token& t : tokenize_normalized(vocab, normalized)) ids.push_back(t.id);
  return ids;
}

std::vector<std::vector<int>> tokenize_batch(const BpeVocabulary& vocab, std::span<const std::string> texts) {
  std::vector<std::vector<int>> out(texts.size());
  std::vector<std::string> errors(texts.size());
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = tokenize(vocab, texts[i]);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw InputError("caption " + std::to_string(i) + ": " + errors[i]);
  }
  return out;
}

}  // namespace roomforge::captioning
