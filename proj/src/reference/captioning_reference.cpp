#include "roomforge/reference.hpp"

namespace roomforge::reference {

std::vector<std::vector<int>> tokenize_batch(const captioning::BpeVocabulary& vocab, std::span<const std::string> texts) {
  std::vector<std::vector<int>> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) out.push_back(captioning::tokenize(vocab, text));
  return out;
}

}  // namespace roomforge::reference
