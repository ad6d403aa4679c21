#include "rrk/tokenizer.hpp"

#include <stdexcept>

#include "rrk/corpus.hpp"

namespace rrk {

Vocabulary::Vocabulary(int n_memory) {
  if (n_memory < 1) {
    throw std::invalid_argument("vocabulary needs at least one memory token");
  }
  for (int b = 0; b < kByteUnits; ++b) {
    token_to_id_.emplace(std::string(1, static_cast<char>(b)), b);
  }
  token_to_id_.emplace("<pad>", pad_id());
  token_to_id_.emplace("<eos>", eos_id());
  token_to_id_.emplace("<sep>", sep_id());
  for (int s = 0; s < n_memory; ++s) {
    const TokenId id = kByteUnits + 3 + s;
    memory_ids_.push_back(id);
    token_to_id_.emplace("<mem" + std::to_string(s) + ">", id);
  }
}

std::string Vocabulary::unit(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  if (id < kByteUnits) return std::string(1, static_cast<char>(id));
  if (id == pad_id()) return "<pad>";
  if (id == eos_id()) return "<eos>";
  if (id == sep_id()) return "<sep>";
  return "<mem" + std::to_string(id - kByteUnits - 3) + ">";
}

TokenId Vocabulary::id(std::string_view unit) const {
  auto it = token_to_id_.find(std::string(unit));
  if (it == token_to_id_.end()) {
    throw std::out_of_range("unknown vocabulary unit");
  }
  return it->second;
}

Vocabulary build_vocab(std::span<const Document> corpus, int n_memory) {
  if (corpus.empty()) {
    throw std::invalid_argument("build_vocab: empty corpus");
  }
  // Byte-level units cover every input, so the collection only gates the call.
  return Vocabulary(n_memory);
}

TokenSeq tokenize(std::string_view text, const Vocabulary&) {
  TokenSeq out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
  return out;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || t >= Vocabulary::kByteUnits) {
      throw std::invalid_argument("detokenize: special id " + vocab.unit(t) + " in sequence");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

TokenSeq truncate_tokens(std::span<const TokenId> tokens, std::size_t budget) {
  const std::size_t n = std::min(tokens.size(), budget);
  return TokenSeq(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace rrk
