#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rrk {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

struct Document;

/// Byte-level vocabulary. Ids 0..255 are the raw bytes, followed by the
/// pad, eos and sep specials and then the reserved memory tokens.
class Vocabulary {
public:
  static constexpr TokenId kByteUnits = 256;

  explicit Vocabulary(int n_memory = 8);

  int size() const { return kByteUnits + 3 + static_cast<int>(memory_ids_.size()); }
  TokenId pad_id() const { return kByteUnits; }
  TokenId eos_id() const { return kByteUnits + 1; }
  TokenId sep_id() const { return kByteUnits + 2; }
  const std::vector<TokenId>& memory_token_ids() const { return memory_ids_; }
  int n_memory() const { return static_cast<int>(memory_ids_.size()); }

  bool is_special(TokenId id) const { return id >= kByteUnits; }

  /// Unit string for an id: a one-byte string for byte ids, "<eos>" style
  /// names for specials.
  std::string unit(TokenId id) const;
  TokenId id(std::string_view unit) const;

  const std::map<std::string, TokenId>& token_to_id() const { return token_to_id_; }

  bool operator==(const Vocabulary& other) const = default;

private:
  std::vector<TokenId> memory_ids_;
  std::map<std::string, TokenId> token_to_id_;
};

/// Builds the vocabulary for a collection. Throws on an empty collection.
Vocabulary build_vocab(std::span<const Document> corpus, int n_memory = 8);

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);

/// Inverse of tokenize. Special ids are rejected.
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

/// Tail truncation: keeps the first `budget` tokens.
TokenSeq truncate_tokens(std::span<const TokenId> tokens, std::size_t budget);

}  // namespace rrk
