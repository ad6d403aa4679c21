#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrk/corpus.hpp"
#include "rrk/transformer.hpp"

namespace rrk {

/// RRKIDX1 on-disk layout, little-endian:
///   "RRKIDX1" + u8 version (1)
///   u64 n_docs, u32 l, u32 d_model, u8 dtype (1 = f32)
///   n_docs x (u32 length + UTF-8 doc id), sorted ascending
///   n_docs * l * d_model f32 values, row-major, in doc-id order
///   optional trailer: "RRKMETA" + u32 length + "key=value" lines
inline constexpr char kIndexMagic[7] = {'R', 'R', 'K', 'I', 'D', 'X', '1'};
inline constexpr std::uint8_t kIndexVersion = 1;
inline constexpr std::uint8_t kIndexDtypeF32 = 1;
inline constexpr std::uint64_t kIndexHeaderBytes = 8 + 8 + 4 + 4 + 1;

class EmbeddingIndex {
public:
  EmbeddingIndex() = default;
  EmbeddingIndex(int l, int d_model) : l_(l), d_model_(d_model) {}

  /// Inserts keep the doc-id table sorted. Throws on a duplicate id or a
  /// shape mismatch.
  void add(const std::string& doc_id, const MatrixF& embeddings);

  std::size_t size() const { return ids_.size(); }
  int l() const { return l_; }
  int d_model() const { return d_model_; }
  const std::vector<std::string>& doc_ids() const { return ids_; }
  bool contains(const std::string& doc_id) const { return pos_.count(doc_id) > 0; }

  /// Stored rows (l x d_model, single precision). Throws std::out_of_range.
  std::span<const float> lookup(const std::string& doc_id) const;
  /// Stored rows widened to double for the decoder.
  Matrix lookup_matrix(const std::string& doc_id) const;

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

  bool operator==(const EmbeddingIndex& other) const;

private:
  void rebuild_positions();

  int l_ = 0;
  int d_model_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> payload_;
  std::unordered_map<std::string, std::size_t> pos_;
  std::map<std::string, std::string> metadata_;
};

/// Compresses every document with a frozen compressor. Throws when the
/// compressor is not frozen or doc ids repeat.
EmbeddingIndex build_index(const std::vector<Document>& corpus, const Checkpoint& compressor);

struct IndexSize {
  double payload_bytes = 0;
  double header_bytes = 0;
  double id_table_bytes = 0;
  double total_bytes() const { return payload_bytes + header_bytes + id_table_bytes; }
};

/// Storage model: n_docs * l * d_model * bytes_per_value payload plus the
/// fixed header and a length-prefixed id table of `avg_id_bytes` per doc.
IndexSize index_size(double n_docs, double l, double d_model, double bytes_per_value,
                     double avg_id_bytes = 8);

/// bytes_per_value that makes the payload equal `target_bytes`.
double implied_bytes_per_value(double target_bytes, double n_docs, double l, double d_model);

}  // namespace rrk
