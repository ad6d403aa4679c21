#include "rrk/embedding_index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rrk/binary_io.hpp"
#include "rrk/compressor.hpp"

namespace rrk {

void EmbeddingIndex::rebuild_positions() {
  pos_.clear();
  for (std::size_t i = 0; i < ids_.size(); ++i) pos_.emplace(ids_[i], i);
}

void EmbeddingIndex::add(const std::string& doc_id, const MatrixF& embeddings) {
  if (embeddings.rows() != l_ || embeddings.cols() != d_model_) {
    throw std::invalid_argument("index add: expected " + std::to_string(l_) + "x" +
                                std::to_string(d_model_) + " embeddings for " + doc_id);
  }
  if (pos_.count(doc_id)) throw std::invalid_argument("index add: duplicate doc_id " + doc_id);
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), doc_id);
  const std::size_t at = static_cast<std::size_t>(it - ids_.begin());
  const std::size_t block = static_cast<std::size_t>(l_) * d_model_;
  ids_.insert(it, doc_id);
  payload_.insert(payload_.begin() + static_cast<std::ptrdiff_t>(at * block), embeddings.data(),
                  embeddings.data() + block);
  if (at + 1 == ids_.size()) {
    pos_.emplace(doc_id, at);
  } else {
    rebuild_positions();
  }
}

std::span<const float> EmbeddingIndex::lookup(const std::string& doc_id) const {
  auto it = pos_.find(doc_id);
  if (it == pos_.end()) throw std::out_of_range("index has no document " + doc_id);
  const std::size_t block = static_cast<std::size_t>(l_) * d_model_;
  return {payload_.data() + it->second * block, block};
}

Matrix EmbeddingIndex::lookup_matrix(const std::string& doc_id) const {
  const auto rows = lookup(doc_id);
  Matrix m(l_, d_model_);
  for (std::size_t i = 0; i < rows.size(); ++i) m.data()[i] = static_cast<double>(rows[i]);
  return m;
}

bool EmbeddingIndex::operator==(const EmbeddingIndex& other) const {
  return l_ == other.l_ && d_model_ == other.d_model_ && ids_ == other.ids_ &&
         metadata_ == other.metadata_ && payload_.size() == other.payload_.size() &&
         std::memcmp(payload_.data(), other.payload_.data(), payload_.size() * sizeof(float)) == 0;
}

namespace {
constexpr char kMetaMagic[7] = {'R', 'R', 'K', 'M', 'E', 'T', 'A'};
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kIndexMagic, sizeof(kIndexMagic));
  binio::write_le<std::uint8_t>(out, kIndexVersion);
  binio::write_le<std::uint64_t>(out, ids_.size());
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l_));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d_model_));
  binio::write_le<std::uint8_t>(out, kIndexDtypeF32);
  for (const auto& id : ids_) binio::write_string(out, id);
  for (float v : payload_) binio::write_le<float>(out, v);
  if (!metadata_.empty()) {
    std::string text;
    for (const auto& [k, v] : metadata_) text += k + "=" + v + "\n";
    out.write(kMetaMagic, sizeof(kMetaMagic));
    binio::write_string(out, text);
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[7];
  if (!in.read(magic, 7) || std::memcmp(magic, kIndexMagic, 7) != 0) {
    throw std::runtime_error(path.string() + ": not an RRKIDX1 index");
  }
  const auto version = binio::read_le<std::uint8_t>(in);
  if (version != kIndexVersion) {
    throw std::runtime_error(path.string() + ": unsupported index version " + std::to_string(version));
  }
  const auto n = binio::read_le<std::uint64_t>(in);
  const auto l = binio::read_le<std::uint32_t>(in);
  const auto d = binio::read_le<std::uint32_t>(in);
  const auto dtype = binio::read_le<std::uint8_t>(in);
  if (dtype != kIndexDtypeF32) throw std::runtime_error(path.string() + ": unsupported dtype");
  if (l == 0 || d == 0 || l > (1u << 16) || d > (1u << 20)) {
    throw std::runtime_error(path.string() + ": implausible index shape");
  }
  EmbeddingIndex idx(static_cast<int>(l), static_cast<int>(d));
  idx.ids_.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    idx.ids_.push_back(binio::read_string(in, 1u << 16));
    if (i > 0 && !(idx.ids_[i - 1] < idx.ids_[i])) {
      throw std::runtime_error(path.string() + ": doc-id table not strictly sorted");
    }
  }
  const std::size_t count = n * static_cast<std::size_t>(l) * d;
  idx.payload_.resize(count);
  for (std::size_t i = 0; i < count; ++i) idx.payload_[i] = binio::read_le<float>(in);
  char meta[7];
  if (in.read(meta, 7)) {
    if (std::memcmp(meta, kMetaMagic, 7) != 0) {
      throw std::runtime_error(path.string() + ": trailing bytes after payload");
    }
    std::istringstream text(binio::read_string(in));
    std::string line;
    while (std::getline(text, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) idx.metadata_[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  idx.rebuild_positions();
  return idx;
}

EmbeddingIndex build_index(const std::vector<Document>& corpus, const Checkpoint& compressor) {
  if (!compressor.frozen()) throw std::invalid_argument("build_index: compressor is not frozen");
  std::set<std::string> seen;
  std::vector<const Document*> order;
  for (const auto& d : corpus) {
    if (!seen.insert(d.doc_id).second) {
      throw std::invalid_argument("build_index: duplicate doc_id " + d.doc_id);
    }
    order.push_back(&d);
  }
  std::sort(order.begin(), order.end(),
            [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });
  EmbeddingIndex idx(compressor.config.l_memory, compressor.config.d_model);
  for (const Document* d : order) {
    const CompressedDoc c = compress(*d, compressor);
    idx.add(d->doc_id, c.embeddings.cast<float>());
  }
  return idx;
}

IndexSize index_size(double n_docs, double l, double d_model, double bytes_per_value,
                     double avg_id_bytes) {
  IndexSize s;
  s.payload_bytes = n_docs * l * d_model * bytes_per_value;
  s.header_bytes = static_cast<double>(kIndexHeaderBytes);
  s.id_table_bytes = n_docs * (4.0 + avg_id_bytes);
  return s;
}

double implied_bytes_per_value(double target_bytes, double n_docs, double l, double d_model) {
  return target_bytes / (n_docs * l * d_model);
}

}  // namespace rrk
