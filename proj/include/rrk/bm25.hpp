#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rrk/corpus.hpp"
#include "rrk/trec.hpp"

namespace rrk {

/// Lowercased terms split on ASCII whitespace and punctuation. Bytes >= 0x80
/// count as term characters so UTF-8 words stay intact.
std::vector<std::string> analyze(std::string_view text);

struct Posting {
  std::uint32_t doc = 0;  // position in the sorted doc-id table
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

class InvertedIndex {
public:
  InvertedIndex(const std::vector<Document>& corpus, Bm25Params params = {});

  std::size_t n_docs() const { return doc_ids_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  /// Doc-id table position, or -1.
  long find(const std::string& doc_id) const;
  std::uint32_t doc_length(std::size_t doc) const { return doc_len_[doc]; }
  double avg_doc_length() const { return avgdl_; }
  std::size_t df(const std::string& term) const { return postings(term).size(); }
  /// Empty for terms absent from the collection.
  const std::vector<Posting>& postings(const std::string& term) const;
  const Bm25Params& params() const { return params_; }

  /// ln((N - df + 0.5) / (df + 0.5) + 1)
  double idf(std::size_t df) const;

  /// BM25 over the unique query terms.
  double score(std::string_view query, std::size_t doc) const;
  double score(std::string_view query, const std::string& doc_id) const;

  /// Top-k matching documents, score descending, ties by doc_id ascending.
  RankedList retrieve_topk(std::string_view query, std::size_t k = 50) const;

private:
  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, std::uint32_t> doc_lookup_;
  std::vector<std::uint32_t> doc_len_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  // Per-term tf by document for direct scoring.
  std::vector<std::unordered_map<std::string, std::uint32_t>> doc_tf_;
};

/// First-stage run over a query set, tag "first-stage".
Run retrieve_run(const InvertedIndex& index, const std::vector<Query>& queries, std::size_t k = 50);

}  // namespace rrk
