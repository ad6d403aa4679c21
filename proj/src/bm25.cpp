#include "rrk/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace rrk {

std::vector<std::string> analyze(std::string_view text) {
  std::vector<std::string> terms;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                      (c >= 'A' && c <= 'Z');
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      terms.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) terms.push_back(std::move(cur));
  return terms;
}

InvertedIndex::InvertedIndex(const std::vector<Document>& corpus, Bm25Params params)
    : params_(params) {
  if (corpus.empty()) throw std::invalid_argument("build_inverted_index: empty corpus");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return corpus[a].doc_id < corpus[b].doc_id; });
  std::uint64_t total = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Document& d = corpus[order[pos]];
    if (!doc_lookup_.emplace(d.doc_id, static_cast<std::uint32_t>(pos)).second) {
      throw std::invalid_argument("build_inverted_index: duplicate doc_id " + d.doc_id);
    }
    doc_ids_.push_back(d.doc_id);
    const auto terms = analyze(d.text);
    doc_len_.push_back(static_cast<std::uint32_t>(terms.size()));
    total += terms.size();
    auto& tf = doc_tf_.emplace_back();
    for (const auto& t : terms) ++tf[t];
    // Doc positions increase monotonically, so postings stay sorted.
    std::vector<std::pair<std::string, std::uint32_t>> sorted(tf.begin(), tf.end());
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [t, f] : sorted) postings_[t].push_back({static_cast<std::uint32_t>(pos), f});
  }
  avgdl_ = static_cast<double>(total) / static_cast<double>(doc_ids_.size());
}

long InvertedIndex::find(const std::string& doc_id) const {
  auto it = doc_lookup_.find(doc_id);
  return it == doc_lookup_.end() ? -1 : static_cast<long>(it->second);
}

const std::vector<Posting>& InvertedIndex::postings(const std::string& term) const {
  static const std::vector<Posting> kEmpty;
  auto it = postings_.find(term);
  return it == postings_.end() ? kEmpty : it->second;
}

double InvertedIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(n_docs());
  const double f = static_cast<double>(df);
  return std::log((n - f + 0.5) / (f + 0.5) + 1.0);
}

namespace {

std::vector<std::string> unique_terms(std::string_view query) {
  auto terms = analyze(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

double term_weight(double tf, double dl, double avgdl, const Bm25Params& p) {
  return tf / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl));
}

}  // namespace

double InvertedIndex::score(std::string_view query, std::size_t doc) const {
  double s = 0.0;
  const auto& tf = doc_tf_.at(doc);
  for (const auto& t : unique_terms(query)) {
    auto it = tf.find(t);
    if (it == tf.end()) continue;
    s += idf(df(t)) * term_weight(it->second, doc_len_[doc], avgdl_, params_);
  }
  return s;
}

double InvertedIndex::score(std::string_view query, const std::string& doc_id) const {
  const long pos = find(doc_id);
  if (pos < 0) throw std::out_of_range("unknown doc_id " + doc_id);
  return score(query, static_cast<std::size_t>(pos));
}

RankedList InvertedIndex::retrieve_topk(std::string_view query, std::size_t k) const {
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& t : unique_terms(query)) {
    const auto& list = postings(t);
    if (list.empty()) continue;
    const double w = idf(list.size());
    for (const Posting& p : list) {
      acc[p.doc] += w * term_weight(p.tf, doc_len_[p.doc], avgdl_, params_);
    }
  }
  RankedList out;
  out.reserve(acc.size());
  for (const auto& [doc, s] : acc) out.push_back({doc_ids_[doc], s});
  const std::size_t n = std::min(k, out.size());
  auto cmp = [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  };
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), out.end(), cmp);
  out.resize(n);
  return out;
}

Run retrieve_run(const InvertedIndex& index, const std::vector<Query>& queries, std::size_t k) {
  Run run;
  run.tag = "first-stage";
  for (const auto& q : queries) run.queries[q.query_id] = index.retrieve_topk(q.text, k);
  return run;
}

}  // namespace rrk
