#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rrk/corpus.hpp"
#include "rrk/random.hpp"
#include "rrk/trec.hpp"

namespace rrk {

/// Number of planted topic-term occurrences per (query, doc). This is the
/// hidden signal the teacher reads; qrels grades are derived from it.
using PlantedSignal = std::map<std::string, std::map<std::string, double>>;

struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t n_docs = 500;
  std::size_t n_queries = 100;
  /// Document length range in bytes (= tokens).
  std::size_t min_doc_len = 60;
  std::size_t max_doc_len = 240;
};

struct SyntheticSuite {
  std::vector<Document> docs;
  std::vector<Query> queries;
  Qrels qrels;
  PlantedSignal planted;
};

/// Topic terms planted per query; grades run 0..kTopicTerms.
inline constexpr int kTopicTerms = 3;
/// Planted terms are placed inside this byte prefix so compression sees them.
inline constexpr std::size_t kPlantWindow = 100;

/// Deterministic desk-scale collection. Every query gets a grade-3 document
/// containing all of its topic terms, then grade-2 and grade-1 documents
/// while enough documents remain.
SyntheticSuite generate_synthetic_corpus(const SyntheticConfig& config, const Vocabulary& vocab);

/// Background text of exactly `length` bytes.
std::string synthetic_text_of_length(Rng& rng, std::size_t length);

PlantedSignal load_planted(const std::string& path);
void write_planted(const PlantedSignal& planted, const std::string& path);

}  // namespace rrk
