#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rrk/tokenizer.hpp"

namespace rrk {

struct Document {
  std::string doc_id;
  std::string text;
  TokenSeq tokens;

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string query_id;
  std::string text;
  TokenSeq tokens;

  bool operator==(const Query&) const = default;
};

enum class CorpusFormat { Jsonl, Tsv };

/// Picks the format from the file extension (.tsv, otherwise jsonl).
CorpusFormat format_from_path(const std::filesystem::path& path);

/// One Document per record. Throws std::runtime_error on malformed lines
/// (message carries the 1-based line number) and on duplicate ids.
std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const Vocabulary& vocab);
std::vector<Query> load_queries(const std::filesystem::path& path, CorpusFormat format,
                                const Vocabulary& vocab);

void write_corpus(const std::vector<Document>& docs, const std::filesystem::path& path,
                  CorpusFormat format);
void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path,
                   CorpusFormat format);

Document make_document(std::string doc_id, std::string text, const Vocabulary& vocab);
Query make_query(std::string query_id, std::string text, const Vocabulary& vocab);

}  // namespace rrk
