#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rrk {

/// query_id -> doc_id -> grade (>= 0).
class Qrels {
public:
  void set(const std::string& query_id, const std::string& doc_id, int grade);
  /// Unjudged pairs have grade 0.
  int grade(const std::string& query_id, const std::string& doc_id) const;
  const std::map<std::string, int>* judgments(const std::string& query_id) const;
  const std::map<std::string, std::map<std::string, int>>& all() const { return grades_; }
  bool contains(const std::string& query_id) const { return grades_.count(query_id) > 0; }

  bool operator==(const Qrels&) const = default;

private:
  std::map<std::string, std::map<std::string, int>> grades_;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

using RankedList = std::vector<ScoredDoc>;

/// Sorts by score descending, ties by doc_id ascending.
void sort_ranked(RankedList& list);

/// Throws std::runtime_error naming the query when scores increase along
/// the list or a doc_id repeats.
void check_ranked(const std::string& query_id, const RankedList& list);

struct Run {
  std::string tag = "run";
  std::map<std::string, RankedList> queries;

  bool operator==(const Run&) const = default;
};

Qrels load_qrels(const std::filesystem::path& path);
void write_qrels(const Qrels& qrels, const std::filesystem::path& path);

/// Reads "qid Q0 docid rank score tag". Lists are ordered by the rank column.
Run load_run(const std::filesystem::path& path);

/// Writes lists in stored order with 1-based ranks. Scores use the shortest
/// representation that parses back to the same double.
void write_run(const Run& run, const std::filesystem::path& path);

std::string format_score(double value);

}  // namespace rrk
