#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rrk/trec.hpp"

namespace rrk {

struct MetricReport {
  std::string metric = "ndcg";
  int k = 10;
  std::map<std::string, double> per_query;
  double mean = 0.0;
  /// Queries dropped because their ideal DCG is zero.
  std::size_t excluded = 0;
};

/// DCG of a graded list at cutoff k: sum of (2^rel - 1) / log2(i + 1).
double dcg_at_k(const std::vector<int>& grades, int k);

/// nDCG@k over every query of the run. Unjudged documents have grade 0.
/// Throws when k < 1 or the run names a query absent from the qrels.
MetricReport ndcg_at_k(const Run& run, const Qrels& qrels, int k = 10);

/// "query_id\tvalue" lines, then "mean\t<value>" and "excluded\t<count>".
void write_report(const MetricReport& report, const std::filesystem::path& path);

/// Tau-b between two rankings of the same items, each given as doc_id ->
/// score (higher ranks first; equal scores are ties). Throws when the item
/// sets differ. Returns 0 when either side is all ties.
double kendall_tau(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

/// Convenience overload over ranked lists.
double kendall_tau(const RankedList& a, const RankedList& b);

}  // namespace rrk
