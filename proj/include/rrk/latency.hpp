#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rrk/corpus.hpp"
#include "rrk/scorer.hpp"

namespace rrk {

struct LatencyRow {
  std::string model;
  int input_length = 0;
  int batch = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  /// Median time spent in index lookups per repetition (0 for textual).
  double lookup_ms = 0.0;
  int repetitions = 0;
};

struct LatencyReport {
  std::vector<LatencyRow> rows;

  const LatencyRow& at(const std::string& model, int input_length) const;
};

struct BenchConfig {
  std::vector<int> lengths{128, 256, 512, 768, 1024};
  std::size_t n_queries = 50;
  std::size_t docs_per_query = 50;
  std::size_t batch = 256;
  /// Query length in tokens; 23 fills the compressed scorer's budget.
  std::size_t query_length = 23;
  int warmup = 3;
  int repetitions = 20;
  /// Keep timing past `repetitions` until this much has been spent per cell.
  double min_timed_ms = 0.0;
  std::uint64_t seed = 7;
};

/// A scorer prepared for one workload (untimed), plus the index lookup it
/// performs per candidate when it has one.
struct BenchTarget {
  std::unique_ptr<Scorer> scorer;
  std::function<void(std::span<const std::string>)> lookup;
};

struct BenchVariant {
  std::string name;
  std::function<BenchTarget(const std::vector<Document>& docs)> prepare;
};

struct BenchWorkload {
  std::vector<Query> queries;
  /// docs[q] are the candidates of queries[q], all exactly `length` tokens.
  std::vector<std::vector<Document>> docs;
  int length = 0;
};

BenchWorkload make_workload(const BenchConfig& config, int length, const Vocabulary& vocab);

/// One timed repetition reranks one query's candidate list; repetitions cycle
/// through the workload's queries and are interleaved across lengths so slow
/// drift of the machine does not masquerade as a length effect. Timing is
/// single-threaded. When a cell's median falls under 1 ms, each sample is
/// widened to more reranks until it does not.
LatencyReport latency_bench(const std::vector<BenchVariant>& variants, const BenchConfig& config,
                            const Vocabulary& vocab);

/// model,input_length,batch,median_ms,p95_ms,lookup_ms
void emit_curves(const LatencyReport& report, const std::filesystem::path& path);
LatencyReport load_curves(const std::filesystem::path& path);

/// Nearest-rank percentile of unsorted samples.
double percentile(std::vector<double> samples, double p);

}  // namespace rrk
