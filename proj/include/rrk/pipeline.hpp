#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rrk/bm25.hpp"
#include "rrk/config.hpp"
#include "rrk/embedding_index.hpp"
#include "rrk/latency.hpp"
#include "rrk/metrics.hpp"
#include "rrk/scorer.hpp"
#include "rrk/synthetic.hpp"
#include "rrk/trainer.hpp"

namespace rrk {

/// Thread cap from RRK_THREADS (default 1, invalid values rejected).
std::size_t thread_count();

/// Provenance sidecar "<artifact>.meta" with key=value lines.
void write_meta(const std::filesystem::path& artifact, const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> read_meta(const std::filesystem::path& artifact);

/// Collection, judgments and the components every later stage needs.
struct Experiment {
  ExperimentConfig config;
  Vocabulary vocab;
  std::vector<Document> docs;
  std::vector<Query> queries;
  QuerySplit split;
  Qrels qrels;
  PlantedSignal planted;
  std::shared_ptr<const InvertedIndex> bm25;
  std::shared_ptr<const TeacherScorer> teacher;
};

/// Reads the generated data named by the config.
Experiment load_experiment(const ExperimentConfig& config);

/// Writes corpus, queries, qrels and the planted signal.
SyntheticSuite gen_data(const ExperimentConfig& config);
PretrainResult pretrain_stage(const ExperimentConfig& config);
EmbeddingIndex build_index_stage(const ExperimentConfig& config);
Run retrieve_stage(const ExperimentConfig& config);
std::vector<TrainingPair> make_pairs_stage(const ExperimentConfig& config);

/// Model variants: rrk-full, rrk-half, textual, teacher, first-stage.
/// Training supports rrk-full and textual.
TrainResult train_stage(const ExperimentConfig& config, const std::string& model);

/// Scorer for a variant, loading checkpoints and the index from the config
/// paths. Refuses an index built by a different compressor than the one the
/// reranker was trained against.
std::unique_ptr<Scorer> load_scorer(const Experiment& exp, const std::string& model);

/// Reranks the first-stage run for the held-out queries (or all queries).
Run rerank_stage(const ExperimentConfig& config, const std::string& model,
                 const std::filesystem::path& out, bool held_out_only = true);

/// Checks that a reranker checkpoint and an index come from the same
/// compressor. Throws std::runtime_error naming both hashes otherwise.
void check_compatible(const Checkpoint& reranker, const EmbeddingIndex& index);

/// Mean student-vs-teacher tau-b over each query's first-stage candidates.
double mean_kendall_tau(const std::vector<Query>& queries, const Run& first_stage, const Scorer& student,
                        const Scorer& teacher);

LatencyReport bench_stage(const ExperimentConfig& config, const std::vector<std::string>& models,
                          const BenchConfig& bench, const std::filesystem::path& csv);

/// gen-data through eval; returns the held-out nDCG@k report per model.
std::map<std::string, MetricReport> run_pipeline(const ExperimentConfig& config);

}  // namespace rrk
