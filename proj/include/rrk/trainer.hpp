#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rrk/bm25.hpp"
#include "rrk/corpus.hpp"
#include "rrk/embedding_index.hpp"
#include "rrk/scorer.hpp"
#include "rrk/transformer.hpp"

namespace rrk {

struct TrainingPair {
  std::string query_id;
  std::string doc_id;
  double teacher_score = 0.0;

  bool operator==(const TrainingPair&) const = default;
};

enum class TrainableSet { LoraHead, All };

std::string to_string(TrainableSet set);
TrainableSet trainable_set_from_string(const std::string& name);

struct TrainConfig {
  int epochs = 2;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 7;
  TrainableSet trainable = TrainableSet::LoraHead;

  std::vector<std::string> violations() const;
  void validate() const;
};

/// Name predicate for the declared trainable set.
ParamBinder::Predicate trainable_predicate(TrainableSet set);

struct QuerySplit {
  std::vector<Query> train;
  std::vector<Query> held_out;
};

/// Seeded split; the held-out share is round(fraction * n) queries, at
/// least one when n >= 2. Each side keeps the input order.
QuerySplit split_queries(const std::vector<Query>& queries, double held_out_fraction,
                         std::uint64_t seed);

/// Per query: first-stage top `top_k`, reordered by the teacher, then
/// `per_query` distinct documents sampled from that list. Queries with fewer
/// candidates contribute all of them (with a warning).
std::vector<TrainingPair> make_training_pairs(const std::vector<Query>& queries,
                                              const InvertedIndex& retriever,
                                              const Scorer& teacher, std::uint64_t seed,
                                              std::size_t per_query = 8, std::size_t top_k = 50);

std::vector<TrainingPair> load_pairs(const std::filesystem::path& path);
void write_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path);

/// Mean of squared differences. Throws on a length mismatch or empty input.
double mse_loss(std::span<const double> student, std::span<const double> teacher);

/// Builds the decoder input for one (query, doc) pair on the given tape.
using InputBuilder =
    std::function<Var(ParamBinder& params, const Query& query, const std::string& doc_id)>;

/// Memory embeddings read from the index (compressed student).
InputBuilder compressed_inputs(std::shared_ptr<const EmbeddingIndex> index);
/// Raw document tokens (textual student).
InputBuilder textual_inputs(std::shared_ptr<const DocumentStore> docs, int max_doc_len);

struct TrainResult {
  Checkpoint model;
  /// Batch-mean loss for every optimizer step.
  std::vector<double> loss_trace;
  std::vector<double> epoch_means;
  /// Set when a non-finite loss stopped training; `model` is then the last
  /// checkpoint that produced a finite loss.
  bool aborted = false;
  std::string abort_reason;
};

/// Batch MSE (graph form) of the student over `batch`.
Var batch_loss(ParamBinder& params, std::span<const TrainingPair* const> batch,
               const std::map<std::string, Query>& queries, const InputBuilder& inputs);

/// MSE distillation. Only parameters in the trainable set change. Throws when
/// the initial checkpoint is marked frozen or a pair names an unknown query.
TrainResult train(const std::vector<TrainingPair>& pairs, const std::vector<Query>& queries,
                  const Checkpoint& init, const TrainConfig& config, const InputBuilder& inputs,
                  const std::function<void(int, double)>& on_step = nullptr);

void write_loss_trace(std::span<const double> trace, const std::filesystem::path& path);

}  // namespace rrk
