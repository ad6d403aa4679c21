#pragma once

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrk/bm25.hpp"
#include "rrk/corpus.hpp"
#include "rrk/embedding_index.hpp"
#include "rrk/synthetic.hpp"
#include "rrk/transformer.hpp"
#include "rrk/trec.hpp"

namespace rrk {

/// Document lookup by id for scorers that need raw text.
class DocumentStore {
public:
  DocumentStore() = default;
  explicit DocumentStore(std::vector<Document> docs);

  const Document& at(const std::string& doc_id) const;
  bool contains(const std::string& doc_id) const { return pos_.count(doc_id) > 0; }
  const std::vector<Document>& docs() const { return docs_; }

private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> pos_;
};

/// Pure relevance scorer: the same (query, doc) always yields the same
/// finite score.
class Scorer {
public:
  virtual ~Scorer() = default;
  virtual std::string tag() const = 0;
  virtual double score(const Query& query, const std::string& doc_id) const = 0;
  /// Scores a batch; results are independent of how candidates are batched.
  virtual std::vector<double> score_batch(const Query& query,
                                          std::span<const std::string> doc_ids) const;
};

/// Tail-truncates the query to the budget, logging when tokens are dropped.
TokenSeq budget_query(const Query& query, int budget);

/// Decoder input for the compressed path: query token embeddings, the l
/// stored memory vectors, then the EOS embedding. Returns a
/// (min(|q|, budget) + l + 1) x d_model graph node.
Var compressed_input(ParamBinder& params, std::span<const TokenId> query_tokens,
                     const Matrix& memory);

/// Scalar head over the final hidden state at the last position.
Var eos_score(ParamBinder& params, Var input);

/// Textual input tokens: query ++ SEP ++ doc[0..max_doc_len) ++ EOS.
TokenSeq textual_tokens(std::span<const TokenId> query_tokens, std::span<const TokenId> doc_tokens,
                        int max_doc_len);

/// Compressed-representation scorer reading memory embeddings from the index.
class CompressedScorer : public Scorer {
public:
  CompressedScorer(std::shared_ptr<const Checkpoint> model,
                   std::shared_ptr<const EmbeddingIndex> index, std::string tag = "rrk-full");

  std::string tag() const override { return tag_; }
  double score(const Query& query, const std::string& doc_id) const override;
  /// Same scorer over caller-provided memory embeddings (online compression).
  /// The memory is first rounded to the index's single precision, the
  /// representation the reranker is trained on.
  double score_memory(const Query& query, const Matrix& memory) const;
  /// Decoder input length for this query (structural, no forward).
  int input_length(const Query& query) const;

  const Checkpoint& model() const { return *model_; }
  const EmbeddingIndex& index() const { return *index_; }

private:
  std::shared_ptr<const Checkpoint> model_;
  std::shared_ptr<const EmbeddingIndex> index_;
  std::string tag_;
};

/// Cross-encoder style baseline reading raw document tokens.
class TextualScorer : public Scorer {
public:
  TextualScorer(std::shared_ptr<const Checkpoint> model, std::shared_ptr<const DocumentStore> docs,
                int max_doc_len = 256);

  std::string tag() const override { return "textual"; }
  double score(const Query& query, const std::string& doc_id) const override;
  double score_tokens(const Query& query, std::span<const TokenId> doc_tokens) const;
  int max_doc_len() const { return max_doc_len_; }

private:
  std::shared_ptr<const Checkpoint> model_;
  std::shared_ptr<const DocumentStore> docs_;
  int max_doc_len_;
};

/// Deterministic graded lexical teacher: BM25 plus a bonus per planted
/// topic-term occurrence, divided by a normalizer fixed at construction so
/// that scores over the calibration set lie in [0, 1].
class TeacherScorer : public Scorer {
public:
  static constexpr double kPlantedBonus = 4.0;

  /// Normalizer = maximum raw score over every (query, document) pair.
  TeacherScorer(std::shared_ptr<const InvertedIndex> bm25, PlantedSignal planted,
                const std::vector<Query>& calibration_queries);
  TeacherScorer(std::shared_ptr<const InvertedIndex> bm25, PlantedSignal planted,
                double normalizer);

  std::string tag() const override { return "teacher"; }
  double score(const Query& query, const std::string& doc_id) const override;
  double raw_score(const Query& query, const std::string& doc_id) const;
  double normalizer() const { return normalizer_; }

private:
  std::shared_ptr<const InvertedIndex> bm25_;
  PlantedSignal planted_;
  double normalizer_ = 1.0;
};

/// First-stage BM25 as a scorer.
class Bm25Scorer : public Scorer {
public:
  explicit Bm25Scorer(std::shared_ptr<const InvertedIndex> bm25) : bm25_(std::move(bm25)) {}
  std::string tag() const override { return "first-stage"; }
  double score(const Query& query, const std::string& doc_id) const override;

private:
  std::shared_ptr<const InvertedIndex> bm25_;
};

/// Reorders candidates by scorer descending, ties by doc_id. Any scoring
/// failure propagates and no partial list is produced.
RankedList rerank(const Query& query, const RankedList& candidates, const Scorer& scorer,
                  std::size_t batch_size = 256);

/// Reranks every query of a first-stage run present in `queries`. Queries
/// are spread over up to `threads` workers; the output does not depend on
/// the thread count.
Run rerank_run(const std::vector<Query>& queries, const Run& first_stage, const Scorer& scorer,
               std::size_t batch_size = 256, std::size_t threads = 1);

/// How the reranker decoder base weights are initialized.
enum class RerankerInit {
  /// Fresh seeded weights.
  Random,
  /// Copy of the compressor's decoder weights (same architecture family).
  FromCompressor,
};

/// Reranker checkpoint: base decoder, zero-B LoRA adapters on attention
/// query/value projections, and a fresh scalar head.
Checkpoint init_reranker(const ModelConfig& config, RerankerInit init,
                         const Checkpoint* compressor = nullptr);

/// Textual baseline checkpoint sized for query + SEP + max_doc_len + EOS.
Checkpoint init_textual(const ModelConfig& config, int max_doc_len);

}  // namespace rrk
