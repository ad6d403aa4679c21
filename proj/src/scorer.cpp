#include "rrk/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "rrk/compressor.hpp"
#include "rrk/log.hpp"

namespace rrk {

DocumentStore::DocumentStore(std::vector<Document> docs) : docs_(std::move(docs)) {
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!pos_.emplace(docs_[i].doc_id, i).second) {
      throw std::invalid_argument("duplicate doc_id " + docs_[i].doc_id);
    }
  }
}

const Document& DocumentStore::at(const std::string& doc_id) const {
  auto it = pos_.find(doc_id);
  if (it == pos_.end()) throw std::out_of_range("unknown doc_id " + doc_id);
  return docs_[it->second];
}

std::vector<double> Scorer::score_batch(const Query& query,
                                        std::span<const std::string> doc_ids) const {
  std::vector<double> out;
  out.reserve(doc_ids.size());
  for (const auto& id : doc_ids) out.push_back(score(query, id));
  return out;
}

TokenSeq budget_query(const Query& query, int budget) {
  if (query.tokens.size() > static_cast<std::size_t>(budget)) {
    log::info("query " + query.query_id + " truncated from " +
              std::to_string(query.tokens.size()) + " to " + std::to_string(budget) + " tokens");
  }
  return truncate_tokens(query.tokens, static_cast<std::size_t>(budget));
}

Var compressed_input(ParamBinder& params, std::span<const TokenId> query_tokens,
                     const Matrix& memory) {
  const ModelConfig& c = params.checkpoint().config;
  if (memory.rows() != c.l_memory || memory.cols() != c.d_model) {
    throw std::invalid_argument("compressed_input: memory must be " + std::to_string(c.l_memory) +
                                "x" + std::to_string(c.d_model) + ", got " + shape_string(memory));
  }
  const TokenId eos[] = {Vocabulary::kByteUnits + 1};
  std::vector<Var> parts;
  if (!query_tokens.empty()) parts.push_back(embed_tokens(params, query_tokens));
  parts.push_back(params.tape().constant(memory));
  parts.push_back(embed_tokens(params, eos));
  return ops::concat_rows(parts);
}

Var eos_score(ParamBinder& params, Var input) {
  const int seq = static_cast<int>(input.value().rows());
  DecoderOutput out = decoder_forward(params, input, AttentionMask::causal(seq));
  Var last = ops::slice_rows(out.final_hidden, seq - 1, 1);
  return ops::linear(last, params("head.w"), params("head.b"));
}

TokenSeq textual_tokens(std::span<const TokenId> query_tokens, std::span<const TokenId> doc_tokens,
                        int max_doc_len) {
  TokenSeq seq(query_tokens.begin(), query_tokens.end());
  seq.push_back(Vocabulary::kByteUnits + 2);
  const std::size_t n = std::min(doc_tokens.size(), static_cast<std::size_t>(max_doc_len));
  seq.insert(seq.end(), doc_tokens.begin(), doc_tokens.begin() + static_cast<std::ptrdiff_t>(n));
  seq.push_back(Vocabulary::kByteUnits + 1);
  return seq;
}

namespace {

double checked(double s, const std::string& what) {
  if (!std::isfinite(s)) throw std::runtime_error(what + ": non-finite score");
  return s;
}

}  // namespace

CompressedScorer::CompressedScorer(std::shared_ptr<const Checkpoint> model,
                                   std::shared_ptr<const EmbeddingIndex> index, std::string tag)
    : model_(std::move(model)), index_(std::move(index)), tag_(std::move(tag)) {
  if (!model_->has("head.w")) throw std::invalid_argument("reranker checkpoint has no score head");
  if (index_->l() != model_->config.l_memory || index_->d_model() != model_->config.d_model) {
    throw std::invalid_argument("index shape " + std::to_string(index_->l()) + "x" +
                                std::to_string(index_->d_model()) +
                                " does not match reranker config");
  }
}

int CompressedScorer::input_length(const Query& query) const {
  const auto& c = model_->config;
  return static_cast<int>(std::min<std::size_t>(query.tokens.size(), c.query_budget)) +
         c.l_memory + 1;
}

double CompressedScorer::score_memory(const Query& query, const Matrix& memory) const {
  Tape tape(false);
  ParamBinder params(tape, *model_);
  const TokenSeq q = budget_query(query, model_->config.query_budget);
  // Rounded to the index precision, so online and index-backed scores agree.
  const Matrix stored = memory.cast<float>().cast<double>();
  Var s = eos_score(params, compressed_input(params, q, stored));
  return checked(s.value()(0, 0), tag_);
}

double CompressedScorer::score(const Query& query, const std::string& doc_id) const {
  return score_memory(query, index_->lookup_matrix(doc_id));
}

TextualScorer::TextualScorer(std::shared_ptr<const Checkpoint> model,
                             std::shared_ptr<const DocumentStore> docs, int max_doc_len)
    : model_(std::move(model)), docs_(std::move(docs)), max_doc_len_(max_doc_len) {
  if (!model_->has("head.w")) throw std::invalid_argument("textual checkpoint has no score head");
  if (max_doc_len_ < 1) throw std::invalid_argument("textual scorer: max_doc_len must be >= 1");
}

double TextualScorer::score_tokens(const Query& query, std::span<const TokenId> doc_tokens) const {
  const TokenSeq q = budget_query(query, model_->config.query_budget);
  const TokenSeq seq = textual_tokens(q, doc_tokens, max_doc_len_);
  if (static_cast<int>(seq.size()) > model_->config.max_seq_len) {
    throw std::invalid_argument("textual scorer: input of " + std::to_string(seq.size()) +
                                " tokens exceeds max_seq_len " +
                                std::to_string(model_->config.max_seq_len));
  }
  Tape tape(false);
  ParamBinder params(tape, *model_);
  Var s = eos_score(params, embed_tokens(params, seq));
  return checked(s.value()(0, 0), "textual");
}

double TextualScorer::score(const Query& query, const std::string& doc_id) const {
  return score_tokens(query, docs_->at(doc_id).tokens);
}

TeacherScorer::TeacherScorer(std::shared_ptr<const InvertedIndex> bm25, PlantedSignal planted,
                             double normalizer)
    : bm25_(std::move(bm25)), planted_(std::move(planted)), normalizer_(normalizer) {
  if (!(normalizer_ > 0.0)) throw std::invalid_argument("teacher normalizer must be positive");
}

TeacherScorer::TeacherScorer(std::shared_ptr<const InvertedIndex> bm25, PlantedSignal planted,
                             const std::vector<Query>& calibration_queries)
    : bm25_(std::move(bm25)), planted_(std::move(planted)) {
  double mx = 0.0;
  for (const auto& q : calibration_queries) {
    for (const auto& id : bm25_->doc_ids()) mx = std::max(mx, raw_score(q, id));
  }
  normalizer_ = mx > 0.0 ? mx : 1.0;
}

double TeacherScorer::raw_score(const Query& query, const std::string& doc_id) const {
  double s = bm25_->score(query.text, doc_id);
  auto q = planted_.find(query.query_id);
  if (q != planted_.end()) {
    auto d = q->second.find(doc_id);
    if (d != q->second.end()) s += kPlantedBonus * d->second;
  }
  return s;
}

double TeacherScorer::score(const Query& query, const std::string& doc_id) const {
  return std::clamp(raw_score(query, doc_id) / normalizer_, 0.0, 1.0);
}

double Bm25Scorer::score(const Query& query, const std::string& doc_id) const {
  return bm25_->score(query.text, doc_id);
}

RankedList rerank(const Query& query, const RankedList& candidates, const Scorer& scorer,
                  std::size_t batch_size) {
  if (candidates.empty()) throw std::invalid_argument("rerank: no candidates for " + query.query_id);
  if (batch_size < 1) throw std::invalid_argument("rerank: batch size must be >= 1");
  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const auto& c : candidates) ids.push_back(c.doc_id);
  RankedList out;
  out.reserve(ids.size());
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ids.size() - start);
    const auto scores = scorer.score_batch(query, std::span(ids).subspan(start, n));
    for (std::size_t i = 0; i < n; ++i) out.push_back({ids[start + i], scores[i]});
  }
  sort_ranked(out);
  return out;
}

Run rerank_run(const std::vector<Query>& queries, const Run& first_stage, const Scorer& scorer,
               std::size_t batch_size, std::size_t threads) {
  std::vector<std::pair<const Query*, const RankedList*>> work;
  for (const auto& q : queries) {
    auto it = first_stage.queries.find(q.query_id);
    if (it == first_stage.queries.end() || it->second.empty()) continue;
    work.emplace_back(&q, &it->second);
  }
  std::vector<RankedList> lists(work.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(work.size(), 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < work.size(); ++i) lists[i] = rerank(*work[i].first, *work[i].second, scorer, batch_size);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < work.size(); i += threads) {
            lists[i] = rerank(*work[i].first, *work[i].second, scorer, batch_size);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  Run out;
  out.tag = scorer.tag();
  for (std::size_t i = 0; i < work.size(); ++i) out.queries[work[i].first->query_id] = std::move(lists[i]);
  return out;
}

Checkpoint init_reranker(const ModelConfig& config, RerankerInit init, const Checkpoint* compressor) {
  Checkpoint ckpt = init_checkpoint(config, {});
  if (init == RerankerInit::FromCompressor) {
    if (!compressor) throw std::invalid_argument("init_reranker: compressor required");
    const auto& cc = compressor->config;
    if (cc.d_model != config.d_model || cc.n_heads != config.n_heads || cc.d_ff != config.d_ff ||
        cc.n_layers < config.n_layers || cc.vocab_size != config.vocab_size) {
      throw std::invalid_argument("init_reranker: compressor architecture does not match");
    }
    for (auto& [name, value] : ckpt.params) {
      const Matrix& src = compressor->at(name);
      if (name == "pos_emb") {
        value = src.topRows(value.rows());
      } else {
        value = src;
      }
    }
    ckpt.metadata["base"] = "compressor";
  } else {
    ckpt.metadata["base"] = "random";
  }
  add_lora_adapters(ckpt, config.seed + 1);
  add_score_head(ckpt, config.seed + 2);
  ckpt.metadata["role"] = "reranker";
  return ckpt;
}

Checkpoint init_textual(const ModelConfig& config, int max_doc_len) {
  ModelConfig c = config;
  c.max_seq_len = std::max(c.max_seq_len, c.query_budget + max_doc_len + 2);
  Checkpoint ckpt = init_checkpoint(c, {.lora = false, .score_head = true});
  ckpt.metadata["role"] = "textual";
  return ckpt;
}

}  // namespace rrk
