#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rrk/corpus.hpp"
#include "rrk/transformer.hpp"

namespace rrk {

/// Compressor input ceiling in document tokens.
inline constexpr std::size_t kCompressorCeiling = 128;

struct CompressedDoc {
  std::string doc_id;
  Matrix embeddings;  // l_memory x d_model
};

/// Config for the compressor decoder: max_seq_len covers the ceiling plus
/// the memory tokens.
ModelConfig compressor_config(const ModelConfig& base);

/// Appends the memory tokens after the first kCompressorCeiling document
/// tokens and returns the final hidden states at the memory positions.
/// Throws on an empty document.
CompressedDoc compress(const Document& doc, const Checkpoint& compressor);
Matrix compress_tokens(std::span<const TokenId> tokens, const Checkpoint& compressor);

/// Graph form, for training through the compressor.
Var compress_graph(ParamBinder& params, std::span<const TokenId> tokens);

struct PretrainConfig {
  int steps = 2500;
  int batch_size = 8;
  double learning_rate = 1e-3;
  /// Depth of the reconstruction decoder.
  int decoder_layers = 2;
  std::uint64_t seed = 7;
};

struct PretrainResult {
  Checkpoint compressor;
  /// Reconstruction decoder trained alongside (discarded after pretraining
  /// by the pipeline, kept for inspection).
  Checkpoint reconstructor;
  std::vector<double> loss_trace;
};

/// Token-reconstruction pretraining: a small decoder reads only the l memory
/// embeddings (then a separator and the teacher-forced prefix) and predicts
/// the document tokens. The returned compressor is marked frozen.
/// Throws std::runtime_error on a non-finite loss.
PretrainResult pretrain_compressor(const std::vector<Document>& corpus, const ModelConfig& config,
                                   const PretrainConfig& pretrain,
                                   const std::function<void(int, double)>& on_step = nullptr);

/// Reconstruction loss of one document under a compressor/decoder pair.
double reconstruction_loss(const Document& doc, const Checkpoint& compressor,
                           const Checkpoint& reconstructor);

}  // namespace rrk
