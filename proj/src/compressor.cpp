#include "rrk/compressor.hpp"

#include <cmath>
#include <stdexcept>

#include "rrk/adam.hpp"
#include "rrk/random.hpp"

namespace rrk {

ModelConfig compressor_config(const ModelConfig& base) {
  ModelConfig c = base;
  c.max_seq_len = std::max<int>(base.max_seq_len, static_cast<int>(kCompressorCeiling) + base.l_memory);
  return c;
}

namespace {

std::vector<TokenId> compressor_input(std::span<const TokenId> tokens, const ModelConfig& config) {
  if (tokens.empty()) throw std::invalid_argument("compress: empty document");
  const std::size_t n = std::min(tokens.size(), kCompressorCeiling);
  std::vector<TokenId> seq(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
  const TokenId first_memory = Vocabulary::kByteUnits + 3;
  for (int s = 0; s < config.l_memory; ++s) seq.push_back(first_memory + s);
  return seq;
}

}  // namespace

Var compress_graph(ParamBinder& params, std::span<const TokenId> tokens) {
  const ModelConfig& c = params.checkpoint().config;
  const auto seq = compressor_input(tokens, c);
  const int n = static_cast<int>(seq.size());
  Var x = embed_tokens(params, seq);
  DecoderOutput out = decoder_forward(params, x, AttentionMask::causal(n));
  return ops::slice_rows(out.final_hidden, n - c.l_memory, c.l_memory);
}

Matrix compress_tokens(std::span<const TokenId> tokens, const Checkpoint& compressor) {
  Tape tape(false);
  ParamBinder params(tape, compressor);
  return compress_graph(params, tokens).value();
}

CompressedDoc compress(const Document& doc, const Checkpoint& compressor) {
  if (doc.tokens.empty()) {
    throw std::invalid_argument("compress: document " + doc.doc_id + " has no tokens");
  }
  return {doc.doc_id, compress_tokens(doc.tokens, compressor)};
}

namespace {

Var reconstruction_graph(ParamBinder& comp, ParamBinder& dec, std::span<const TokenId> tokens) {
  const std::size_t n = std::min(tokens.size(), kCompressorCeiling);
  const auto doc = tokens.subspan(0, n);
  Var memory = compress_graph(comp, doc);
  // Separator then the teacher-forced prefix doc[0..n-2].
  std::vector<TokenId> prefix{Vocabulary::kByteUnits + 2};
  prefix.insert(prefix.end(), doc.begin(), doc.end() - 1);
  Var parts[] = {memory, embed_tokens(dec, prefix)};
  Var x = ops::concat_rows(parts);
  const int seq = static_cast<int>(x.value().rows());
  DecoderOutput out = decoder_forward(dec, x, AttentionMask::causal(seq));
  const int l = static_cast<int>(memory.value().rows());
  Var h = ops::slice_rows(out.final_hidden, l, static_cast<int>(n));
  Var logits = ops::linear(h, dec("lm_head.w"), dec("lm_head.b"));
  return ops::cross_entropy(logits, doc);
}

}  // namespace

double reconstruction_loss(const Document& doc, const Checkpoint& compressor,
                           const Checkpoint& reconstructor) {
  Tape tape(false);
  ParamBinder comp(tape, compressor), dec(tape, reconstructor);
  return reconstruction_graph(comp, dec, doc.tokens).value()(0, 0);
}

PretrainResult pretrain_compressor(const std::vector<Document>& corpus, const ModelConfig& config,
                                   const PretrainConfig& pretrain,
                                   const std::function<void(int, double)>& on_step) {
  if (corpus.empty()) throw std::invalid_argument("pretrain_compressor: empty corpus");
  if (pretrain.steps < 0 || pretrain.batch_size < 1 || !(pretrain.learning_rate > 0.0)) {
    throw std::invalid_argument("pretrain_compressor: invalid pretraining config");
  }
  PretrainResult result;
  ModelConfig cc = compressor_config(config);
  result.compressor = init_checkpoint(cc, {});
  result.compressor.metadata["role"] = "compressor";

  ModelConfig dc = cc;
  dc.n_layers = pretrain.decoder_layers;
  dc.seed = config.seed + 1000;
  result.reconstructor = init_checkpoint(dc, {.lm_head = true});
  result.reconstructor.metadata["role"] = "reconstructor";

  Adam comp_opt({.learning_rate = pretrain.learning_rate});
  Adam dec_opt({.learning_rate = pretrain.learning_rate});
  Rng rng(pretrain.seed);
  for (int step = 0; step < pretrain.steps; ++step) {
    Tape tape;
    ParamBinder comp(tape, result.compressor), dec(tape, result.reconstructor);
    std::vector<Var> losses;
    for (int b = 0; b < pretrain.batch_size; ++b) {
      const Document& d = corpus[rng.index(corpus.size())];
      if (d.tokens.empty()) continue;
      losses.push_back(reconstruction_graph(comp, dec, d.tokens));
    }
    if (losses.empty()) continue;
    Var total = ops::scale(ops::sum(ops::concat_rows(losses)), 1.0 / static_cast<double>(losses.size()));
    const double loss = total.value()(0, 0);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("pretrain_compressor: non-finite loss at step " +
                               std::to_string(step));
    }
    tape.backward(total);
    const auto comp_grads = collect_grads(comp);
    const auto dec_grads = collect_grads(dec);
    comp_opt.step(result.compressor.params, comp_grads);
    dec_opt.step(result.reconstructor.params, dec_grads);
    result.loss_trace.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  result.compressor.metadata["step"] = std::to_string(pretrain.steps);
  result.compressor.set_frozen(true);
  return result;
}

}  // namespace rrk
