#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rrk/autograd.hpp"
#include "rrk/tensor.hpp"

namespace rrk {

struct ModelConfig {
  int n_layers = 4;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 256;
  int max_seq_len = 64;
  int vocab_size = 267;
  int l_memory = 8;
  int query_budget = 23;
  int lora_rank = 8;
  double lora_alpha = 16.0;
  std::uint64_t seed = 7;

  /// Decoder input length of the compressed scorer at full query budget.
  int rerank_input_length() const { return query_budget + l_memory + 1; }
  double lora_scale() const { return lora_alpha / static_cast<double>(lora_rank); }

  /// Invariant violations, empty when valid.
  std::vector<std::string> violations() const;
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

using ParameterMap = std::map<std::string, Matrix>;

/// Parameters plus provenance. Adapter pairs are stored next to their weight
/// as "<weight>.lora_a" (r x d_in) and "<weight>.lora_b" (d_out x r).
struct Checkpoint {
  ModelConfig config;
  ParameterMap params;
  std::map<std::string, std::string> metadata;

  const Matrix& at(const std::string& name) const;
  bool has(const std::string& name) const { return params.count(name) > 0; }
  bool frozen() const;
  void set_frozen(bool frozen);
};

/// What to allocate beyond the base decoder.
struct InitOptions {
  bool lora = false;
  bool score_head = false;
  /// Adds an output projection back to the vocabulary ("lm_head").
  bool lm_head = false;
};

/// Seeded initialization. LoRA A is random, LoRA B is zero, so the adapted
/// model starts forward-identical to the base.
Checkpoint init_checkpoint(const ModelConfig& config, const InitOptions& options);

/// Adds zero-B adapters to the attention query and value projections.
void add_lora_adapters(Checkpoint& ckpt, std::uint64_t seed);
void add_score_head(Checkpoint& ckpt, std::uint64_t seed);

std::string layer_prefix(int layer);
bool is_lora_param(const std::string& name);
bool is_head_param(const std::string& name);

/// Dense effective weight W + (alpha / r) B A.
Matrix apply_lora(const Matrix& weight, const Matrix& lora_a, const Matrix& lora_b, double alpha,
                  int rank);

/// Keeps layers [0, k) and the final norm and heads.
Checkpoint truncate_layers(const Checkpoint& ckpt, int k);

/// Binds checkpoint parameters to tape leaves. Parameters outside the
/// trainable predicate are bound without gradients.
class ParamBinder {
public:
  using Predicate = std::function<bool(const std::string&)>;

  ParamBinder(Tape& tape, const Checkpoint& ckpt, Predicate trainable = nullptr);

  Var operator()(const std::string& name);
  bool has(const std::string& name) const { return ckpt_.has(name); }
  Tape& tape() { return tape_; }
  const Checkpoint& checkpoint() const { return ckpt_; }
  /// Bound leaves, for reading gradients after backward.
  const std::map<std::string, Var>& bound() const { return bound_; }

private:
  Tape& tape_;
  const Checkpoint& ckpt_;
  Predicate trainable_;
  std::map<std::string, Var> bound_;
};

struct DecoderOutput {
  /// hidden[0] is the input plus positions, hidden[i] the output of block i.
  std::vector<Var> hidden;
  /// Final layer norm applied to hidden.back().
  Var final_hidden;
};

/// Pre-norm causal decoder over precomputed input vectors (seq x d_model).
/// Throws when seq exceeds max_seq_len or the mask size differs from seq.
DecoderOutput decoder_forward(ParamBinder& params, Var input_embeddings, const AttentionMask& mask);

/// Token embedding lookup.
Var embed_tokens(ParamBinder& params, std::span<const TokenId> ids);

}  // namespace rrk
