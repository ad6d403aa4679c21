#include "rrk/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "rrk/random.hpp"

namespace rrk {

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> v;
  if (n_layers < 1) v.push_back("model.n_layers must be >= 1");
  if (d_model < 2) v.push_back("model.d_model must be >= 2");
  if (n_heads < 1 || (d_model % std::max(n_heads, 1)) != 0) {
    v.push_back("model.d_model must be divisible by model.n_heads");
  }
  if (d_ff < 1) v.push_back("model.d_ff must be >= 1");
  if (max_seq_len < 1) v.push_back("model.max_seq_len must be >= 1");
  if (l_memory < 1) v.push_back("model.l_memory must be >= 1");
  if (vocab_size < 256 + 3 + l_memory) {
    v.push_back("model.vocab_size must cover bytes, specials and memory tokens");
  }
  if (query_budget < 1) v.push_back("model.query_budget must be >= 1");
  if (lora_rank < 1) v.push_back("model.lora_rank must be >= 1");
  if (!(lora_alpha > 0.0)) v.push_back("model.lora_alpha must be > 0");
  return v;
}

void ModelConfig::validate() const {
  auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& s : v) msg += " " + s + ";";
  throw std::invalid_argument(msg);
}

const Matrix& Checkpoint::at(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("checkpoint has no parameter " + name);
  return it->second;
}

bool Checkpoint::frozen() const {
  auto it = metadata.find("frozen");
  return it != metadata.end() && it->second == "1";
}

void Checkpoint::set_frozen(bool frozen) { metadata["frozen"] = frozen ? "1" : "0"; }

std::string layer_prefix(int layer) { return "layers." + std::to_string(layer) + "."; }

bool is_lora_param(const std::string& name) {
  return name.ends_with(".lora_a") || name.ends_with(".lora_b");
}

bool is_head_param(const std::string& name) { return name.starts_with("head."); }

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
  return m;
}

const char* const kAdapted[] = {"attn.q", "attn.v"};

}  // namespace

Checkpoint init_checkpoint(const ModelConfig& config, const InitOptions& options) {
  config.validate();
  Checkpoint ckpt;
  ckpt.config = config;
  Rng rng(config.seed);
  const int d = config.d_model;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
  const double resid_std = proj_std / std::sqrt(2.0 * config.n_layers);
  auto& p = ckpt.params;
  p["tok_emb"] = random_matrix(rng, config.vocab_size, d, 1.0);
  p["pos_emb"] = random_matrix(rng, config.max_seq_len, d, 0.5);
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string pre = layer_prefix(l);
    p[pre + "ln1.g"] = Matrix::Ones(1, d);
    p[pre + "ln1.b"] = Matrix::Zero(1, d);
    for (const char* w : {"attn.q", "attn.k", "attn.v"}) {
      p[pre + w + ".w"] = random_matrix(rng, d, d, proj_std);
      p[pre + w + ".b"] = Matrix::Zero(1, d);
    }
    p[pre + "attn.o.w"] = random_matrix(rng, d, d, resid_std);
    p[pre + "attn.o.b"] = Matrix::Zero(1, d);
    p[pre + "ln2.g"] = Matrix::Ones(1, d);
    p[pre + "ln2.b"] = Matrix::Zero(1, d);
    p[pre + "ffn.up.w"] = random_matrix(rng, config.d_ff, d, proj_std);
    p[pre + "ffn.up.b"] = Matrix::Zero(1, config.d_ff);
    p[pre + "ffn.down.w"] =
        random_matrix(rng, d, config.d_ff, 1.0 / std::sqrt(static_cast<double>(config.d_ff)) /
                                               std::sqrt(2.0 * config.n_layers));
    p[pre + "ffn.down.b"] = Matrix::Zero(1, d);
  }
  p["ln_f.g"] = Matrix::Ones(1, d);
  p["ln_f.b"] = Matrix::Zero(1, d);
  if (options.lm_head) {
    p["lm_head.w"] = random_matrix(rng, config.vocab_size, d, proj_std);
    p["lm_head.b"] = Matrix::Zero(1, config.vocab_size);
  }
  if (options.lora) add_lora_adapters(ckpt, config.seed + 1);
  if (options.score_head) add_score_head(ckpt, config.seed + 2);
  ckpt.metadata["seed"] = std::to_string(config.seed);
  ckpt.metadata["step"] = "0";
  return ckpt;
}

void add_lora_adapters(Checkpoint& ckpt, std::uint64_t seed) {
  Rng rng(seed);
  const auto& c = ckpt.config;
  const double a_std = 1.0 / std::sqrt(static_cast<double>(c.d_model));
  for (int l = 0; l < c.n_layers; ++l) {
    for (const char* w : kAdapted) {
      const std::string base = layer_prefix(l) + w + ".w";
      const Matrix& weight = ckpt.at(base);
      ckpt.params[base + ".lora_a"] =
          random_matrix(rng, c.lora_rank, static_cast<int>(weight.cols()), a_std);
      ckpt.params[base + ".lora_b"] = Matrix::Zero(weight.rows(), c.lora_rank);
    }
  }
}

void add_score_head(Checkpoint& ckpt, std::uint64_t seed) {
  Rng rng(seed);
  const int d = ckpt.config.d_model;
  ckpt.params["head.w"] = random_matrix(rng, 1, d, 0.01);
  ckpt.params["head.b"] = Matrix::Zero(1, 1);
}

Matrix apply_lora(const Matrix& weight, const Matrix& lora_a, const Matrix& lora_b, double alpha,
                  int rank) {
  if (lora_a.rows() != rank || lora_b.cols() != rank) {
    throw std::invalid_argument("apply_lora: rank mismatch, expected " + std::to_string(rank) +
                                ", A " + shape_string(lora_a) + ", B " + shape_string(lora_b));
  }
  if (lora_a.cols() != weight.cols() || lora_b.rows() != weight.rows()) {
    throw std::invalid_argument("apply_lora: adapter " + shape_string(lora_b) + " x " +
                                shape_string(lora_a) + " does not fit weight " +
                                shape_string(weight));
  }
  return weight + (alpha / static_cast<double>(rank)) * (lora_b * lora_a);
}

Checkpoint truncate_layers(const Checkpoint& ckpt, int k) {
  if (k < 1 || k > ckpt.config.n_layers) {
    throw std::invalid_argument("truncate_layers: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(ckpt.config.n_layers) + "]");
  }
  Checkpoint out;
  out.config = ckpt.config;
  out.config.n_layers = k;
  out.metadata = ckpt.metadata;
  out.metadata["truncated_from"] = std::to_string(ckpt.config.n_layers);
  for (const auto& [name, value] : ckpt.params) {
    if (name.starts_with("layers.")) {
      const int layer = std::stoi(name.substr(7));
      if (layer >= k) continue;
    }
    out.params.emplace(name, value);
  }
  return out;
}

ParamBinder::ParamBinder(Tape& tape, const Checkpoint& ckpt, Predicate trainable)
    : tape_(tape), ckpt_(ckpt), trainable_(std::move(trainable)) {}

Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const bool grad = tape_.recording() && (!trainable_ || trainable_(name));
  Var v = tape_.parameter(ckpt_.at(name), grad);
  bound_.emplace(name, v);
  return v;
}

Var embed_tokens(ParamBinder& params, std::span<const TokenId> ids) {
  return ops::gather_rows(params("tok_emb"), ids);
}

namespace {

Var projection(ParamBinder& params, const std::string& name, Var x, double lora_scale) {
  Var y = ops::linear(x, params(name + ".w"), params(name + ".b"));
  if (params.has(name + ".w.lora_a")) {
    Var low = ops::linear(x, params(name + ".w.lora_a"));
    Var delta = ops::linear(low, params(name + ".w.lora_b"));
    y = ops::add(y, ops::scale(delta, lora_scale));
  }
  return y;
}

}  // namespace

DecoderOutput decoder_forward(ParamBinder& params, Var input_embeddings, const AttentionMask& mask) {
  const ModelConfig& c = params.checkpoint().config;
  const Matrix& x = input_embeddings.value();
  const int seq = static_cast<int>(x.rows());
  if (seq < 1 || seq > c.max_seq_len) {
    throw std::invalid_argument("decoder_forward: sequence length " + std::to_string(seq) +
                                " outside [1, " + std::to_string(c.max_seq_len) + "]");
  }
  if (x.cols() != c.d_model) {
    throw std::invalid_argument("decoder_forward: input width " + std::to_string(x.cols()) +
                                " != d_model " + std::to_string(c.d_model));
  }
  if (mask.size() != seq) throw std::invalid_argument("decoder_forward: mask size mismatch");

  DecoderOutput out;
  Var h = ops::add(input_embeddings, ops::slice_rows(params("pos_emb"), 0, seq));
  out.hidden.push_back(h);
  const double s = c.lora_scale();
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string pre = layer_prefix(l);
    Var a = ops::layer_norm(h, params(pre + "ln1.g"), params(pre + "ln1.b"));
    Var q = projection(params, pre + "attn.q", a, s);
    Var k = projection(params, pre + "attn.k", a, s);
    Var v = projection(params, pre + "attn.v", a, s);
    Var att = ops::attention(q, k, v, c.n_heads, mask);
    h = ops::add(h, projection(params, pre + "attn.o", att, s));
    Var m = ops::layer_norm(h, params(pre + "ln2.g"), params(pre + "ln2.b"));
    Var up = ops::gelu(ops::linear(m, params(pre + "ffn.up.w"), params(pre + "ffn.up.b")));
    h = ops::add(h, ops::linear(up, params(pre + "ffn.down.w"), params(pre + "ffn.down.b")));
    out.hidden.push_back(h);
  }
  out.final_hidden = ops::layer_norm(h, params("ln_f.g"), params("ln_f.b"));
  return out;
}

}  // namespace rrk
