#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrk/bm25.hpp"
#include "rrk/compressor.hpp"
#include "rrk/scorer.hpp"
#include "rrk/synthetic.hpp"
#include "rrk/trainer.hpp"
#include "rrk/transformer.hpp"

namespace rrk {

/// Every problem found while reading or checking a config.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

private:
  std::vector<std::string> violations_;
};

/// Artifact locations. Empty entries default to files under `out`.
struct PathsConfig {
  std::string out = "out";
  std::string corpus;
  std::string queries;
  std::string qrels;
  std::string planted;
  std::string index;
  std::string compressor;
  std::string reranker;
  std::string textual;
  std::string first_stage;
  std::string pairs;
};

struct RetrieverConfig {
  Bm25Params bm25;
  std::size_t top_k = 50;
};

struct EvalConfig {
  int k = 10;
  double held_out_fraction = 0.1;
  std::size_t pairs_per_query = 8;
};

struct ExperimentConfig {
  /// Propagated into every stochastic component.
  std::uint64_t seed = 7;
  PathsConfig paths;
  SyntheticConfig data;
  ModelConfig model;
  PretrainConfig pretrain;
  TrainConfig train;
  RetrieverConfig retriever;
  EvalConfig eval;
  RerankerInit reranker_init = RerankerInit::FromCompressor;
  int textual_max_doc_len = 256;
  TrainableSet textual_trainable = TrainableSet::All;

  /// Canonical flat rendering (sorted keys, every key present).
  std::map<std::string, std::string> entries() const;
  /// FNV-1a over the canonical rendering.
  std::string hash() const;
  /// Decoder input length of the compressed scorer at full query budget.
  int effective_input_length() const { return model.rerank_input_length(); }

  /// Invariant violations of the embedded configs (paths not checked).
  std::vector<std::string> violations() const;

  /// Resolved artifact paths.
  std::filesystem::path path(const std::string& key) const;
};

/// Known key names (dotted), in canonical order.
std::vector<std::string> config_keys();

/// Parses "key = value" lines ('#' starts a comment). Unknown keys, bad
/// values and duplicates are all collected before throwing ConfigError.
ExperimentConfig parse_config(const std::string& text,
                              const std::map<std::string, std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::map<std::string, std::string>& overrides = {});

/// Violations for path keys whose files must already exist.
std::vector<std::string> missing_paths(const ExperimentConfig& config,
                                       const std::vector<std::string>& keys);

}  // namespace rrk
