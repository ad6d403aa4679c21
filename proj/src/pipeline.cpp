#include "rrk/pipeline.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "rrk/checkpoint.hpp"
#include "rrk/compressor.hpp"
#include "rrk/log.hpp"

namespace rrk {

std::size_t thread_count() {
  const char* env = std::getenv("RRK_THREADS");
  if (!env || !*env) return 1;
  std::size_t n = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [ptr, ec] = std::from_chars(env, end, n);
  if (ec != std::errc() || ptr != end || n < 1) {
    throw std::invalid_argument(std::string("RRK_THREADS must be a positive integer, got '") + env + "'");
  }
  return n;
}

namespace {

std::filesystem::path meta_path(const std::filesystem::path& artifact) {
  return artifact.string() + ".meta";
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

std::map<std::string, std::string> provenance(const ExperimentConfig& config) {
  return {{"config_hash", config.hash()}, {"seed", std::to_string(config.seed)}};
}

void stamp(std::map<std::string, std::string>& meta, const ExperimentConfig& config) {
  for (const auto& [k, v] : provenance(config)) meta[k] = v;
}

Checkpoint load_frozen_compressor(const ExperimentConfig& config) {
  Checkpoint c = load_checkpoint(config.path("compressor"));
  if (!c.frozen()) throw std::runtime_error(config.path("compressor").string() + ": compressor is not frozen");
  return c;
}

Checkpoint half_depth(const Checkpoint& full) {
  Checkpoint half = truncate_layers(full, std::max(1, full.config.n_layers / 2));
  half.metadata["variant"] = "rrk-half";
  return half;
}

}  // namespace

void write_meta(const std::filesystem::path& artifact, const std::map<std::string, std::string>& meta) {
  std::ofstream out(meta_path(artifact), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + meta_path(artifact).string());
  for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& artifact) {
  std::ifstream in(meta_path(artifact));
  if (!in) throw std::runtime_error("cannot open " + meta_path(artifact).string());
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

SyntheticSuite gen_data(const ExperimentConfig& config) {
  const Vocabulary vocab(config.model.l_memory);
  SyntheticSuite suite = generate_synthetic_corpus(config.data, vocab);
  for (const char* key : {"corpus", "queries", "qrels", "planted"}) ensure_parent(config.path(key));
  write_corpus(suite.docs, config.path("corpus"), format_from_path(config.path("corpus")));
  write_queries(suite.queries, config.path("queries"), format_from_path(config.path("queries")));
  write_qrels(suite.qrels, config.path("qrels"));
  write_planted(suite.planted, config.path("planted").string());
  return suite;
}

Experiment load_experiment(const ExperimentConfig& config) {
  std::vector<std::string> missing = missing_paths(config, {"corpus", "queries", "qrels", "planted"});
  if (!missing.empty()) throw ConfigError(missing);
  Experiment exp{config, Vocabulary(config.model.l_memory), {}, {}, {}, {}, {}, nullptr, nullptr};
  exp.docs = load_corpus(config.path("corpus"), format_from_path(config.path("corpus")), exp.vocab);
  exp.queries = load_queries(config.path("queries"), format_from_path(config.path("queries")), exp.vocab);
  exp.qrels = load_qrels(config.path("qrels"));
  exp.planted = load_planted(config.path("planted").string());
  exp.split = split_queries(exp.queries, config.eval.held_out_fraction, config.seed);
  exp.bm25 = std::make_shared<InvertedIndex>(exp.docs, config.retriever.bm25);
  exp.teacher = std::make_shared<TeacherScorer>(exp.bm25, exp.planted, exp.queries);
  return exp;
}

PretrainResult pretrain_stage(const ExperimentConfig& config) {
  const Experiment exp = load_experiment(config);
  PretrainResult result = pretrain_compressor(exp.docs, config.model, config.pretrain, [](int step, double loss) {
    if (step % 50 == 0) log::info("pretrain step " + std::to_string(step) + " loss " + std::to_string(loss));
  });
  stamp(result.compressor.metadata, config);
  ensure_parent(config.path("compressor"));
  save_checkpoint(result.compressor, config.path("compressor"));
  write_loss_trace(result.loss_trace, std::filesystem::path(config.paths.out) / "pretrain_loss.csv");
  return result;
}

EmbeddingIndex build_index_stage(const ExperimentConfig& config) {
  const Experiment exp = load_experiment(config);
  const Checkpoint comp = load_frozen_compressor(config);
  EmbeddingIndex index = build_index(exp.docs, comp);
  index.metadata() = provenance(config);
  index.metadata()["compressor_hash"] = checkpoint_hash(comp);
  ensure_parent(config.path("index"));
  index.save(config.path("index"));
  return index;
}

Run retrieve_stage(const ExperimentConfig& config) {
  const Experiment exp = load_experiment(config);
  Run run = retrieve_run(*exp.bm25, exp.queries, config.retriever.top_k);
  ensure_parent(config.path("first_stage"));
  write_run(run, config.path("first_stage"));
  auto meta = provenance(config);
  meta["tag"] = run.tag;
  write_meta(config.path("first_stage"), meta);
  return run;
}

std::vector<TrainingPair> make_pairs_stage(const ExperimentConfig& config) {
  const Experiment exp = load_experiment(config);
  auto pairs = make_training_pairs(exp.split.train, *exp.bm25, *exp.teacher, config.seed,
                                   config.eval.pairs_per_query, config.retriever.top_k);
  ensure_parent(config.path("pairs"));
  write_pairs(pairs, config.path("pairs"));
  auto meta = provenance(config);
  meta["teacher_normalizer"] = format_score(exp.teacher->normalizer());
  std::string held;
  for (const auto& q : exp.split.held_out) held += (held.empty() ? "" : ",") + q.query_id;
  meta["held_out"] = held;
  write_meta(config.path("pairs"), meta);
  return pairs;
}

TrainResult train_stage(const ExperimentConfig& config, const std::string& model) {
  const Experiment exp = load_experiment(config);
  std::vector<std::string> missing = missing_paths(config, {"pairs"});
  if (!missing.empty()) throw ConfigError(missing);
  const auto pairs = load_pairs(config.path("pairs"));
  const auto on_step = [&model](int step, double loss) {
    if (step % 25 == 0) log::info("train " + model + " step " + std::to_string(step) + " loss " + std::to_string(loss));
  };
  TrainResult result;
  std::filesystem::path out;
  if (model == "rrk-full") {
    const Checkpoint comp = load_frozen_compressor(config);
    auto index = std::make_shared<EmbeddingIndex>(EmbeddingIndex::load(config.path("index")));
    const std::string comp_hash = checkpoint_hash(comp);
    auto ih = index->metadata().find("compressor_hash");
    if (ih == index->metadata().end() || ih->second != comp_hash) {
      throw std::runtime_error("index " + config.path("index").string() + " was not built by compressor " + comp_hash);
    }
    const Checkpoint init = init_reranker(config.model, config.reranker_init, &comp);
    result = train(pairs, exp.split.train, init, config.train, compressed_inputs(index), on_step);
    result.model.metadata["compressor_hash"] = comp_hash;
    out = config.path("reranker");
  } else if (model == "textual") {
    const Checkpoint init = init_textual(config.model, config.textual_max_doc_len);
    TrainConfig tc = config.train;
    tc.trainable = config.textual_trainable;
    auto store = std::make_shared<DocumentStore>(exp.docs);
    result = train(pairs, exp.split.train, init, tc, textual_inputs(store, config.textual_max_doc_len), on_step);
    result.model.metadata["max_doc_len"] = std::to_string(config.textual_max_doc_len);
    out = config.path("textual");
  } else {
    throw std::invalid_argument("cannot train model '" + model + "' (expected rrk-full or textual)");
  }
  stamp(result.model.metadata, config);
  result.model.metadata["variant"] = model;
  ensure_parent(out);
  save_checkpoint(result.model, out);
  write_loss_trace(result.loss_trace, std::filesystem::path(config.paths.out) / ("loss_" + model + ".csv"));
  if (result.aborted) throw std::runtime_error("training aborted: " + result.abort_reason);
  return result;
}

void check_compatible(const Checkpoint& reranker, const EmbeddingIndex& index) {
  auto a = reranker.metadata.find("compressor_hash");
  auto b = index.metadata().find("compressor_hash");
  if (a == reranker.metadata.end() || b == index.metadata().end()) {
    throw std::runtime_error("reranker or index lacks compressor provenance");
  }
  if (a->second != b->second) {
    throw std::runtime_error("reranker was trained against compressor " + a->second + " but the index was built by " +
                             b->second);
  }
}

std::unique_ptr<Scorer> load_scorer(const Experiment& exp, const std::string& model) {
  const ExperimentConfig& config = exp.config;
  if (model == "teacher") return std::make_unique<TeacherScorer>(*exp.teacher);
  if (model == "first-stage") return std::make_unique<Bm25Scorer>(exp.bm25);
  if (model == "rrk-full" || model == "rrk-half") {
    auto ckpt = load_checkpoint(config.path("reranker"));
    auto index = std::make_shared<EmbeddingIndex>(EmbeddingIndex::load(config.path("index")));
    check_compatible(ckpt, *index);
    if (model == "rrk-half") ckpt = half_depth(ckpt);
    return std::make_unique<CompressedScorer>(std::make_shared<Checkpoint>(std::move(ckpt)), index, model);
  }
  if (model == "textual") {
    auto ckpt = std::make_shared<Checkpoint>(load_checkpoint(config.path("textual")));
    return std::make_unique<TextualScorer>(ckpt, std::make_shared<DocumentStore>(exp.docs), config.textual_max_doc_len);
  }
  throw std::invalid_argument("unknown model '" + model + "'");
}

Run rerank_stage(const ExperimentConfig& config, const std::string& model, const std::filesystem::path& out,
                 bool held_out_only) {
  const Experiment exp = load_experiment(config);
  std::vector<std::string> missing = missing_paths(config, {"first_stage"});
  if (!missing.empty()) throw ConfigError(missing);
  const Run first = load_run(config.path("first_stage"));
  const auto scorer = load_scorer(exp, model);
  Run run = rerank_run(held_out_only ? exp.split.held_out : exp.queries, first, *scorer, 256, thread_count());
  ensure_parent(out);
  write_run(run, out);
  auto meta = provenance(config);
  meta["tag"] = run.tag;
  meta["model"] = model;
  if (model == "rrk-full" || model == "rrk-half") {
    meta["checkpoint_hash"] = checkpoint_hash(load_checkpoint(config.path("reranker")));
  }
  write_meta(out, meta);
  return run;
}

double mean_kendall_tau(const std::vector<Query>& queries, const Run& first_stage, const Scorer& student,
                        const Scorer& teacher) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& q : queries) {
    auto it = first_stage.queries.find(q.query_id);
    if (it == first_stage.queries.end() || it->second.size() < 2) continue;
    std::map<std::string, double> a, b;
    for (const auto& d : it->second) {
      a[d.doc_id] = student.score(q, d.doc_id);
      b[d.doc_id] = teacher.score(q, d.doc_id);
    }
    total += kendall_tau(a, b);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("mean_kendall_tau: no candidate lists");
  return total / static_cast<double>(n);
}

LatencyReport bench_stage(const ExperimentConfig& config, const std::vector<std::string>& models,
                          const BenchConfig& bench, const std::filesystem::path& csv) {
  const Vocabulary vocab(config.model.l_memory);
  // Latency does not depend on weight values, so seeded inits stand in for
  // artifacts that have not been trained yet.
  auto compressor = std::make_shared<Checkpoint>();
  if (std::filesystem::exists(config.path("compressor"))) {
    *compressor = load_frozen_compressor(config);
  } else {
    log::info("bench: no compressor at " + config.path("compressor").string() + ", using a seeded init");
    *compressor = init_checkpoint(compressor_config(config.model), {});
    compressor->set_frozen(true);
  }
  auto reranker = std::make_shared<Checkpoint>();
  if (std::filesystem::exists(config.path("reranker"))) {
    *reranker = load_checkpoint(config.path("reranker"));
  } else {
    log::info("bench: no reranker at " + config.path("reranker").string() + ", using a seeded init");
    *reranker = init_reranker(config.model, RerankerInit::Random);
  }
  int max_len = 0;
  for (int l : bench.lengths) max_len = std::max(max_len, l);

  // Offline compression is shared by every compressed variant.
  auto indexes = std::make_shared<std::map<std::string, std::shared_ptr<EmbeddingIndex>>>();
  auto index_for = [compressor, indexes](const std::vector<Document>& docs) {
    const std::string key = docs.empty() ? "" : docs.front().doc_id + "/" + std::to_string(docs.size());
    auto it = indexes->find(key);
    if (it != indexes->end()) return it->second;
    auto idx = std::make_shared<EmbeddingIndex>(build_index(docs, *compressor));
    (*indexes)[key] = idx;
    return idx;
  };

  std::vector<BenchVariant> variants;
  for (const auto& m : models) {
    if (m == "rrk-full" || m == "rrk-half") {
      auto ckpt = std::make_shared<const Checkpoint>(m == "rrk-half" ? half_depth(*reranker) : *reranker);
      variants.push_back({m, [ckpt, index_for, m](const std::vector<Document>& docs) {
                            auto idx = index_for(docs);
                            BenchTarget t;
                            t.scorer = std::make_unique<CompressedScorer>(ckpt, idx, m);
                            t.lookup = [idx](std::span<const std::string> ids) {
                              for (const auto& id : ids) {
                                const Matrix m = idx->lookup_matrix(id);
                                if (m.size() == 0) throw std::logic_error("empty lookup");
                              }
                            };
                            return t;
                          }});
    } else if (m == "textual") {
      std::shared_ptr<const Checkpoint> ckpt;
      const int need = config.model.query_budget + max_len + 2;
      if (std::filesystem::exists(config.path("textual"))) {
        auto loaded = std::make_shared<Checkpoint>(load_checkpoint(config.path("textual")));
        if (loaded->config.max_seq_len >= need) ckpt = loaded;
      }
      if (!ckpt) {
        log::info("bench: textual scorer sized for " + std::to_string(max_len) + "-token documents from a seeded init");
        ckpt = std::make_shared<const Checkpoint>(init_textual(config.model, max_len));
      }
      variants.push_back({m, [ckpt, max_len](const std::vector<Document>& docs) {
                            BenchTarget t;
                            t.scorer = std::make_unique<TextualScorer>(ckpt, std::make_shared<DocumentStore>(docs), max_len);
                            return t;
                          }});
    } else {
      throw std::invalid_argument("unknown bench model '" + m + "' (expected rrk-full, rrk-half or textual)");
    }
  }
  LatencyReport report = latency_bench(variants, bench, vocab);
  ensure_parent(csv);
  emit_curves(report, csv);
  return report;
}

std::map<std::string, MetricReport> run_pipeline(const ExperimentConfig& config) {
  gen_data(config);
  pretrain_stage(config);
  build_index_stage(config);
  retrieve_stage(config);
  make_pairs_stage(config);
  train_stage(config, "rrk-full");
  const Qrels qrels = load_qrels(config.path("qrels"));
  std::map<std::string, MetricReport> reports;
  for (const char* model : {"first-stage", "teacher", "rrk-full"}) {
    const auto run_path = std::filesystem::path(config.paths.out) / (std::string("run_") + model + ".txt");
    const Run run = rerank_stage(config, model, run_path, true);
    MetricReport r = ndcg_at_k(run, qrels, config.eval.k);
    const auto report_path = std::filesystem::path(config.paths.out) / (std::string("report_") + model + ".tsv");
    write_report(r, report_path);
    auto meta = provenance(config);
    meta["model"] = model;
    meta["metric"] = "ndcg@" + std::to_string(config.eval.k);
    write_meta(report_path, meta);
    reports[model] = std::move(r);
  }
  return reports;
}

}  // namespace rrk
