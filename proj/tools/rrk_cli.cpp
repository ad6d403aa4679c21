// rrk: command-line driver for the compressed-representation reranking pipeline.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rrk/checkpoint.hpp"
#include "rrk/config.hpp"
#include "rrk/log.hpp"
#include "rrk/metrics.hpp"
#include "rrk/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string out_dir, seed, corpus, queries, qrels, index, checkpoint, compressor;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file (key = value)");
  cmd->add_option("--set", f.sets, "Override a config key: key=value (repeatable)");
  cmd->add_option("--out-dir", f.out_dir, "Artifact directory (paths.out)");
  cmd->add_option("--seed", f.seed, "Experiment seed");
  cmd->add_option("--corpus", f.corpus, "Corpus file (paths.corpus)");
  cmd->add_option("--queries", f.queries, "Queries file (paths.queries)");
  cmd->add_option("--qrels-path", f.qrels, "Qrels file (paths.qrels)");
  cmd->add_option("--index", f.index, "Embedding index (paths.index)");
  cmd->add_option("--checkpoint", f.checkpoint, "Reranker checkpoint (paths.reranker)");
  cmd->add_option("--compressor", f.compressor, "Compressor checkpoint (paths.compressor)");
}

rrk::ExperimentConfig resolve(const CommonFlags& f) {
  std::map<std::string, std::string> overrides;
  std::vector<std::string> problems;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      problems.push_back("--set expects key=value, got '" + s + "'");
      continue;
    }
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  const std::pair<const std::string*, const char*> direct[] = {
      {&f.out_dir, "paths.out"},  {&f.seed, "seed"},   {&f.corpus, "paths.corpus"},
      {&f.queries, "paths.queries"}, {&f.qrels, "paths.qrels"}, {&f.index, "paths.index"},
      {&f.checkpoint, "paths.reranker"}, {&f.compressor, "paths.compressor"}};
  for (const auto& [value, key] : direct) {
    if (!value->empty()) overrides[key] = *value;
  }
  if (!problems.empty()) throw rrk::ConfigError(problems);
  return f.config.empty() ? rrk::parse_config("", overrides) : rrk::load_config(f.config, overrides);
}

std::vector<int> parse_lengths(const std::string& csv) {
  std::vector<int> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 1) throw rrk::ConfigError({"--lengths: bad length '" + item + "'"});
    out.push_back(v);
  }
  if (out.empty()) throw rrk::ConfigError({"--lengths: empty list"});
  return out;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int parse_metric_cutoff(const std::string& metric) {
  const std::string prefix = "ndcg@";
  if (metric.rfind(prefix, 0) != 0) throw rrk::ConfigError({"--metric: only ndcg@k is supported, got '" + metric + "'"});
  std::size_t used = 0;
  int k = 0;
  try {
    k = std::stoi(metric.substr(prefix.size()), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != metric.size() - prefix.size()) throw rrk::ConfigError({"--metric: bad cutoff in '" + metric + "'"});
  if (k < 1) throw rrk::ConfigError({"--metric: cutoff must be >= 1"});
  return k;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rrk: rerank documents from compressed representations"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  CommonFlags f;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus, queries, qrels and planted signal");
  auto* pre = app.add_subcommand("pretrain-compressor", "Pretrain and freeze the compressor");
  auto* bidx = app.add_subcommand("build-index", "Compress every document offline into the embedding index");
  auto* ret = app.add_subcommand("retrieve", "Write the BM25 first-stage run");
  auto* pairs = app.add_subcommand("make-pairs", "Sample distillation pairs from the teacher-reranked top-k");
  auto* tr = app.add_subcommand("train", "Distill the teacher into a student scorer");
  auto* rr = app.add_subcommand("rerank", "Rerank the first-stage run");
  auto* ev = app.add_subcommand("eval", "Evaluate a run against qrels");
  auto* be = app.add_subcommand("bench", "Latency versus document length");
  auto* vc = app.add_subcommand("validate-config", "Check a config and report derived values");
  auto* pl = app.add_subcommand("pipeline", "Run gen-data through eval");
  for (auto* c : {gen, pre, bidx, ret, pairs, tr, rr, ev, be, vc, pl}) add_common(c, f);

  std::string model = "rrk-full";
  tr->add_option("--model", model, "rrk-full or textual")->check(CLI::IsMember({"rrk-full", "textual"}));
  std::string run_out;
  bool all_queries = false;
  rr->add_option("--model", model, "rrk-full, rrk-half, textual, teacher or first-stage")
      ->check(CLI::IsMember({"rrk-full", "rrk-half", "textual", "teacher", "first-stage"}));
  rr->add_option("--out", run_out, "Output run file")->required();
  rr->add_flag("--all-queries", all_queries, "Rerank every query, not only the held-out split");
  ret->add_option("--out", run_out, "Output run file (default paths.first_stage)");

  std::string run_path, qrels_path, metric = "ndcg@10", report_path;
  ev->add_option("--run", run_path, "Run file")->required();
  ev->add_option("--qrels", qrels_path, "Qrels file")->required();
  ev->add_option("--metric", metric, "Metric, ndcg@k");
  ev->add_option("--report", report_path, "Per-query TSV report");

  std::string lengths = "128,256,512,768,1024", models = "rrk-full,rrk-half,textual", csv_out;
  rrk::BenchConfig bench;
  be->add_option("--lengths", lengths, "Comma-separated document lengths in tokens");
  be->add_option("--models", models, "Comma-separated variants");
  be->add_option("--out", csv_out, "Output CSV")->required();
  be->add_option("--repetitions", bench.repetitions, "Timed repetitions per cell (>= 20)");
  be->add_option("--warmup", bench.warmup, "Warmup repetitions per cell (>= 3)");
  be->add_option("--min-timed-ms", bench.min_timed_ms, "Minimum timed milliseconds per cell");
  be->add_option("--n-queries", bench.n_queries, "Workload queries");
  be->add_option("--docs-per-query", bench.docs_per_query, "Candidates per query");
  be->add_option("--batch", bench.batch, "Scoring batch size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n" << app.help();
    return 2;
  }

  rrk::log::threshold() = log_level == "debug"  ? rrk::log::Level::Debug
                          : log_level == "info" ? rrk::log::Level::Info
                          : log_level == "warn" ? rrk::log::Level::Warn
                                                : rrk::log::Level::Error;
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const rrk::ExperimentConfig cfg = resolve(f);
    if (name == "validate-config") {
      if (f.config.empty()) throw rrk::ConfigError({"validate-config needs --config"});
      std::vector<std::string> missing = rrk::missing_paths(cfg, {"corpus", "queries", "qrels"});
      if (!missing.empty()) throw rrk::ConfigError(missing);
      std::cout << "effective_input_length=" << cfg.effective_input_length() << "\n";
      std::cout << "config_hash=" << cfg.hash() << "\n";
    } else if (name == "gen-data") {
      const auto suite = rrk::gen_data(cfg);
      std::cout << "docs=" << suite.docs.size() << " queries=" << suite.queries.size() << "\n";
    } else if (name == "pretrain-compressor") {
      const auto r = rrk::pretrain_stage(cfg);
      std::cout << "final_loss=" << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << "\n";
    } else if (name == "build-index") {
      const auto idx = rrk::build_index_stage(cfg);
      std::cout << "indexed=" << idx.size() << "\n";
    } else if (name == "retrieve") {
      rrk::ExperimentConfig c = cfg;
      if (!run_out.empty()) c.paths.first_stage = run_out;
      const auto run = rrk::retrieve_stage(c);
      std::cout << "queries=" << run.queries.size() << "\n";
    } else if (name == "make-pairs") {
      const auto p = rrk::make_pairs_stage(cfg);
      std::cout << "pairs=" << p.size() << "\n";
    } else if (name == "train") {
      const auto r = rrk::train_stage(cfg, model);
      std::cout << "steps=" << r.loss_trace.size();
      for (std::size_t e = 0; e < r.epoch_means.size(); ++e) std::cout << " epoch" << e << "_mse=" << r.epoch_means[e];
      std::cout << "\n";
    } else if (name == "rerank") {
      const auto run = rrk::rerank_stage(cfg, model, run_out, !all_queries);
      std::cout << "queries=" << run.queries.size() << "\n";
    } else if (name == "eval") {
      const int k = parse_metric_cutoff(metric);
      if (!f.index.empty() || !f.checkpoint.empty()) {
        const auto idx = rrk::EmbeddingIndex::load(cfg.path("index"));
        rrk::check_compatible(rrk::load_checkpoint(cfg.path("reranker")), idx);
      }
      const auto report = rrk::ndcg_at_k(rrk::load_run(run_path), rrk::load_qrels(qrels_path), k);
      if (!report_path.empty()) rrk::write_report(report, report_path);
      std::cout << metric << "\t" << rrk::format_score(report.mean) << "\n";
      if (report.excluded) std::cerr << "excluded " << report.excluded << " queries with no relevant documents\n";
    } else if (name == "bench") {
      bench.lengths = parse_lengths(lengths);
      bench.seed = cfg.seed;
      const auto report = rrk::bench_stage(cfg, split_list(models), bench, csv_out);
      std::cout << "rows=" << report.rows.size() << "\n";
    } else if (name == "pipeline") {
      for (const auto& [m, r] : rrk::run_pipeline(cfg)) {
        std::cout << m << "\tndcg@" << r.k << "\t" << rrk::format_score(r.mean) << "\n";
      }
    }
  } catch (const rrk::ConfigError& e) {
    std::cerr << "error: " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << name << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
