// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "rrk/checkpoint.hpp"
#include "rrk/compressor.hpp"
#include "rrk/config.hpp"
#include "rrk/embedding_index.hpp"
#include "rrk/latency.hpp"
#include "rrk/log.hpp"
#include "rrk/metrics.hpp"
#include "rrk/pipeline.hpp"
#include "rrk/random.hpp"

using namespace rrk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// Pipeline runs shared by the criteria that need trained artifacts.
class Runs {
public:
  explicit Runs(fs::path work) : work_(std::move(work)) {}

  ExperimentConfig config(int run) const {
    return parse_config("", {{"paths.out", (work_ / ("run" + std::to_string(run))).string()}});
  }

  const std::map<std::string, MetricReport>& reports(int run) {
    auto& slot = run == 1 ? first_ : second_;
    if (!slot) {
      const ExperimentConfig c = config(run);
      fs::remove_all(c.paths.out);
      Timer t;
      slot = run_pipeline(c);
      (run == 1 ? seconds_first_ : seconds_second_) = t.seconds();
      std::cout << "  pipeline run " << run << " finished in " << fmt(t.seconds(), 4) << " s" << std::endl;
    }
    return *slot;
  }

  double seconds(int run) const { return run == 1 ? seconds_first_ : seconds_second_; }

private:
  fs::path work_;
  std::optional<std::map<std::string, MetricReport>> first_, second_;
  double seconds_first_ = 0, seconds_second_ = 0;
};

// 1. Decoder input length of the compressed path does not depend on the document.
Outcome fixed_input(Runs&) {
  Timer t;
  const ModelConfig mc;
  Checkpoint comp = init_checkpoint(compressor_config(mc), {});
  comp.set_frozen(true);
  const Vocabulary vocab(mc.l_memory);
  std::vector<Document> docs;
  Rng rng(1);
  for (int len : {64, 128, 512, 1024}) {
    docs.push_back(make_document("len" + std::to_string(len), synthetic_text_of_length(rng, len), vocab));
    if (static_cast<int>(docs.back().tokens.size()) != len) return {false, "document length mismatch"};
  }
  auto index = std::make_shared<const EmbeddingIndex>(build_index(docs, comp));
  auto model = std::make_shared<const Checkpoint>(init_reranker(mc, RerankerInit::FromCompressor, &comp));
  const CompressedScorer scorer(model, index);
  std::size_t checked = 0;
  for (std::size_t qlen : {1u, 5u, 22u, 23u, 24u, 40u}) {
    const Query q = make_query("q", synthetic_text_of_length(rng, qlen), vocab);
    const int want = static_cast<int>(std::min<std::size_t>(qlen, 23)) + 8 + 1;
    for (const auto& d : docs) {
      Tape tape(false);
      ParamBinder params(tape, *model);
      const Var input = compressed_input(params, budget_query(q, mc.query_budget), index->lookup_matrix(d.doc_id));
      const int rows = static_cast<int>(input.value().rows());
      if (scorer.input_length(q) != want || rows != want) {
        return {false, "query " + std::to_string(qlen) + " doc " + d.doc_id + ": length " + std::to_string(rows) +
                           ", expected " + std::to_string(want)};
      }
      if (qlen >= 23 && rows != 32) return {false, "full budget input is " + std::to_string(rows)};
      if (!std::isfinite(scorer.score(q, d.doc_id))) return {false, "non-finite score"};
      ++checked;
    }
  }
  const double s = t.seconds();
  return {s < 1.0, std::to_string(checked) + " (query, document) inputs of length min(|q|,23)+9, 32 at full budget; " +
                       fmt(s, 3) + " s (limit 1 s)"};
}

// 2. Latency curves over document length.
Outcome constant_efficiency(Runs&) {
  Timer t;
  const ExperimentConfig config = parse_config("", {{"paths.out", "/nonexistent-bench-artifacts"}});
  BenchConfig bench;  // 50 queries x 50 docs, batch 256, lengths 128..1024
  const LatencyReport r = bench_stage(config, {"rrk-full", "rrk-half", "textual"}, bench,
                                      fs::temp_directory_path() / "rrk_acceptance_curves.csv");
  double lo = 1e300, hi = 0, worst_half = 0;
  for (int len : bench.lengths) {
    const double full = r.at("rrk-full", len).median_ms;
    lo = std::min(lo, full);
    hi = std::max(hi, full);
    worst_half = std::max(worst_half, r.at("rrk-half", len).median_ms / full);
  }
  const double flat = hi / lo - 1.0;
  const double textual = r.at("textual", 1024).median_ms / r.at("textual", 256).median_ms;
  const double s = t.seconds();
  const bool pass = flat <= 0.15 && textual >= 2.0 && worst_half <= 0.65 && s < 600;
  std::ostringstream d;
  d << "rrk-full spread " << fmt(100 * flat, 3) << "% (max 15%), textual 1024/256 " << fmt(textual, 3)
    << "x (min 2x), rrk-half/rrk-full worst " << fmt(worst_half, 3) << " (max 0.65), " << fmt(s, 3)
    << " s (limit 600 s)";
  for (int len : bench.lengths) {
    d << "\n    len " << len << ": rrk-full " << fmt(r.at("rrk-full", len).median_ms) << " ms, rrk-half "
      << fmt(r.at("rrk-half", len).median_ms) << " ms, textual " << fmt(r.at("textual", len).median_ms)
      << " ms, lookup " << fmt(r.at("rrk-full", len).lookup_ms) << " ms";
  }
  return {pass, d.str()};
}

// Decoder blocks [from, n_layers) with their adapters, the final norm and the
// head, renumbered from 0, and zero positions so that feeding it hidden[from]
// reproduces the remaining computation of the full model exactly.
Checkpoint suffix_model(const Checkpoint& full, int from) {
  Checkpoint out;
  out.config = full.config;
  out.config.n_layers = full.config.n_layers - from;
  out.params["pos_emb"] = Matrix::Zero(full.at("pos_emb").rows(), full.at("pos_emb").cols());
  for (const auto& [name, value] : full.params) {
    if (!name.starts_with("layers.")) {
      if (name.starts_with("ln_f.") || name.starts_with("head.")) out.params[name] = value;
      continue;
    }
    const std::size_t dot = name.find('.', 7);
    const int layer = std::stoi(name.substr(7, dot - 7));
    if (layer >= from) out.params[layer_prefix(layer - from) + name.substr(dot + 1)] = value;
  }
  return out;
}

// Which block a parameter belongs to: -1 for embeddings, n_layers for the
// final norm and head.
int owner_layer(const std::string& name, int n_layers) {
  if (name == "tok_emb" || name == "pos_emb") return -1;
  if (!name.starts_with("layers.")) return n_layers;
  return std::stoi(name.substr(7, name.find('.', 7) - 7));
}

// 3. Every gradient element of the desk-scale decoder with adapters and head
// under MSE against central finite differences.
Outcome gradients(Runs&) {
  Timer t;
  const ModelConfig mc;
  Checkpoint ckpt = init_reranker(mc, RerankerInit::Random);
  Rng rng(3);
  // Non-zero B so that A receives gradient.
  for (auto& [name, value] : ckpt.params) {
    if (name.ends_with(".lora_b")) {
      for (auto& v : value.reshaped()) v = 0.05 * rng.normal();
    }
  }
  const TokenSeq query{104};
  Matrix memory(mc.l_memory, mc.d_model);
  for (auto& v : memory.reshaped()) v = rng.normal();
  const Matrix target = Matrix::Constant(1, 1, 0.3);
  const int seq = static_cast<int>(query.size()) + mc.l_memory + 1;

  std::map<std::string, Matrix> analytic;
  std::vector<Matrix> hidden;
  double base = 0;
  {
    Tape tape;
    ParamBinder params(tape, ckpt);
    const Var loss = ops::mse(eos_score(params, compressed_input(params, query, memory)), target);
    tape.backward(loss);
    for (const auto& [name, v] : params.bound()) analytic[name] = tape.grad(v);
    base = loss.value()(0, 0);
  }
  {
    Tape tape(false);
    ParamBinder params(tape, ckpt);
    const DecoderOutput out = decoder_forward(params, compressed_input(params, query, memory), AttentionMask::causal(seq));
    for (const Var& h : out.hidden) hidden.push_back(h.value());
  }
  auto full_loss = [&]() {
    Tape tape(false);
    ParamBinder params(tape, ckpt);
    return ops::mse(eos_score(params, compressed_input(params, query, memory)), target).value()(0, 0);
  };
  if (analytic.size() != ckpt.params.size()) return {false, "some parameters are not bound by the forward"};
  if (full_loss() != base) return {false, "inference loss differs from the recorded one"};

  std::vector<Checkpoint> suffixes;
  for (int from = 0; from <= mc.n_layers; ++from) suffixes.push_back(suffix_model(ckpt, from));
  auto suffix_loss = [&](int from) {
    Tape tape(false);
    ParamBinder params(tape, suffixes[static_cast<std::size_t>(from)]);
    return ops::mse(eos_score(params, tape.constant(hidden[static_cast<std::size_t>(from)])), target).value()(0, 0);
  };
  for (int from = 0; from <= mc.n_layers; ++from) {
    if (suffix_loss(from) != base) return {false, "suffix from block " + std::to_string(from) + " is not exact"};
  }

  // Token and position rows the input never reads: the loss must be
  // bit-identical with all of them perturbed at once, and their analytic
  // gradient exactly zero.
  std::set<TokenId> used_tokens(query.begin(), query.end());
  used_tokens.insert(Vocabulary(mc.l_memory).eos_id());
  auto unused = [&](const std::string& name, Eigen::Index row) {
    if (name == "tok_emb") return used_tokens.count(static_cast<TokenId>(row)) == 0;
    if (name == "pos_emb") return row >= seq;
    return false;
  };
  std::size_t unused_count = 0;
  for (const char* name : {"tok_emb", "pos_emb"}) {
    Matrix& w = ckpt.params.at(name);
    const Matrix saved = w;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (!unused(name, r)) continue;
      w.row(r).array() += 1e-3;
      unused_count += static_cast<std::size_t>(w.cols());
      if (analytic.at(name).row(r).cwiseAbs().maxCoeff() != 0.0) {
        return {false, std::string(name) + " row " + std::to_string(r) + " has a gradient but is never read"};
      }
    }
    const double moved = full_loss();
    w = saved;
    if (moved != base) return {false, std::string(name) + ": unread rows change the loss"};
  }

  const double h = 1e-5, floor = 1e-4, tol = 1e-5;
  double worst = 0;
  std::string worst_at;
  std::size_t n = 0;
  for (const auto& [name, g] : analytic) {
    const int layer = owner_layer(name, mc.n_layers);
    Checkpoint& model = layer < 0 ? ckpt : suffixes[static_cast<std::size_t>(layer)];
    std::string local = name;
    if (layer >= 0 && layer < mc.n_layers) local = layer_prefix(0) + name.substr(name.find('.', 7) + 1);
    Matrix& w = model.params.at(local);
    auto eval = [&]() { return layer < 0 ? full_loss() : suffix_loss(layer); };
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (unused(name, r)) continue;
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double keep = w(r, c);
        w(r, c) = keep + h;
        const double up = eval();
        w(r, c) = keep - h;
        const double down = eval();
        w(r, c) = keep;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(numeric - g(r, c)) / std::max({std::abs(numeric), std::abs(g(r, c)), floor});
        if (rel > worst) {
          worst = rel;
          worst_at = name + "(" + std::to_string(r) + "," + std::to_string(c) + ")";
        }
        ++n;
      }
    }
  }
  const double s = t.seconds();
  return {worst < tol && s < 120,
          std::to_string(n) + " gradient elements over " + std::to_string(analytic.size()) +
              " tensors by central differences (h=1e-5), plus " + std::to_string(unused_count) +
              " unread embedding entries with zero gradient; worst relative error " + fmt(worst, 3) + " at " +
              worst_at + " (limit 1e-5, denominator floor 1e-4); " + fmt(s, 3) + " s (limit 120 s)"};
}

std::vector<double> epoch_means(const std::vector<double>& trace, std::size_t steps_per_epoch) {
  std::vector<double> out;
  for (std::size_t i = 0; i < trace.size(); i += steps_per_epoch) {
    const std::size_t end = std::min(trace.size(), i + steps_per_epoch);
    out.push_back(std::accumulate(trace.begin() + static_cast<std::ptrdiff_t>(i),
                                  trace.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
                  static_cast<double>(end - i));
  }
  return out;
}

std::vector<double> read_trace(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) out.push_back(std::stod(line.substr(line.find(',') + 1)));
  return out;
}

// 4. Distillation on the seed-7 suite.
Outcome distillation(Runs& runs) {
  const auto& reports = runs.reports(1);
  const ExperimentConfig config = runs.config(1);
  const Experiment exp = load_experiment(config);
  const auto pairs = load_pairs(config.path("pairs"));
  const auto trace = read_trace(fs::path(config.paths.out) / "loss_rrk-full.csv");
  const std::size_t per_epoch = (pairs.size() + config.train.batch_size - 1) / config.train.batch_size;
  const auto means = epoch_means(trace, per_epoch);
  if (means.size() != static_cast<std::size_t>(config.train.epochs)) {
    return {false, "expected " + std::to_string(config.train.epochs) + " epochs, trace has " + std::to_string(means.size())};
  }
  const bool mse_ok = means.back() < 0.5 * means.front();

  const Run first = load_run(config.path("first_stage"));
  const auto trained = load_scorer(exp, "rrk-full");
  const Checkpoint comp = load_checkpoint(config.path("compressor"));
  auto index = std::make_shared<const EmbeddingIndex>(EmbeddingIndex::load(config.path("index")));
  const CompressedScorer untrained(
      std::make_shared<const Checkpoint>(init_reranker(config.model, config.reranker_init, &comp)), index);
  const double tau_trained = mean_kendall_tau(exp.split.held_out, first, *trained, *exp.teacher);
  const double tau_untrained = mean_kendall_tau(exp.split.held_out, first, untrained, *exp.teacher);
  const bool tau_ok = tau_trained > tau_untrained;

  const double student = reports.at("rrk-full").mean, teacher = reports.at("teacher").mean;
  const bool ndcg_ok = student >= 0.95 * teacher;
  std::ostringstream d;
  d << pairs.size() << " pairs, " << trace.size() << " steps; epoch-mean MSE " << fmt(means.front()) << " -> "
    << fmt(means.back()) << " (ratio " << fmt(means.back() / means.front(), 3) << ", need < 0.5) "
    << (mse_ok ? "ok" : "FAILED") << "; held-out tau " << fmt(tau_untrained) << " untrained -> " << fmt(tau_trained)
    << " trained " << (tau_ok ? "ok" : "FAILED") << "; held-out nDCG@10 rrk-full " << fmt(student) << " vs teacher "
    << fmt(teacher) << " (ratio " << fmt(teacher > 0 ? student / teacher : 0, 3) << ", need >= 0.95) "
    << (ndcg_ok ? "ok" : "FAILED") << "; first-stage " << fmt(reports.at("first-stage").mean)
    << "; pipeline " << fmt(runs.seconds(1), 4) << " s (target 1800 s)";
  return {mse_ok && tau_ok && ndcg_ok && runs.seconds(1) < 1800, d.str()};
}

// 5. Parameters outside the trainable set never move.
Outcome freeze_audits(Runs& runs) {
  runs.reports(1);
  const ExperimentConfig config = runs.config(1);
  const Checkpoint comp = load_checkpoint(config.path("compressor"));
  const Checkpoint trained = load_checkpoint(config.path("reranker"));
  const EmbeddingIndex index = EmbeddingIndex::load(config.path("index"));
  if (!comp.frozen()) return {false, "compressor checkpoint is not marked frozen"};
  const std::string hash = checkpoint_hash(comp);
  if (trained.metadata.at("compressor_hash") != hash || index.metadata().at("compressor_hash") != hash) {
    return {false, "compressor hash after training differs from the one recorded before it"};
  }
  // Replaying the training stage in-process: the compressor object handed
  // to index building and reranker init must be untouched afterwards.
  const Checkpoint comp_before = comp;
  const Checkpoint init = init_reranker(config.model, config.reranker_init, &comp);
  if (!same_bits(comp.at("tok_emb"), comp_before.at("tok_emb"))) return {false, "init changed the compressor"};

  std::size_t base = 0, adapted = 0, moved = 0;
  for (const auto& [name, value] : init.params) {
    const bool trainable = is_lora_param(name) || is_head_param(name);
    if (!trained.has(name)) return {false, "trained checkpoint lacks " + name};
    const bool same = same_bits(value, trained.at(name));
    if (!trainable && !same) return {false, "frozen base weight " + name + " changed"};
    if (trainable) {
      ++adapted;
      moved += !same;
    } else {
      ++base;
    }
  }
  if (trained.params.size() != init.params.size()) return {false, "trained checkpoint gained parameters"};
  std::size_t comp_same = 0;
  for (const auto& [name, value] : comp_before.params) comp_same += same_bits(value, comp.at(name));
  const bool pass = moved > 0 && comp_same == comp_before.params.size();
  return {pass, "compressor hash " + hash + " identical before and after training (" + std::to_string(comp_same) +
                    " tensors); " + std::to_string(base) + " base tensors bit-identical to init; " +
                    std::to_string(moved) + " of " + std::to_string(adapted) + " LoRA/head tensors updated"};
}

// 6. Index-backed and online compression agree.
Outcome offline_online(Runs& runs) {
  runs.reports(1);
  const ExperimentConfig config = runs.config(1);
  const Experiment exp = load_experiment(config);
  const Checkpoint comp = load_checkpoint(config.path("compressor"));
  auto index = std::make_shared<const EmbeddingIndex>(EmbeddingIndex::load(config.path("index")));
  for (const auto& d : exp.docs) {
    const MatrixF online = compress_tokens(d.tokens, comp).cast<float>();
    const auto stored = index->lookup(d.doc_id);
    if (stored.size() != static_cast<std::size_t>(online.size()) ||
        std::memcmp(stored.data(), online.data(), sizeof(float) * stored.size()) != 0) {
      return {false, d.doc_id + ": stored embeddings differ from online compression"};
    }
  }
  const CompressedScorer scorer(std::make_shared<const Checkpoint>(load_checkpoint(config.path("reranker"))), index);
  const Run first = load_run(config.path("first_stage"));
  const DocumentStore store(exp.docs);
  const Checkpoint& model = scorer.model();
  double worst = 0, raw_abs = 0, raw_rel = 0;
  std::size_t n = 0;
  for (const auto& q : exp.queries) {
    const TokenSeq tokens = budget_query(q, model.config.query_budget);
    for (const auto& c : first.queries.at(q.query_id)) {
      const Matrix memory = compress_tokens(store.at(c.doc_id).tokens, comp);
      const double a = scorer.score(q, c.doc_id);
      const double b = scorer.score_memory(q, memory);
      worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}));
      // Informational: the same decoder fed the unrounded double memory.
      Tape tape(false);
      ParamBinder params(tape, model);
      const double r = eos_score(params, compressed_input(params, tokens, memory)).value()(0, 0);
      raw_abs = std::max(raw_abs, std::abs(a - r));
      raw_rel = std::max(raw_rel, std::abs(a - r) / std::max({std::abs(a), std::abs(r), 1e-12}));
      ++n;
    }
  }
  return {worst <= 1e-6, std::to_string(exp.docs.size()) + " documents bit-identical after single-precision cast; " +
                             std::to_string(n) + " scores, index vs online worst relative gap " + fmt(worst, 3) +
                             " (limit 1e-6); unrounded double memory differs by at most " + fmt(raw_abs, 3) +
                             " absolute, " + fmt(raw_rel, 3) + " relative"};
}

// 7. Metrics and retrieval against independent oracles.
Outcome oracles(Runs&) {
  std::size_t perms = 0;
  const std::vector<std::vector<int>> grade_sets{{0},       {2},       {1, 0},       {3, 3},       {0, 1, 2},
                                                 {3, 0, 0}, {2, 2, 1}, {0, 0, 0, 1}, {1, 1, 2, 3}, {3, 2, 1, 0},
                                                 {0, 2, 0, 1}};
  for (const auto& grades : grade_sets) {
    for (int k : {1, 2, 3, 4, 10}) {
      std::vector<std::size_t> idx(grades.size());
      std::iota(idx.begin(), idx.end(), 0);
      do {
        Qrels q;
        Run run;
        std::vector<int> ranked;
        for (std::size_t pos = 0; pos < idx.size(); ++pos) {
          const std::string id = "d" + std::to_string(idx[pos]);
          q.set("q", id, grades[idx[pos]]);
          run.queries["q"].push_back({id, static_cast<double>(idx.size() - pos)});
          ranked.push_back(grades[idx[pos]]);
        }
        if (std::all_of(grades.begin(), grades.end(), [](int g) { return g == 0; })) continue;
        const double got = ndcg_at_k(run, q, k).mean, want = oracle::brute_ndcg(ranked, k);
        if (std::abs(got - want) > 1e-12) return {false, "nDCG disagrees with the permutation oracle"};
        ++perms;
      } while (std::next_permutation(idx.begin(), idx.end()));
    }
  }

  const SyntheticSuite s = generate_synthetic_corpus(SyntheticConfig{}, Vocabulary(8));
  const InvertedIndex bm25(s.docs);
  const oracle::Bm25 exhaustive(s.docs);
  std::size_t lists = 0;
  for (const auto& q : s.queries) {
    const auto got = bm25.retrieve_topk(q.text, 50);
    const auto want = exhaustive.topk(q.text, 50);
    if (got.size() != want.size()) return {false, q.query_id + ": top-k size differs"};
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].doc_id != want[i].doc_id) return {false, q.query_id + ": rank " + std::to_string(i + 1) + " differs"};
      if (std::abs(got[i].score - want[i].score) > 1e-12 * std::abs(want[i].score)) {
        return {false, q.query_id + ": score differs"};
      }
    }
    ++lists;
  }

  Rng rng(17);
  std::size_t pairs = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.index(40);
    std::map<std::string, double> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "d" + std::to_string(1000 + i);
      a[id] = static_cast<double>(rng.index(t % 2 ? 6 : 1000));
      b[id] = static_cast<double>(rng.index(t % 3 ? 1000 : 5));
    }
    std::vector<double> va, vb;
    for (const auto& [id, x] : a) va.push_back(x), vb.push_back(b.at(id));
    if (std::abs(kendall_tau(a, b) - oracle::pair_count_tau(va, vb)) > 1e-12) {
      return {false, "Kendall tau disagrees with the pair-count oracle at pair " + std::to_string(t)};
    }
    ++pairs;
  }
  return {true, std::to_string(perms) + " judged-list permutations, " + std::to_string(lists) +
                    " BM25 top-50 lists (order and ties exact), " + std::to_string(pairs) + " Kendall tau pairs"};
}

// 8. The compressor reads only the first 128 tokens and nothing else is lost.
Outcome ceiling(Runs& runs) {
  runs.reports(1);
  const ExperimentConfig config = runs.config(1);
  const Experiment exp = load_experiment(config);
  const Checkpoint comp = load_checkpoint(config.path("compressor"));
  Rng rng(23);
  std::size_t appended = 0, changed = 0;
  std::vector<Matrix> seen;
  for (const auto& d : exp.docs) {
    std::string head = d.text;
    if (head.size() < kCompressorCeiling) head += " " + synthetic_text_of_length(rng, kCompressorCeiling);
    head.resize(kCompressorCeiling);
    const Matrix base = compress_tokens(tokenize(head, exp.vocab), comp);
    const Matrix longer = compress_tokens(tokenize(head + synthetic_text_of_length(rng, 1 + rng.index(300)), exp.vocab), comp);
    if (!same_bits(base, longer)) return {false, d.doc_id + ": tokens past the ceiling changed the embeddings"};
    ++appended;

    TokenSeq edited = d.tokens;
    const std::size_t span = std::min(edited.size(), kCompressorCeiling);
    const std::size_t pos = rng.index(span);
    edited[pos] = edited[pos] == 'a' ? 'b' : 'a';
    const Matrix own = compress_tokens(d.tokens, comp);
    if (same_bits(own, compress_tokens(edited, comp))) {
      return {false, d.doc_id + ": an edit at token " + std::to_string(pos) + " left the embeddings unchanged"};
    }
    ++changed;
    seen.push_back(own);
  }
  std::size_t clashes = 0;
  for (std::size_t i = 0; i < seen.size(); ++i)
    for (std::size_t j = i + 1; j < seen.size(); ++j) clashes += same_bits(seen[i], seen[j]);
  return {clashes == 0, std::to_string(appended) + " documents unchanged by appended tokens, " + std::to_string(changed) +
                            " changed by one in-ceiling edit, " + std::to_string(clashes) +
                            " identical embedding pairs among " + std::to_string(seen.size())};
}

// 9. Index file round trip and size calculator.
Outcome index_format(Runs& runs) {
  runs.reports(1);
  const ExperimentConfig config = runs.config(1);
  const fs::path original = config.path("index");
  const EmbeddingIndex loaded = EmbeddingIndex::load(original);
  const fs::path copy = fs::path(config.paths.out).parent_path() / "index_roundtrip.rrkidx";
  loaded.save(copy);
  const bool bytes_equal = read_file(original) == read_file(copy);
  const EmbeddingIndex again = EmbeddingIndex::load(copy);
  fs::remove(copy);
  const bool equal = again == loaded;

  bool linear = true;
  for (double n : {1.0, 1000.0, 8.8e6}) {
    linear = linear && index_size(2 * n, 8, 4096, 4).payload_bytes == 2 * index_size(n, 8, 4096, 4).payload_bytes;
  }
  const IndexSize full = index_size(8.8e6, 8, 4096, 4);
  const double bpv = implied_bytes_per_value(270e9, 8.8e6, 8, 4096);
  std::ostringstream d;
  d << "write/read/write byte-identical " << (bytes_equal ? "yes" : "NO") << ", reloaded index equal "
    << (equal ? "yes" : "NO") << ", payload linear in n_docs " << (linear ? "yes" : "NO")
    << "\n    note: 8.8e6 docs x 8 x 4096 x 4 B = " << fmt(full.payload_bytes, 4) << " B payload ("
    << fmt(full.total_bytes(), 4) << " B with header and id table); the reported 270 GB implies "
    << fmt(bpv, 3) << " bytes per value";
  return {bytes_equal && equal && linear, d.str()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

// 10. Two seed-7 pipeline runs produce identical bytes.
Outcome determinism(Runs& runs) {
  runs.reports(1);
  runs.reports(2);
  const auto a = tree(runs.config(1).paths.out), b = tree(runs.config(2).paths.out);
  std::size_t bytes = 0;
  for (const auto& [name, content] : a) {
    auto it = b.find(name);
    if (it == b.end()) return {false, name + " missing from run 2"};
    if (it->second != content) return {false, name + " differs between runs"};
    bytes += content.size();
  }
  if (a.size() != b.size()) return {false, "run 2 has extra files"};
  std::string names;
  for (const auto& [name, _] : a) names += (names.empty() ? "" : " ") + name;
  return {true, std::to_string(a.size()) + " files (" + std::to_string(bytes) + " bytes) byte-identical: " + names};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "rrk_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work, "Directory for pipeline runs");
  app.add_option("--only", only, "Criterion numbers to run (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  log::threshold() = log::Level::Warn;

  const std::vector<std::pair<std::string, std::function<Outcome(Runs&)>>> criteria{
      {"fixed decoder input length", fixed_input},
      {"constant-efficiency latency curve", constant_efficiency},
      {"gradient check of the full decoder", gradients},
      {"distillation fidelity", distillation},
      {"freeze audits", freeze_audits},
      {"offline/online equivalence", offline_online},
      {"oracle equivalence", oracles},
      {"compressor ceiling", ceiling},
      {"index format and size calculator", index_format},
      {"end-to-end determinism", determinism},
  };
  fs::create_directories(work);
  Runs runs(work);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    Outcome o;
    Timer t;
    try {
      o = criteria[i].second(runs);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " #" << number << " " << criteria[i].first << " [" << fmt(t.seconds(), 3)
              << " s]: " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
