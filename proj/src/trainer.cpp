#include "rrk/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rrk/adam.hpp"
#include "rrk/log.hpp"
#include "rrk/random.hpp"

namespace rrk {

std::string to_string(TrainableSet set) { return set == TrainableSet::All ? "all" : "lora+head"; }

TrainableSet trainable_set_from_string(const std::string& name) {
  if (name == "lora+head") return TrainableSet::LoraHead;
  if (name == "all") return TrainableSet::All;
  throw std::invalid_argument("unknown trainable set '" + name + "' (expected lora+head or all)");
}

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> v;
  if (epochs < 0) v.push_back("train.epochs must be >= 0");
  if (batch_size < 1) v.push_back("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) v.push_back("train.learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) v.push_back("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) v.push_back("train.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) v.push_back("train.eps must be > 0");
  return v;
}

void TrainConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid train config:";
  for (const auto& s : v) msg += " " + s + ";";
  throw std::invalid_argument(msg);
}

ParamBinder::Predicate trainable_predicate(TrainableSet set) {
  if (set == TrainableSet::All) return [](const std::string&) { return true; };
  return [](const std::string& name) { return is_lora_param(name) || is_head_param(name); };
}

QuerySplit split_queries(const std::vector<Query>& queries, double held_out_fraction,
                         std::uint64_t seed) {
  if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) {
    throw std::invalid_argument("held-out fraction must be in [0, 1)");
  }
  const std::size_t n = queries.size();
  std::size_t n_held = static_cast<std::size_t>(std::llround(held_out_fraction * static_cast<double>(n)));
  if (held_out_fraction > 0.0 && n >= 2) n_held = std::max<std::size_t>(n_held, 1);
  n_held = std::min(n_held, n > 0 ? n - 1 : 0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> held(n, false);
  for (std::size_t i = 0; i < n_held; ++i) held[order[i]] = true;
  QuerySplit split;
  for (std::size_t i = 0; i < n; ++i) (held[i] ? split.held_out : split.train).push_back(queries[i]);
  return split;
}

std::vector<TrainingPair> make_training_pairs(const std::vector<Query>& queries,
                                              const InvertedIndex& retriever,
                                              const Scorer& teacher, std::uint64_t seed,
                                              std::size_t per_query, std::size_t top_k) {
  if (per_query < 1 || top_k < 1) throw std::invalid_argument("make_training_pairs: sizes must be >= 1");
  Rng rng(seed);
  std::vector<TrainingPair> pairs;
  for (const auto& q : queries) {
    const RankedList first = retriever.retrieve_topk(q.text, top_k);
    if (first.empty()) {
      log::warn("query " + q.query_id + " has no first-stage candidates");
      continue;
    }
    const RankedList ranked = rerank(q, first, teacher);
    std::vector<std::size_t> picks(ranked.size());
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    if (ranked.size() < per_query) {
      log::warn("query " + q.query_id + " has " + std::to_string(ranked.size()) +
                " candidates, fewer than " + std::to_string(per_query));
    } else {
      // Partial Fisher-Yates: the first per_query slots are a uniform sample.
      for (std::size_t i = 0; i < per_query; ++i) {
        std::swap(picks[i], picks[i + rng.index(picks.size() - i)]);
      }
      picks.resize(per_query);
    }
    for (std::size_t i : picks) pairs.push_back({q.query_id, ranked[i].doc_id, ranked[i].score});
  }
  return pairs;
}

std::vector<TrainingPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    TrainingPair p;
    std::string score;
    if (!(fields >> p.query_id >> p.doc_id >> score)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected qid docid score");
    }
    auto [ptr, ec] = std::from_chars(score.data(), score.data() + score.size(), p.teacher_score);
    if (ec != std::errc() || ptr != score.data() + score.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : pairs) out << p.query_id << '\t' << p.doc_id << '\t' << format_score(p.teacher_score) << '\n';
}

double mse_loss(std::span<const double> student, std::span<const double> teacher) {
  if (student.size() != teacher.size()) {
    throw std::invalid_argument("mse_loss: " + std::to_string(student.size()) + " student vs " +
                                std::to_string(teacher.size()) + " teacher scores");
  }
  if (student.empty()) throw std::invalid_argument("mse_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < student.size(); ++i) {
    const double d = student[i] - teacher[i];
    s += d * d;
  }
  return s / static_cast<double>(student.size());
}

InputBuilder compressed_inputs(std::shared_ptr<const EmbeddingIndex> index) {
  return [index](ParamBinder& params, const Query& q, const std::string& doc_id) {
    const TokenSeq tokens = budget_query(q, params.checkpoint().config.query_budget);
    return compressed_input(params, tokens, index->lookup_matrix(doc_id));
  };
}

InputBuilder textual_inputs(std::shared_ptr<const DocumentStore> docs, int max_doc_len) {
  return [docs, max_doc_len](ParamBinder& params, const Query& q, const std::string& doc_id) {
    const TokenSeq tokens = budget_query(q, params.checkpoint().config.query_budget);
    return embed_tokens(params, textual_tokens(tokens, docs->at(doc_id).tokens, max_doc_len));
  };
}

Var batch_loss(ParamBinder& params, std::span<const TrainingPair* const> batch,
               const std::map<std::string, Query>& queries, const InputBuilder& inputs) {
  std::vector<Var> scores;
  Matrix targets(static_cast<Eigen::Index>(batch.size()), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingPair& p = *batch[i];
    auto q = queries.find(p.query_id);
    if (q == queries.end()) throw std::invalid_argument("training pair names unknown query " + p.query_id);
    scores.push_back(eos_score(params, inputs(params, q->second, p.doc_id)));
    targets(static_cast<Eigen::Index>(i), 0) = p.teacher_score;
  }
  return ops::mse(ops::concat_rows(scores), targets);
}

TrainResult train(const std::vector<TrainingPair>& pairs, const std::vector<Query>& queries,
                  const Checkpoint& init, const TrainConfig& config, const InputBuilder& inputs,
                  const std::function<void(int, double)>& on_step) {
  config.validate();
  if (init.frozen()) throw std::invalid_argument("train: checkpoint is frozen");
  if (!init.has("head.w")) throw std::invalid_argument("train: checkpoint has no score head");
  std::map<std::string, Query> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, q);
  for (const auto& p : pairs) {
    if (!by_id.count(p.query_id)) throw std::invalid_argument("training pair names unknown query " + p.query_id);
  }

  TrainResult result;
  result.model = init;
  Checkpoint last_good = init;
  const auto trainable = trainable_predicate(config.trainable);
  Adam opt({config.learning_rate, config.beta1, config.beta2, config.eps});
  Rng rng(config.seed);
  std::vector<const TrainingPair*> order;
  for (const auto& p : pairs) order.push_back(&p);

  int step = 0;
  for (int epoch = 0; epoch < config.epochs && !order.empty(); ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    std::size_t epoch_n = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - start);
      Tape tape;
      ParamBinder params(tape, result.model, trainable);
      Var loss = batch_loss(params, std::span(order).subspan(start, n), by_id, inputs);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        result.aborted = true;
        result.abort_reason = "non-finite loss at step " + std::to_string(step);
        result.model = std::move(last_good);
        log::warn("train: " + result.abort_reason + "; keeping last finite checkpoint");
        return result;
      }
      tape.backward(loss);
      const auto grads = collect_grads(params);
      last_good = result.model;
      opt.step(result.model.params, grads);
      result.loss_trace.push_back(value);
      epoch_sum += value * static_cast<double>(n);
      epoch_n += n;
      if (on_step) on_step(step, value);
      ++step;
    }
    result.epoch_means.push_back(epoch_sum / static_cast<double>(epoch_n));
  }
  result.model.metadata["train.steps"] = std::to_string(step);
  return result;
}

void write_loss_trace(std::span<const double> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_score(trace[i]) << '\n';
}

}  // namespace rrk
