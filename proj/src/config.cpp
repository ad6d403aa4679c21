#include "rrk/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "rrk/checkpoint.hpp"
#include "rrk/trec.hpp"

namespace rrk {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string msg = "invalid config (" + std::to_string(v.size()) + " problem" + (v.size() == 1 ? "" : "s") + ")";
  for (const auto& s : v) msg += "; " + s;
  return msg;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if constexpr (std::is_unsigned_v<T>) {
    if (s[0] == '-') return false;
  }
  auto [ptr, ec] = std::from_chars(begin, begin + s.size(), out);
  return ec == std::errc() && ptr == begin + s.size();
}

using Getter = std::function<std::string(const ExperimentConfig&)>;
using Setter = std::function<bool(ExperimentConfig&, const std::string&)>;

struct KeyDef {
  std::string name;
  Getter get;
  Setter set;
};

template <typename T>
std::string render(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_score(static_cast<double>(v));
  } else {
    return std::to_string(v);
  }
}

template <typename T, typename Access>
KeyDef num(std::string name, Access access) {
  return {std::move(name), [access](const ExperimentConfig& c) { return render<T>(access(const_cast<ExperimentConfig&>(c))); },
          [access](ExperimentConfig& c, const std::string& s) {
            T v{};
            if (!parse_number(s, v)) return false;
            access(c) = v;
            return true;
          }};
}

template <typename Access>
KeyDef str(std::string name, Access access) {
  return {std::move(name), [access](const ExperimentConfig& c) { return access(const_cast<ExperimentConfig&>(c)); },
          [access](ExperimentConfig& c, const std::string& s) {
            access(c) = s;
            return true;
          }};
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    using EC = ExperimentConfig;
    std::vector<KeyDef> t;
    t.push_back(num<std::uint64_t>("seed", [](EC& c) -> std::uint64_t& { return c.seed; }));
    t.push_back(str("paths.out", [](EC& c) -> std::string& { return c.paths.out; }));
    t.push_back(str("paths.corpus", [](EC& c) -> std::string& { return c.paths.corpus; }));
    t.push_back(str("paths.queries", [](EC& c) -> std::string& { return c.paths.queries; }));
    t.push_back(str("paths.qrels", [](EC& c) -> std::string& { return c.paths.qrels; }));
    t.push_back(str("paths.planted", [](EC& c) -> std::string& { return c.paths.planted; }));
    t.push_back(str("paths.index", [](EC& c) -> std::string& { return c.paths.index; }));
    t.push_back(str("paths.compressor", [](EC& c) -> std::string& { return c.paths.compressor; }));
    t.push_back(str("paths.reranker", [](EC& c) -> std::string& { return c.paths.reranker; }));
    t.push_back(str("paths.textual", [](EC& c) -> std::string& { return c.paths.textual; }));
    t.push_back(str("paths.first_stage", [](EC& c) -> std::string& { return c.paths.first_stage; }));
    t.push_back(str("paths.pairs", [](EC& c) -> std::string& { return c.paths.pairs; }));
    t.push_back(num<std::size_t>("data.n_docs", [](EC& c) -> std::size_t& { return c.data.n_docs; }));
    t.push_back(num<std::size_t>("data.n_queries", [](EC& c) -> std::size_t& { return c.data.n_queries; }));
    t.push_back(num<std::size_t>("data.min_doc_len", [](EC& c) -> std::size_t& { return c.data.min_doc_len; }));
    t.push_back(num<std::size_t>("data.max_doc_len", [](EC& c) -> std::size_t& { return c.data.max_doc_len; }));
    t.push_back(num<int>("model.n_layers", [](EC& c) -> int& { return c.model.n_layers; }));
    t.push_back(num<int>("model.d_model", [](EC& c) -> int& { return c.model.d_model; }));
    t.push_back(num<int>("model.n_heads", [](EC& c) -> int& { return c.model.n_heads; }));
    t.push_back(num<int>("model.d_ff", [](EC& c) -> int& { return c.model.d_ff; }));
    t.push_back(num<int>("model.max_seq_len", [](EC& c) -> int& { return c.model.max_seq_len; }));
    t.push_back(num<int>("model.l_memory", [](EC& c) -> int& { return c.model.l_memory; }));
    t.push_back(num<int>("model.query_budget", [](EC& c) -> int& { return c.model.query_budget; }));
    t.push_back(num<int>("model.lora_rank", [](EC& c) -> int& { return c.model.lora_rank; }));
    t.push_back(num<double>("model.lora_alpha", [](EC& c) -> double& { return c.model.lora_alpha; }));
    t.push_back(num<int>("pretrain.steps", [](EC& c) -> int& { return c.pretrain.steps; }));
    t.push_back(num<int>("pretrain.batch_size", [](EC& c) -> int& { return c.pretrain.batch_size; }));
    t.push_back(num<double>("pretrain.learning_rate", [](EC& c) -> double& { return c.pretrain.learning_rate; }));
    t.push_back(num<int>("pretrain.decoder_layers", [](EC& c) -> int& { return c.pretrain.decoder_layers; }));
    t.push_back(num<int>("train.epochs", [](EC& c) -> int& { return c.train.epochs; }));
    t.push_back(num<int>("train.batch_size", [](EC& c) -> int& { return c.train.batch_size; }));
    t.push_back(num<double>("train.learning_rate", [](EC& c) -> double& { return c.train.learning_rate; }));
    t.push_back(num<double>("train.beta1", [](EC& c) -> double& { return c.train.beta1; }));
    t.push_back(num<double>("train.beta2", [](EC& c) -> double& { return c.train.beta2; }));
    t.push_back(num<double>("train.eps", [](EC& c) -> double& { return c.train.eps; }));
    t.push_back({"train.trainable", [](const EC& c) { return to_string(c.train.trainable); },
                 [](EC& c, const std::string& s) {
                   if (s != "lora+head" && s != "all") return false;
                   c.train.trainable = trainable_set_from_string(s);
                   return true;
                 }});
    t.push_back(num<double>("retriever.k1", [](EC& c) -> double& { return c.retriever.bm25.k1; }));
    t.push_back(num<double>("retriever.b", [](EC& c) -> double& { return c.retriever.bm25.b; }));
    t.push_back(num<std::size_t>("retriever.top_k", [](EC& c) -> std::size_t& { return c.retriever.top_k; }));
    t.push_back(num<int>("eval.k", [](EC& c) -> int& { return c.eval.k; }));
    t.push_back(num<double>("eval.held_out_fraction", [](EC& c) -> double& { return c.eval.held_out_fraction; }));
    t.push_back(num<std::size_t>("eval.pairs_per_query", [](EC& c) -> std::size_t& { return c.eval.pairs_per_query; }));
    t.push_back({"reranker.init",
                 [](const EC& c) { return std::string(c.reranker_init == RerankerInit::Random ? "random" : "compressor"); },
                 [](EC& c, const std::string& s) {
                   if (s == "random") {
                     c.reranker_init = RerankerInit::Random;
                   } else if (s == "compressor") {
                     c.reranker_init = RerankerInit::FromCompressor;
                   } else {
                     return false;
                   }
                   return true;
                 }});
    t.push_back(num<int>("textual.max_doc_len", [](EC& c) -> int& { return c.textual_max_doc_len; }));
    t.push_back({"textual.trainable", [](const EC& c) { return to_string(c.textual_trainable); },
                 [](EC& c, const std::string& s) {
                   if (s != "lora+head" && s != "all") return false;
                   c.textual_trainable = trainable_set_from_string(s);
                   return true;
                 }});
    return t;
  }();
  return table;
}

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

// Fields derived from others rather than read from the file.
void derive(ExperimentConfig& c) {
  c.model.vocab_size = Vocabulary::kByteUnits + 3 + c.model.l_memory;
  c.model.seed = c.seed;
  c.pretrain.seed = c.seed;
  c.train.seed = c.seed;
  c.data.seed = c.seed;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

std::map<std::string, std::string> ExperimentConfig::entries() const {
  std::map<std::string, std::string> out;
  for (const auto& k : key_table()) out[k.name] = k.get(*this);
  return out;
}

std::string ExperimentConfig::hash() const {
  // Paths are locations, not experiment content: two runs writing to
  // different directories share a hash.
  std::string text;
  for (const auto& [k, v] : entries()) {
    if (k.rfind("paths.", 0) == 0) continue;
    text += k + "=" + v + "\n";
  }
  return hex64(fnv1a(text.data(), text.size()));
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> v;
  for (const auto& s : model.violations()) v.push_back(s);
  for (const auto& s : train.violations()) v.push_back(s);
  if (data.n_queries < 1) v.push_back("data.n_queries must be >= 1");
  if (data.n_docs < data.n_queries) v.push_back("data.n_docs must be >= data.n_queries");
  if (data.min_doc_len < 32) v.push_back("data.min_doc_len must be >= 32");
  if (data.max_doc_len < data.min_doc_len) v.push_back("data.max_doc_len must be >= data.min_doc_len");
  if (pretrain.steps < 0) v.push_back("pretrain.steps must be >= 0");
  if (pretrain.batch_size < 1) v.push_back("pretrain.batch_size must be >= 1");
  if (!(pretrain.learning_rate > 0.0)) v.push_back("pretrain.learning_rate must be > 0");
  if (pretrain.decoder_layers < 1) v.push_back("pretrain.decoder_layers must be >= 1");
  if (!(retriever.bm25.k1 >= 0.0)) v.push_back("retriever.k1 must be >= 0");
  if (!(retriever.bm25.b >= 0.0 && retriever.bm25.b <= 1.0)) v.push_back("retriever.b must be in [0, 1]");
  if (retriever.top_k < 1) v.push_back("retriever.top_k must be >= 1");
  if (eval.k < 1) v.push_back("eval.k must be >= 1");
  if (!(eval.held_out_fraction >= 0.0 && eval.held_out_fraction < 1.0)) {
    v.push_back("eval.held_out_fraction must be in [0, 1)");
  }
  if (eval.pairs_per_query < 1) v.push_back("eval.pairs_per_query must be >= 1");
  if (textual_max_doc_len < 1) v.push_back("textual.max_doc_len must be >= 1");
  if (paths.out.empty()) v.push_back("paths.out must not be empty");
  return v;
}

std::filesystem::path ExperimentConfig::path(const std::string& key) const {
  static const std::map<std::string, std::string> defaults = {
      {"corpus", "corpus.jsonl"},   {"queries", "queries.jsonl"},     {"qrels", "qrels.txt"},
      {"planted", "planted.tsv"},   {"index", "index.rrkidx"},        {"compressor", "compressor.ckpt"},
      {"reranker", "reranker.ckpt"}, {"textual", "textual.ckpt"},     {"first_stage", "first_stage.run"},
      {"pairs", "pairs.tsv"}};
  const KeyDef* k = find_key("paths." + key);
  if (!k || key == "out") throw std::invalid_argument("unknown path key " + key);
  const std::string v = k->get(*this);
  if (!v.empty()) return v;
  return std::filesystem::path(paths.out) / defaults.at(key);
}

ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  auto apply = [&](const std::string& key, const std::string& value, const std::string& where) {
    const KeyDef* k = find_key(key);
    if (!k) {
      problems.push_back(where + "unknown key '" + key + "'");
    } else if (!k->set(c, value)) {
      problems.push_back(where + key + ": bad value '" + value + "'");
    }
  };
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) {
      problems.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    apply(key, trim(line.substr(eq + 1)), where);
  }
  for (const auto& [k, v] : overrides) apply(k, v, "override: ");
  derive(c);
  for (const auto& s : c.violations()) problems.push_back(s);
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config file " + path.string() + " cannot be read"});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::vector<std::string> missing_paths(const ExperimentConfig& config, const std::vector<std::string>& keys) {
  std::vector<std::string> out;
  for (const auto& k : keys) {
    const auto p = config.path(k);
    if (!std::filesystem::exists(p)) out.push_back("paths." + k + ": " + p.string() + " does not exist");
  }
  return out;
}

}  // namespace rrk
