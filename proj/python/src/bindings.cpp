#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rrk/checkpoint.hpp"
#include "rrk/compressor.hpp"
#include "rrk/config.hpp"
#include "rrk/embedding_index.hpp"
#include "rrk/metrics.hpp"
#include "rrk/scorer.hpp"
#include "rrk/synthetic.hpp"

namespace py = pybind11;
using namespace rrk;

namespace {

using PyRanked = std::vector<std::pair<std::string, double>>;

PyRanked to_py(const RankedList& list) {
  PyRanked out;
  out.reserve(list.size());
  for (const auto& d : list) out.emplace_back(d.doc_id, d.score);
  return out;
}

RankedList from_py(const PyRanked& list) {
  RankedList out;
  out.reserve(list.size());
  for (const auto& [id, s] : list) out.push_back({id, s});
  return out;
}

Qrels qrels_from_py(const std::map<std::string, std::map<std::string, int>>& grades) {
  Qrels q;
  for (const auto& [qid, docs] : grades)
    for (const auto& [did, g] : docs) q.set(qid, did, g);
  return q;
}

std::map<std::string, std::string> model_entries(const ModelConfig& c) { return config_entries(c); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reranking over compressed document representations";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      std::string msg;
      for (const auto& v : e.violations()) msg += (msg.empty() ? "" : "\n") + v;
      py::set_error(config_error, msg.c_str());
    }
  });

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<int>(), py::arg("n_memory") = 8)
      .def_property_readonly("size", &Vocabulary::size)
      .def_property_readonly("pad_id", &Vocabulary::pad_id)
      .def_property_readonly("eos_id", &Vocabulary::eos_id)
      .def_property_readonly("sep_id", &Vocabulary::sep_id)
      .def_property_readonly("memory_token_ids", &Vocabulary::memory_token_ids);

  m.def("tokenize", [](const py::bytes& text, const Vocabulary& v) { return tokenize(std::string(text), v); },
        py::arg("text"), py::arg("vocab"));
  m.def("tokenize", [](const std::string& text, const Vocabulary& v) { return tokenize(text, v); },
        py::arg("text"), py::arg("vocab"));
  m.def("detokenize", [](const TokenSeq& tokens, const Vocabulary& v) { return py::bytes(detokenize(tokens, v)); },
        py::arg("tokens"), py::arg("vocab"));

  py::class_<Document>(m, "Document")
      .def_readonly("doc_id", &Document::doc_id)
      .def_readonly("text", &Document::text)
      .def_readonly("tokens", &Document::tokens);
  py::class_<Query>(m, "Query")
      .def_readonly("query_id", &Query::query_id)
      .def_readonly("text", &Query::text)
      .def_readonly("tokens", &Query::tokens);
  m.def("make_document", &make_document, py::arg("doc_id"), py::arg("text"), py::arg("vocab"));
  m.def("make_query", &make_query, py::arg("query_id"), py::arg("text"), py::arg("vocab"));

  m.def(
      "synthetic_corpus",
      [](std::uint64_t seed, std::size_t n_docs, std::size_t n_queries) {
        SyntheticConfig c;
        c.seed = seed;
        c.n_docs = n_docs;
        c.n_queries = n_queries;
        SyntheticSuite s = generate_synthetic_corpus(c, Vocabulary(8));
        py::dict out;
        out["docs"] = s.docs;
        out["queries"] = s.queries;
        out["qrels"] = s.qrels.all();
        out["planted"] = s.planted;
        return out;
      },
      py::arg("seed") = 7, py::arg("n_docs") = 500, py::arg("n_queries") = 100);

  py::class_<InvertedIndex, std::shared_ptr<InvertedIndex>>(m, "InvertedIndex")
      .def(py::init([](const std::vector<Document>& docs, double k1, double b) {
             return std::make_shared<InvertedIndex>(docs, Bm25Params{k1, b});
           }),
           py::arg("docs"), py::arg("k1") = 0.9, py::arg("b") = 0.4)
      .def_property_readonly("n_docs", &InvertedIndex::n_docs)
      .def_property_readonly("avg_doc_length", &InvertedIndex::avg_doc_length)
      .def("df", &InvertedIndex::df, py::arg("term"))
      .def("score", py::overload_cast<std::string_view, const std::string&>(&InvertedIndex::score, py::const_),
           py::arg("query"), py::arg("doc_id"))
      .def(
          "retrieve_topk",
          [](const InvertedIndex& idx, const std::string& q, std::size_t k) { return to_py(idx.retrieve_topk(q, k)); },
          py::arg("query"), py::arg("k") = 50);

  m.def(
      "teacher_scores",
      [](std::shared_ptr<InvertedIndex> bm25, const PlantedSignal& planted, const std::vector<Query>& queries,
         const Query& query, const std::vector<std::string>& doc_ids) {
        const TeacherScorer teacher(bm25, planted, queries);
        return teacher.score_batch(query, doc_ids);
      },
      py::arg("bm25"), py::arg("planted"), py::arg("calibration_queries"), py::arg("query"), py::arg("doc_ids"));

  m.def(
      "ndcg_at_k",
      [](const std::map<std::string, PyRanked>& run, const std::map<std::string, std::map<std::string, int>>& qrels,
         int k) {
        Run r;
        for (const auto& [qid, list] : run) r.queries[qid] = from_py(list);
        const MetricReport rep = ndcg_at_k(r, qrels_from_py(qrels), k);
        return py::make_tuple(rep.mean, rep.per_query);
      },
      py::arg("run"), py::arg("qrels"), py::arg("k") = 10);
  m.def("kendall_tau",
        py::overload_cast<const std::map<std::string, double>&, const std::map<std::string, double>&>(&kendall_tau),
        py::arg("a"), py::arg("b"));

  m.def(
      "index_size",
      [](double n_docs, double l, double d_model, double bytes_per_value) {
        const IndexSize s = index_size(n_docs, l, d_model, bytes_per_value);
        py::dict out;
        out["payload_bytes"] = s.payload_bytes;
        out["header_bytes"] = s.header_bytes;
        out["id_table_bytes"] = s.id_table_bytes;
        out["total_bytes"] = s.total_bytes();
        return out;
      },
      py::arg("n_docs"), py::arg("l"), py::arg("d_model"), py::arg("bytes_per_value"));
  m.def("implied_bytes_per_value", &implied_bytes_per_value, py::arg("target_bytes"), py::arg("n_docs"),
        py::arg("l"), py::arg("d_model"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def_static(
          "init_compressor",
          [](std::uint64_t seed) {
            ModelConfig c;
            c.seed = seed;
            Checkpoint ckpt = init_checkpoint(compressor_config(c), {});
            ckpt.set_frozen(true);
            return ckpt;
          },
          py::arg("seed") = 7)
      .def_static(
          "init_reranker",
          [](const Checkpoint& compressor, std::uint64_t seed) {
            ModelConfig c;
            c.seed = seed;
            return init_reranker(c, RerankerInit::FromCompressor, &compressor);
          },
          py::arg("compressor"), py::arg("seed") = 7)
      .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(c, p); }, py::arg("path"))
      .def_property_readonly("hash", [](const Checkpoint& c) { return checkpoint_hash(c); })
      .def_property_readonly("frozen", &Checkpoint::frozen)
      .def_property_readonly("config", [](const Checkpoint& c) { return model_entries(c.config); })
      .def_property_readonly("metadata", [](const Checkpoint& c) { return c.metadata; })
      .def("names",
           [](const Checkpoint& c) {
             std::vector<std::string> out;
             for (const auto& [name, _] : c.params) out.push_back(name);
             return out;
           })
      .def("param", [](const Checkpoint& c, const std::string& name) { return c.at(name); }, py::arg("name"));

  m.def(
      "compress", [](const TokenSeq& tokens, const Checkpoint& compressor) { return compress_tokens(tokens, compressor); },
      py::arg("tokens"), py::arg("compressor"));
  m.def(
      "score_compressed",
      [](const Checkpoint& reranker, const Query& query, const Matrix& memory) {
        const CompressedScorer scorer(std::make_shared<const Checkpoint>(reranker),
                                      std::make_shared<const EmbeddingIndex>(reranker.config.l_memory,
                                                                             reranker.config.d_model));
        return scorer.score_memory(query, memory);
      },
      py::arg("reranker"), py::arg("query"), py::arg("memory"));
  m.def(
      "rerank_input_length",
      [](const Checkpoint& reranker, const Query& query) {
        const CompressedScorer scorer(std::make_shared<const Checkpoint>(reranker),
                                      std::make_shared<const EmbeddingIndex>(reranker.config.l_memory,
                                                                             reranker.config.d_model));
        return scorer.input_length(query);
      },
      py::arg("reranker"), py::arg("query"));

  py::class_<EmbeddingIndex>(m, "EmbeddingIndex")
      .def_static("build", &build_index, py::arg("docs"), py::arg("compressor"))
      .def_static("load", &EmbeddingIndex::load, py::arg("path"))
      .def("save", &EmbeddingIndex::save, py::arg("path"))
      .def("__len__", &EmbeddingIndex::size)
      .def("__contains__", &EmbeddingIndex::contains)
      .def_property_readonly("l", &EmbeddingIndex::l)
      .def_property_readonly("d_model", &EmbeddingIndex::d_model)
      .def_property_readonly("doc_ids", &EmbeddingIndex::doc_ids)
      .def(
          "lookup",
          [](const EmbeddingIndex& idx, const std::string& id) {
            const auto rows = idx.lookup(id);
            return MatrixF(Eigen::Map<const MatrixF>(rows.data(), idx.l(), idx.d_model()));
          },
          py::arg("doc_id"))
      .def("__eq__", &EmbeddingIndex::operator==);

  m.def(
      "parse_config",
      [](const std::string& text, const std::map<std::string, std::string>& overrides) {
        const ExperimentConfig c = parse_config(text, overrides);
        py::dict out;
        out["entries"] = c.entries();
        out["hash"] = c.hash();
        out["effective_input_length"] = c.effective_input_length();
        return out;
      },
      py::arg("text"), py::arg("overrides") = std::map<std::string, std::string>{});
}
