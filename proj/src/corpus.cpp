#include "rrk/corpus.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace rrk {
namespace {

struct Record {
  std::string id;
  std::string text;
};

std::vector<Record> read_records(const std::filesystem::path& path, CorpusFormat format,
                                 const char* id_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::vector<Record> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Record rec;
    if (format == CorpusFormat::Jsonl) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(where + ": malformed json: " + e.what());
      }
      if (!j.is_object() || !j.contains(id_key) || !j.contains("text") ||
          !j[id_key].is_string() || !j["text"].is_string()) {
        throw std::runtime_error(where + ": expected {\"" + std::string(id_key) +
                                 "\": str, \"text\": str}");
      }
      rec.id = j[id_key].get<std::string>();
      rec.text = j["text"].get<std::string>();
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0) {
        throw std::runtime_error(where + ": expected <id>\\t<text>");
      }
      rec.id = line.substr(0, tab);
      rec.text = line.substr(tab + 1);
    }
    if (!seen.insert(rec.id).second) {
      throw std::runtime_error(where + ": duplicate id '" + rec.id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_records(const std::vector<Record>& records, const std::filesystem::path& path,
                   CorpusFormat format, const char* id_key) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) {
    if (format == CorpusFormat::Jsonl) {
      nlohmann::ordered_json j;
      j[id_key] = r.id;
      j["text"] = r.text;
      out << j.dump() << '\n';
    } else {
      if (r.text.find_first_of("\t\n\r") != std::string::npos ||
          r.id.find_first_of("\t\n\r") != std::string::npos) {
        throw std::runtime_error("record '" + r.id + "' cannot be written as tsv");
      }
      out << r.id << '\t' << r.text << '\n';
    }
  }
}

}  // namespace

CorpusFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::Tsv : CorpusFormat::Jsonl;
}

Document make_document(std::string doc_id, std::string text, const Vocabulary& vocab) {
  Document d{std::move(doc_id), std::move(text), {}};
  d.tokens = tokenize(d.text, vocab);
  return d;
}

Query make_query(std::string query_id, std::string text, const Vocabulary& vocab) {
  Query q{std::move(query_id), std::move(text), {}};
  q.tokens = tokenize(q.text, vocab);
  return q;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const Vocabulary& vocab) {
  std::vector<Document> docs;
  for (auto& r : read_records(path, format, "doc_id")) {
    docs.push_back(make_document(std::move(r.id), std::move(r.text), vocab));
  }
  return docs;
}

std::vector<Query> load_queries(const std::filesystem::path& path, CorpusFormat format,
                                const Vocabulary& vocab) {
  std::vector<Query> queries;
  for (auto& r : read_records(path, format, "query_id")) {
    queries.push_back(make_query(std::move(r.id), std::move(r.text), vocab));
  }
  return queries;
}

void write_corpus(const std::vector<Document>& docs, const std::filesystem::path& path,
                  CorpusFormat format) {
  std::vector<Record> records;
  for (const auto& d : docs) records.push_back({d.doc_id, d.text});
  write_records(records, path, format, "doc_id");
}

void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path,
                   CorpusFormat format) {
  std::vector<Record> records;
  for (const auto& q : queries) records.push_back({q.query_id, q.text});
  write_records(records, path, format, "query_id");
}

}  // namespace rrk
