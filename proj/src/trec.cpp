#include "rrk/trec.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rrk {

void Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) {
    throw std::invalid_argument("negative relevance grade for " + query_id + "/" + doc_id);
  }
  grades_[query_id][doc_id] = grade;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = grades_.find(query_id);
  if (q == grades_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int>* Qrels::judgments(const std::string& query_id) const {
  auto q = grades_.find(query_id);
  return q == grades_.end() ? nullptr : &q->second;
}

void sort_ranked(RankedList& list) {
  std::sort(list.begin(), list.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
}

void check_ranked(const std::string& query_id, const RankedList& list) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!seen.insert(list[i].doc_id).second) {
      throw std::runtime_error("query " + query_id + ": duplicate doc_id " + list[i].doc_id);
    }
    if (i > 0 && list[i].score > list[i - 1].score) {
      throw std::runtime_error("query " + query_id + ": score increases at rank " +
                               std::to_string(i + 1));
    }
  }
}

std::string format_score(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(where + ": bad number '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, const std::string& where) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(where + ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string qid, iter, did, grade;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!(ss >> qid >> iter >> did >> grade)) {
      throw std::runtime_error(where + ": expected 'qid 0 docid grade'");
    }
    const long g = parse_int(grade, where);
    if (g < 0) throw std::runtime_error(where + ": negative grade");
    qrels.set(qid, did, static_cast<int>(g));
  }
  return qrels;
}

void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [qid, docs] : qrels.all()) {
    for (const auto& [did, grade] : docs) out << qid << " 0 " << did << ' ' << grade << '\n';
  }
}

Run load_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  struct Row {
    long rank;
    ScoredDoc doc;
  };
  std::map<std::string, std::vector<Row>> rows;
  Run run;
  bool have_tag = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string qid, q0, did, rank, score, tag;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!(ss >> qid >> q0 >> did >> rank >> score >> tag)) {
      throw std::runtime_error(where + ": expected 'qid Q0 docid rank score tag'");
    }
    if (!have_tag) {
      run.tag = tag;
      have_tag = true;
    }
    rows[qid].push_back({parse_int(rank, where), {did, parse_double(score, where)}});
  }
  for (auto& [qid, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    RankedList ranked;
    for (auto& r : list) ranked.push_back(std::move(r.doc));
    check_ranked(qid, ranked);
    run.queries.emplace(qid, std::move(ranked));
  }
  return run;
}

void write_run(const Run& run, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [qid, list] : run.queries) {
    check_ranked(qid, list);
    for (std::size_t i = 0; i < list.size(); ++i) {
      out << qid << " Q0 " << list[i].doc_id << ' ' << (i + 1) << ' '
          << format_score(list[i].score) << ' ' << run.tag << '\n';
    }
  }
}

}  // namespace rrk
