#include "rrk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace rrk {

double dcg_at_k(const std::vector<int>& grades, int k) {
  if (k < 1) throw std::invalid_argument("cutoff k must be >= 1");
  double dcg = 0.0;
  const std::size_t n = std::min(grades.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    dcg += (std::exp2(static_cast<double>(grades[i])) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg;
}

MetricReport ndcg_at_k(const Run& run, const Qrels& qrels, int k) {
  if (k < 1) throw std::invalid_argument("cutoff k must be >= 1");
  MetricReport report;
  report.k = k;
  double total = 0.0;
  for (const auto& [qid, list] : run.queries) {
    const auto* judged = qrels.judgments(qid);
    if (!judged) throw std::invalid_argument("run query " + qid + " has no judgments");
    std::vector<int> ideal;
    for (const auto& [doc, g] : *judged) ideal.push_back(g);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double idcg = dcg_at_k(ideal, k);
    if (idcg <= 0.0) {
      ++report.excluded;
      continue;
    }
    std::vector<int> grades;
    grades.reserve(list.size());
    for (const auto& d : list) {
      auto it = judged->find(d.doc_id);
      grades.push_back(it == judged->end() ? 0 : it->second);
    }
    const double v = dcg_at_k(grades, k) / idcg;
    report.per_query[qid] = v;
    total += v;
  }
  report.mean = report.per_query.empty() ? 0.0 : total / static_cast<double>(report.per_query.size());
  return report;
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [qid, v] : report.per_query) out << qid << '\t' << format_score(v) << '\n';
  out << "mean\t" << format_score(report.mean) << '\n';
  out << "excluded\t" << report.excluded << '\n';
}

namespace {

// Knight's O(n log n) tau-b: sort by (x, y), count x ties and joint ties,
// then count discordant pairs as merge-sort swaps on y.
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, o = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[o++] = v[j++];
    } else {
      buf[o++] = v[i++];
    }
  }
  while (i < mid) buf[o++] = v[i++];
  while (j < hi) buf[o++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

long long tie_pairs(const std::vector<double>& sorted) {
  long long t = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const long long run = static_cast<long long>(j - i);
    t += run * (run - 1) / 2;
    i = j;
  }
  return t;
}

double kendall_tau_b(std::vector<std::pair<double, double>> xy) {
  const long long n = static_cast<long long>(xy.size());
  const long long n0 = n * (n - 1) / 2;
  std::sort(xy.begin(), xy.end());
  long long n1 = 0, n3 = 0;
  for (std::size_t i = 0; i < xy.size();) {
    std::size_t j = i;
    while (j < xy.size() && xy[j].first == xy[i].first) ++j;
    const long long run = static_cast<long long>(j - i);
    n1 += run * (run - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && xy[b].second == xy[a].second) ++b;
      const long long r = static_cast<long long>(b - a);
      n3 += r * (r - 1) / 2;
      a = b;
    }
    i = j;
  }
  std::vector<double> y(xy.size()), buf(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) y[i] = xy[i].second;
  const long long swaps = merge_count(y, buf, 0, y.size());
  const long long n2 = tie_pairs(y);
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  if (denom == 0.0) return 0.0;
  return static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps) / denom;
}

}  // namespace

double kendall_tau(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: rankings cover different items");
  std::vector<std::pair<double, double>> xy;
  xy.reserve(a.size());
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw std::invalid_argument("kendall_tau: item " + ia->first + " missing from one ranking");
    }
    xy.emplace_back(ia->second, ib->second);
  }
  return kendall_tau_b(xy);
}

double kendall_tau(const RankedList& a, const RankedList& b) {
  std::map<std::string, double> ma, mb;
  for (const auto& d : a) {
    if (!ma.emplace(d.doc_id, d.score).second) throw std::invalid_argument("kendall_tau: duplicate " + d.doc_id);
  }
  for (const auto& d : b) {
    if (!mb.emplace(d.doc_id, d.score).second) throw std::invalid_argument("kendall_tau: duplicate " + d.doc_id);
  }
  return kendall_tau(ma, mb);
}

}  // namespace rrk
