#include "rrk/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rrk/log.hpp"
#include "rrk/random.hpp"
#include "rrk/synthetic.hpp"

namespace rrk {

const LatencyRow& LatencyReport::at(const std::string& model, int input_length) const {
  for (const auto& r : rows) {
    if (r.model == model && r.input_length == input_length) return r;
  }
  throw std::out_of_range("no latency row for " + model + " at length " + std::to_string(input_length));
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw std::invalid_argument("percentile of no samples");
  std::sort(samples.begin(), samples.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(samples.size()));
  const std::size_t i = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(samples.size())));
  return samples[i - 1];
}

namespace {

double median(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Cell {
  BenchWorkload workload;
  BenchTarget target;
  std::vector<RankedList> candidates;
  std::vector<std::vector<std::string>> ids;
  std::vector<double> samples;
  std::vector<double> lookups;
  double spent_ms = 0.0;
  int inner = 1;
  std::size_t cursor = 0;
};

// Reranks `inner` consecutive queries and returns ms per rerank.
double time_sample(Cell& c, std::size_t batch) {
  const std::size_t nq = c.workload.queries.size();
  const auto t0 = Clock::now();
  for (int i = 0; i < c.inner; ++i) {
    const std::size_t q = (c.cursor + static_cast<std::size_t>(i)) % nq;
    const RankedList out = rerank(c.workload.queries[q], c.candidates[q], *c.target.scorer, batch);
    if (out.empty()) throw std::logic_error("bench rerank returned nothing");
  }
  const double ms = elapsed_ms(t0);
  c.spent_ms += ms;
  if (c.target.lookup) {
    const auto l0 = Clock::now();
    for (int i = 0; i < c.inner; ++i) c.target.lookup(c.ids[(c.cursor + static_cast<std::size_t>(i)) % nq]);
    c.lookups.push_back(elapsed_ms(l0) / c.inner);
  }
  c.cursor = (c.cursor + static_cast<std::size_t>(c.inner)) % nq;
  return ms / c.inner;
}

}  // namespace

BenchWorkload make_workload(const BenchConfig& config, int length, const Vocabulary& vocab) {
  if (length < 1) throw std::invalid_argument("bench length must be >= 1");
  if (config.n_queries < 1 || config.docs_per_query < 1) {
    throw std::invalid_argument("bench workload needs at least one query and one document");
  }
  BenchWorkload w;
  w.length = length;
  Rng rng(config.seed ^ (static_cast<std::uint64_t>(length) << 20));
  for (std::size_t q = 0; q < config.n_queries; ++q) {
    w.queries.push_back(make_query("BQ" + std::to_string(q),
                                   synthetic_text_of_length(rng, config.query_length), vocab));
    std::vector<Document> docs;
    for (std::size_t d = 0; d < config.docs_per_query; ++d) {
      docs.push_back(make_document("B" + std::to_string(length) + "_" + std::to_string(q) + "_" +
                                       std::to_string(d),
                                   synthetic_text_of_length(rng, static_cast<std::size_t>(length)), vocab));
    }
    w.docs.push_back(std::move(docs));
  }
  return w;
}

LatencyReport latency_bench(const std::vector<BenchVariant>& variants, const BenchConfig& config,
                            const Vocabulary& vocab) {
  if (variants.empty() || config.lengths.empty()) throw std::invalid_argument("bench: nothing to measure");
  if (config.warmup < 3 || config.repetitions < 20) {
    throw std::invalid_argument("bench: needs at least 3 warmup and 20 timed repetitions");
  }
  if (config.batch < 1) throw std::invalid_argument("bench: batch must be >= 1");
  LatencyReport report;
  for (const auto& variant : variants) {
    std::vector<Cell> cells;
    for (int length : config.lengths) {
      Cell c;
      c.workload = make_workload(config, length, vocab);
      std::vector<Document> all;
      for (const auto& docs : c.workload.docs) all.insert(all.end(), docs.begin(), docs.end());
      c.target = variant.prepare(all);
      for (const auto& docs : c.workload.docs) {
        RankedList list;
        std::vector<std::string> ids;
        for (const auto& d : docs) {
          list.push_back({d.doc_id, 0.0});
          ids.push_back(d.doc_id);
        }
        c.candidates.push_back(std::move(list));
        c.ids.push_back(std::move(ids));
      }
      cells.push_back(std::move(c));
    }
    for (auto& c : cells) {
      double warm = 0.0;
      for (int i = 0; i < config.warmup; ++i) warm = time_sample(c, config.batch);
      if (warm < 1.0) c.inner = static_cast<int>(std::ceil(1.0 / std::max(warm, 1e-3)));
      c.lookups.clear();
      c.spent_ms = 0.0;
    }
    bool more = true;
    while (more) {
      more = false;
      for (auto& c : cells) {
        if (static_cast<int>(c.samples.size()) >= config.repetitions && c.spent_ms >= config.min_timed_ms) continue;
        c.samples.push_back(time_sample(c, config.batch));
        more = true;
      }
    }
    for (auto& c : cells) {
      LatencyRow row;
      row.model = variant.name;
      row.input_length = c.workload.length;
      row.batch = static_cast<int>(config.batch);
      row.median_ms = median(c.samples);
      row.p95_ms = percentile(c.samples, 95.0);
      row.lookup_ms = c.lookups.empty() ? 0.0 : median(c.lookups);
      row.repetitions = static_cast<int>(c.samples.size()) * c.inner;
      log::info("bench " + row.model + " L=" + std::to_string(row.input_length) +
                " median " + std::to_string(row.median_ms) + " ms over " +
                std::to_string(row.repetitions) + " reranks");
      report.rows.push_back(row);
    }
  }
  return report;
}

void emit_curves(const LatencyReport& report, const std::filesystem::path& path) {
  if (report.rows.empty()) throw std::invalid_argument("emit_curves: empty report");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "model,input_length,batch,median_ms,p95_ms,lookup_ms\n";
  for (const auto& r : report.rows) {
    out << r.model << ',' << r.input_length << ',' << r.batch << ',' << format_score(r.median_ms) << ','
        << format_score(r.p95_ms) << ',' << format_score(r.lookup_ms) << '\n';
  }
}

LatencyReport load_curves(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "model,input_length,batch,median_ms,p95_ms,lookup_ms") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  LatencyReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cols[6];
    for (auto& c : cols) {
      if (!std::getline(fields, c, ',')) throw std::runtime_error(path.string() + ": short row: " + line);
    }
    LatencyRow r;
    r.model = cols[0];
    r.input_length = std::stoi(cols[1]);
    r.batch = std::stoi(cols[2]);
    r.median_ms = std::stod(cols[3]);
    r.p95_ms = std::stod(cols[4]);
    r.lookup_ms = std::stod(cols[5]);
    report.rows.push_back(r);
  }
  return report;
}

}  // namespace rrk
