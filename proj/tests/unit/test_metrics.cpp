#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rrk/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace rrk;

namespace {

Run single_query_run(const std::vector<std::string>& order) {
  Run run;
  RankedList list;
  for (std::size_t i = 0; i < order.size(); ++i) list.push_back({order[i], static_cast<double>(order.size() - i)});
  run.queries["q"] = list;
  return run;
}

}  // namespace

TEST_SUITE("ndcg") {
  TEST_CASE("ideal ordering is 1") {
    Qrels q;
    q.set("q", "a", 3);
    q.set("q", "b", 1);
    CHECK(ndcg_at_k(single_query_run({"a", "b", "c"}), q, 10).mean == 1.0);
  }

  TEST_CASE("relevant document second gives 1/log2(3)") {
    Qrels q;
    q.set("q", "rel", 1);
    q.set("q", "irr", 0);
    const double v = ndcg_at_k(single_query_run({"irr", "rel"}), q, 10).mean;
    CHECK(v == doctest::Approx(0.6309297535714575).epsilon(1e-14));
    CHECK(std::abs(v - 1.0 / std::log2(3.0)) < 1e-15);
  }

  TEST_CASE("dcg by hand") {
    CHECK(dcg_at_k({3, 2}, 10) == doctest::Approx(7.0 + 3.0 / std::log2(3.0)));
    CHECK(dcg_at_k({0, 0, 1}, 2) == 0.0);
  }

  TEST_CASE("every permutation of up to 4 judged documents matches the oracle") {
    const std::vector<std::vector<int>> grade_sets{{0, 1, 2}, {3, 0, 0}, {1, 1, 2, 3}, {0, 2, 0, 1}, {2, 2}};
    for (const auto& grades : grade_sets) {
      for (int k : {1, 2, 3, 10}) {
        std::vector<std::size_t> idx(grades.size());
        std::iota(idx.begin(), idx.end(), 0);
        do {
          Qrels q;
          std::vector<std::string> order;
          std::vector<int> ranked;
          for (std::size_t i : idx) {
            order.push_back("d" + std::to_string(i));
            ranked.push_back(grades[i]);
            q.set("q", "d" + std::to_string(i), grades[i]);
          }
          const auto r = ndcg_at_k(single_query_run(order), q, k);
          CHECK(r.mean == doctest::Approx(oracle::brute_ndcg(ranked, k)).epsilon(1e-12));
        } while (std::next_permutation(idx.begin(), idx.end()));
      }
    }
  }

  TEST_CASE("strictly monotone score transforms leave ndcg unchanged") {
    Rng rng(4);
    Qrels q;
    Run run;
    for (int qi = 0; qi < 20; ++qi) {
      const std::string qid = "q" + std::to_string(qi);
      RankedList list;
      for (int d = 0; d < 15; ++d) {
        const std::string did = "d" + std::to_string(d);
        q.set(qid, did, static_cast<int>(rng.index(4)));
        list.push_back({did, rng.normal()});
      }
      sort_ranked(list);
      run.queries[qid] = list;
    }
    Run mapped = run;
    for (auto& [qid, list] : mapped.queries)
      for (auto& d : list) d.score = std::exp(3.0 * d.score) - 7.0;
    const auto a = ndcg_at_k(run, q, 10), b = ndcg_at_k(mapped, q, 10);
    CHECK(a.per_query == b.per_query);
    CHECK(a.mean == b.mean);
  }

  TEST_CASE("values lie in [0, 1] and the mean is arithmetic") {
    Rng rng(5);
    Qrels q;
    Run run;
    for (int qi = 0; qi < 10; ++qi) {
      const std::string qid = "q" + std::to_string(qi);
      RankedList list;
      q.set(qid, "d0", 1);
      for (int d = 0; d < 12; ++d) {
        q.set(qid, "d" + std::to_string(d), static_cast<int>(rng.index(3)));
        list.push_back({"d" + std::to_string(d), rng.normal()});
      }
      sort_ranked(list);
      run.queries[qid] = list;
    }
    const auto r = ndcg_at_k(run, q, 5);
    double sum = 0;
    for (const auto& [qid, v] : r.per_query) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(r.mean == doctest::Approx(sum / static_cast<double>(r.per_query.size())));
  }

  TEST_CASE("queries without relevant documents are excluded and counted") {
    Qrels q;
    q.set("q", "a", 1);
    q.set("z", "a", 0);
    Run run = single_query_run({"b", "a"});
    run.queries["z"] = {{"a", 1.0}};
    const auto r = ndcg_at_k(run, q, 10);
    CHECK(r.excluded == 1);
    CHECK(r.per_query.size() == 1);
    Run unknown = run;
    unknown.queries["missing"] = {{"a", 1.0}};
    CHECK_THROWS(ndcg_at_k(unknown, q, 10));
    CHECK_THROWS(ndcg_at_k(run, q, 0));
  }

  TEST_CASE("report file layout") {
    test::TempDir dir("report");
    MetricReport r;
    r.per_query = {{"q1", 0.5}, {"q2", 1.0}};
    r.mean = 0.75;
    write_report(r, dir / "r.tsv");
    std::ifstream in(dir / "r.tsv");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    CHECK(lines == std::vector<std::string>{"q1\t0.5", "q2\t1", "mean\t0.75", "excluded\t0"});
  }
}

TEST_SUITE("kendall") {
  TEST_CASE("identity and reversal") {
    std::map<std::string, double> a, b;
    for (int i = 0; i < 8; ++i) {
      a["d" + std::to_string(i)] = i;
      b["d" + std::to_string(i)] = -i;
    }
    CHECK(kendall_tau(a, a) == 1.0);
    CHECK(kendall_tau(a, b) == -1.0);
  }

  TEST_CASE("mismatched items and degenerate inputs") {
    const std::map<std::string, double> a{{"x", 1}, {"y", 2}}, b{{"x", 1}, {"z", 2}}, flat{{"x", 0}, {"y", 0}};
    CHECK_THROWS(kendall_tau(a, b));
    CHECK(kendall_tau(a, flat) == 0.0);
    const RankedList dup{{"x", 2}, {"x", 1}};
    CHECK_THROWS(kendall_tau(dup, dup));
  }

  TEST_CASE("1000 random ranking pairs match the pair-count oracle") {
    Rng rng(6);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t n = t < 500 ? 8 : 2 + rng.index(40);
      std::map<std::string, double> a, b;
      std::vector<double> va, vb;
      for (std::size_t i = 0; i < n; ++i) {
        // Small integer scores produce ties on both sides.
        const double x = static_cast<double>(rng.index(t % 2 ? 5 : 1000));
        const double y = static_cast<double>(rng.index(t % 3 ? 1000 : 4));
        char id[8];
        std::snprintf(id, sizeof(id), "d%03zu", i);
        a[id] = x;
        b[id] = y;
      }
      for (const auto& [id, x] : a) va.push_back(x), vb.push_back(b.at(id));
      CHECK(kendall_tau(a, b) == doctest::Approx(oracle::pair_count_tau(va, vb)).epsilon(1e-12));
    }
  }

  TEST_CASE("ranked-list overload") {
    const RankedList a{{"x", 3}, {"y", 2}, {"z", 1}}, b{{"z", 3}, {"x", 2}, {"y", 1}};
    std::map<std::string, double> ma{{"x", 3}, {"y", 2}, {"z", 1}}, mb{{"z", 3}, {"x", 2}, {"y", 1}};
    CHECK(kendall_tau(a, b) == kendall_tau(ma, mb));
  }
}
