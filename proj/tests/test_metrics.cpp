#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "metrics.hpp"
#include "testutil.hpp"

using namespace ratnmt;
using namespace ratnmt::metrics;
using corpus::QrelSet;
using retrieval::RankedList;

namespace {

RankedList ranking(const std::string& qid, std::initializer_list<const char*> docs) {
  RankedList rl;
  rl.query_id = qid;
  int rank = 1;
  for (const char* d : docs) {
    rl.entries.push_back({d, 1.0 / rank, rank});
    ++rank;
  }
  return rl;
}

// Rank-by-rank AP oracle: recomputes precision at every rank.
double ap_oracle(const RankedList& rl, const QrelSet& qrels) {
  int64_t relevant_total = qrels.relevant_count(rl.query_id);
  double sum = 0.0;
  int64_t seen = 0;
  for (size_t i = 0; i < rl.entries.size(); ++i) {
    int64_t rel_in_top = 0;
    for (size_t j = 0; j <= i; ++j) {
      if (qrels.grade(rl.query_id, rl.entries[j].doc_id) > 0) ++rel_in_top;
    }
    if (qrels.grade(rl.query_id, rl.entries[i].doc_id) > 0) {
      ++seen;
      sum += static_cast<double>(rel_in_top) / static_cast<double>(i + 1);
    }
  }
  (void)seen;
  return sum / static_cast<double>(relevant_total);
}

}  // namespace

TEST_CASE("average precision on the worked examples") {
  QrelSet qrels;
  qrels.add("q", "d1", 1);
  CHECK(average_precision(ranking("q", {"d1"}), qrels) == 1.0);

  QrelSet q2;
  q2.add("q", "d2", 1);
  q2.add("q", "d4", 2);
  CHECK(average_precision(ranking("q", {"d1", "d2", "d3", "d4"}), q2) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // a relevant document missing from the ranking stays in R
  QrelSet q3;
  q3.add("q", "d1", 1);
  q3.add("q", "absent", 1);
  CHECK(average_precision(ranking("q", {"d1", "d2"}), q3) ==
        doctest::Approx(0.5).epsilon(1e-12));

  QrelSet none;
  none.add("q", "d1", 0);
  CHECK_THROWS_AS(average_precision(ranking("q", {"d1"}), none), DataError);
}

TEST_CASE("average precision matches the rank-by-rank oracle on random instances") {
  Rng rng(665);
  for (int trial = 0; trial < 300; ++trial) {
    int n_docs = 1 + static_cast<int>(rng.next_below(50));
    RankedList rl;
    rl.query_id = "q";
    QrelSet qrels;
    int64_t n_rel = 0;
    for (int d = 0; d < n_docs; ++d) {
      std::string id = "d" + std::to_string(d);
      rl.entries.push_back({id, 1.0 - 0.01 * d, d + 1});
      if (rng.next_unit() < 0.3) {
        qrels.add("q", id, 1 + static_cast<int>(rng.next_below(3)));
        ++n_rel;
      }
    }
    // sometimes judge documents that were never retrieved
    if (rng.next_unit() < 0.5) {
      qrels.add("q", "shadow", 1);
      ++n_rel;
    }
    if (n_rel == 0) {
      CHECK_THROWS_AS(average_precision(rl, qrels), DataError);
      continue;
    }
    double got = average_precision(rl, qrels);
    double want = ap_oracle(rl, qrels);
    CHECK(std::abs(got - want) <= 1e-12);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

namespace {

TermStats example_stats() {
  TermStats s;
  s.counts["a"] = {2, 2};
  s.counts["b"] = {4, 1};
  s.total_tc = 6;
  s.total_rc = 3;
  s.vocab_size = 2;
  return s;
}

}  // namespace

TEST_CASE("balance on the hand-computed example") {
  auto stats = example_stats();
  std::vector<std::string> terms{"a", "b"};
  // P_TC(a)=3/8, P_RC(a)=3/5, P_TC(b)=5/8, P_RC(b)=2/5 -> B = 1.09375
  CHECK(balance(terms, stats) == doctest::Approx(1.09375).epsilon(1e-12));

  // duplicates do not change the result (set semantics)
  std::vector<std::string> dup{"a", "b", "a", "a"};
  CHECK(balance(dup, stats) == balance(terms, stats));

  // identical smoothed probabilities on both sides give exactly 1
  TermStats sym;
  sym.counts["x"] = {3, 3};
  sym.total_tc = 5;
  sym.total_rc = 5;
  sym.vocab_size = 1;
  std::vector<std::string> xs{"x"};
  CHECK(balance(xs, sym) == 1.0);

  // absent from RC stays finite under smoothing
  TermStats absent;
  absent.counts["y"] = {10, 0};
  absent.total_tc = 10;
  absent.total_rc = 7;
  absent.vocab_size = 1;
  std::vector<std::string> ys{"y"};
  CHECK(std::isfinite(balance(ys, absent)));
  CHECK(balance(ys, absent) > 1.0);

  std::vector<std::string> empty;
  CHECK_THROWS_AS(balance(empty, stats), DataError);
}

TEST_CASE("swapping corpus roles inverts each term ratio") {
  auto stats = example_stats();
  TermStats swapped;
  for (const auto& [t, c] : stats.counts) swapped.counts[t] = {c.second, c.first};
  swapped.total_tc = stats.total_rc;
  swapped.total_rc = stats.total_tc;
  swapped.vocab_size = stats.vocab_size;
  for (const char* t : {"a", "b"}) {
    std::vector<std::string> one{t};
    CHECK(balance(one, stats) * balance(one, swapped) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("translation precision/recall") {
  TranslationRecord rec;
  rec.query_id = "41";
  rec.model_terms = {"gold", "coin", "super", "free", "harmonising", "won", "winter", "olympics"};
  rec.human_terms = {"super", "gold", "medal", "won", "lillehammer", "olympic", "winter", "games"};
  auto [p, r] = translation_pr(rec);
  // intersection {gold, super, won, winter}; "olympics" != "olympic" without stemming
  CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r == doctest::Approx(0.5).epsilon(1e-12));

  TranslationRecord same{"q", {"a", "b"}, {"b", "a"}};
  auto [p2, r2] = translation_pr(same);
  CHECK(p2 == 1.0);
  CHECK(r2 == 1.0);

  TranslationRecord disjoint{"q", {"a"}, {"b"}};
  auto [p3, r3] = translation_pr(disjoint);
  CHECK(p3 == 0.0);
  CHECK(r3 == 0.0);

  TranslationRecord empty{"q", {}, {"b"}};
  CHECK_THROWS_AS(translation_pr(empty), DataError);
}

TEST_CASE("aggregate") {
  std::vector<double> one{1.0};
  CHECK(aggregate(one) == 1.0);
  std::vector<double> two{0.0, 1.0};
  CHECK(aggregate(two) == 0.5);
  std::vector<double> maps{1.0, 0.5};
  CHECK(aggregate(maps) == doctest::Approx(0.75).epsilon(1e-12));
  std::vector<double> empty;
  CHECK_THROWS_AS(aggregate(empty), DataError);
}
