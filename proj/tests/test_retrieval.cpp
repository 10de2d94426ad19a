#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "retrieval.hpp"
#include "testutil.hpp"

using namespace ratnmt;
using namespace ratnmt::retrieval;
using corpus::Document;
using testutil::doc;

namespace {

std::vector<Document> toy_docs() {
  return {doc("d1", {"a", "a", "b"}), doc("d2", {"b", "c"})};
}

std::vector<std::string> q(std::initializer_list<const char*> tokens) {
  return std::vector<std::string>(tokens.begin(), tokens.end());
}

}  // namespace

TEST_CASE("natural doc-id order") {
  CHECK(natural_less("d9", "d10"));
  CHECK(!natural_less("d10", "d9"));
  CHECK(natural_less("d1", "d2"));
  CHECK(natural_less("LA010194-0001", "LA010194-0002"));
  CHECK(natural_less("a", "b"));
  CHECK(!natural_less("a", "a"));
  CHECK(natural_less("d7", "d007"));   // equal value: fewer leading zeros first
  CHECK(!natural_less("d007", "d7"));
  CHECK(natural_less("d2x", "d10a"));
}

TEST_CASE("build_index counts") {
  auto docs = toy_docs();
  auto idx = InvertedIndex::build(docs);
  CHECK(idx.doc_count() == 2);
  CHECK(idx.total_tokens() == 5);
  CHECK(idx.coll_freq("a") == 2);
  CHECK(idx.coll_freq("b") == 2);
  CHECK(idx.coll_freq("c") == 1);
  CHECK(idx.coll_freq("zzz") == 0);
  CHECK(idx.doc_len(*idx.doc_ordinal("d1")) == 3);
  CHECK(idx.doc_len(*idx.doc_ordinal("d2")) == 2);

  std::vector<Document> single{doc("d", {"x"})};
  auto idx1 = InvertedIndex::build(single);
  const auto* pl = idx1.postings("x");
  REQUIRE(pl != nullptr);
  REQUIRE(pl->size() == 1);
  CHECK((*pl)[0].tf == 1);

  CHECK_THROWS_AS(InvertedIndex::build(std::span<const Document>{}), DataError);
  std::vector<Document> dup{doc("d", {"x"}), doc("d", {"y"})};
  CHECK_THROWS_AS(InvertedIndex::build(dup), DataError);
}

TEST_CASE("ql_dirichlet_score matches the arithmetic oracle") {
  auto docs = toy_docs();
  auto idx = InvertedIndex::build(docs);
  double mu = 2.0;
  // tf(a,d1)=2, cf(a)=2, total=5, len(d1)=3: (2 + 2*(2/5)) / (3+2) = 2.8/5
  CHECK(ql_dirichlet_score(q({"a"}), "d1", idx, mu) == doctest::Approx(std::log(2.8 / 5.0)).epsilon(1e-12));
  // tf(a,d2)=0: (0 + 0.8) / (2+2) = 0.2
  CHECK(ql_dirichlet_score(q({"a"}), "d2", idx, mu) == doctest::Approx(std::log(0.2)).epsilon(1e-12));
  CHECK(ql_dirichlet_score(q({"a"}), "d1", idx, mu) > ql_dirichlet_score(q({"a"}), "d2", idx, mu));

  // c(w,q) multiplicity: [a,a] scores exactly twice [a]
  CHECK(ql_dirichlet_score(q({"a", "a"}), "d1", idx, mu) ==
        2.0 * ql_dirichlet_score(q({"a"}), "d1", idx, mu));

  // unknown query terms are skipped; all-unknown errors
  CHECK(ql_dirichlet_score(q({"a", "zzz"}), "d1", idx, mu) ==
        ql_dirichlet_score(q({"a"}), "d1", idx, mu));
  CHECK_THROWS_AS(ql_dirichlet_score(q({"zzz"}), "d1", idx, mu), DataError);
  CHECK_THROWS_AS(ql_dirichlet_score(q({"a"}), "nope", idx, mu), DataError);
  CHECK_THROWS_AS(ql_dirichlet_score(q({"a"}), "d1", idx, 0.0), UsageError);
}

TEST_CASE("search: ordering, k handling, ties") {
  auto docs = toy_docs();
  auto idx = InvertedIndex::build(docs);
  // only documents containing at least one query term are candidates
  auto r = search(idx, q({"a"}), 2, 2.0, "q1");
  REQUIRE(r.entries.size() == 1);
  CHECK(r.query_id == "q1");
  CHECK(r.entries[0].doc_id == "d1");
  CHECK(r.entries[0].rank == 1);

  auto rb = search(idx, q({"a", "b"}), 2, 2.0);
  REQUIRE(rb.entries.size() == 2);
  CHECK(rb.entries[0].doc_id == "d1");
  CHECK(rb.entries[1].doc_id == "d2");
  CHECK(rb.entries[0].score > rb.entries[1].score);

  // k larger than the candidate set
  auto r2 = search(idx, q({"c"}), 10, 2.0);
  CHECK(r2.entries.size() == 1);
  CHECK(r2.entries[0].doc_id == "d2");

  // exact tie between structurally identical docs: ascending doc id, d9 < d10
  std::vector<Document> tie{doc("d10", {"t", "u"}), doc("d9", {"t", "v"})};
  auto tidx = InvertedIndex::build(tie);
  auto tr = search(tidx, q({"t"}), 2, 7.0);
  REQUIRE(tr.entries.size() == 2);
  CHECK(tr.entries[0].score == tr.entries[1].score);
  CHECK(tr.entries[0].doc_id == "d9");
  CHECK(tr.entries[1].doc_id == "d10");

  CHECK_THROWS_AS(search(idx, q({"a"}), 0, 2.0), UsageError);
}

TEST_CASE("top_document") {
  auto docs = toy_docs();
  auto idx = InvertedIndex::build(docs);
  auto top = top_document(idx, q({"a"}), 2.0);
  REQUIRE(top.has_value());
  CHECK(*top == "d1");

  auto unique_term = top_document(idx, q({"c"}), 2.0);
  REQUIRE(unique_term.has_value());
  CHECK(*unique_term == "d2");

  CHECK(!top_document(idx, q({"zzz", "yyy"}), 2.0).has_value());
}

TEST_CASE("tf monotonicity at fixed collection statistics") {
  // Same cf(a)=2, total=4, len(d1)=2 in both collections; only tf(a,d1) grows.
  std::vector<Document> lo{doc("d1", {"a", "b"}), doc("d2", {"a", "c"})};
  std::vector<Document> hi{doc("d1", {"a", "a"}), doc("d2", {"b", "c"})};
  auto ilo = InvertedIndex::build(lo);
  auto ihi = InvertedIndex::build(hi);
  double mu = 3.0;
  CHECK(ql_dirichlet_score(q({"a"}), "d1", ihi, mu) > ql_dirichlet_score(q({"a"}), "d1", ilo, mu));
}

TEST_CASE("adding a term-disjoint document preserves candidate ordering at fixed stats") {
  std::vector<Document> base{doc("d1", {"a", "a", "b"}), doc("d2", {"a", "c", "c"})};
  std::vector<Document> plus = base;
  plus.push_back(doc("d3", {"z", "z", "z"}));
  auto i1 = InvertedIndex::build(base);
  auto i2 = InvertedIndex::build(plus);
  auto r1 = search(i1, q({"a", "b"}), 10, 5.0);
  auto r2 = search(i2, q({"a", "b"}), 10, 5.0);
  REQUIRE(r1.entries.size() == r2.entries.size());
  for (size_t i = 0; i < r1.entries.size(); ++i) {
    CHECK(r1.entries[i].doc_id == r2.entries[i].doc_id);
  }
}

TEST_CASE("search matches the exhaustive oracle on random corpora") {
  Rng rng(20240817);
  const char* pool[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
  for (int trial = 0; trial < 40; ++trial) {
    int n_docs = 1 + static_cast<int>(rng.next_below(20));
    std::vector<Document> docs;
    for (int d = 0; d < n_docs; ++d) {
      int len = 1 + static_cast<int>(rng.next_below(12));
      std::vector<std::string> tokens;
      for (int i = 0; i < len; ++i) tokens.push_back(pool[rng.next_below(8)]);
      docs.push_back(doc("doc" + std::to_string(d), std::move(tokens)));
    }
    std::vector<std::string> query;
    int qlen = 1 + static_cast<int>(rng.next_below(5));
    for (int i = 0; i < qlen; ++i) query.push_back(pool[rng.next_below(8)]);
    double mu = 0.5 + rng.next_unit() * 2000.0;
    int k = 1 + static_cast<int>(rng.next_below(10));

    auto idx = InvertedIndex::build(docs);
    auto expected = testutil::oracle_search(docs, query, k, mu);
    RankedList got;
    try {
      got = search(idx, query, k, mu);
    } catch (const DataError&) {
      CHECK(expected.empty());
      continue;
    }
    REQUIRE(got.entries.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
      CHECK(got.entries[i].doc_id == expected[i].first);
      CHECK(got.entries[i].score == doctest::Approx(expected[i].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("index persistence round trip") {
  Rng rng(99);
  std::vector<Document> docs;
  const char* pool[] = {"alpha", "beta", "gamma", "delta"};
  for (int d = 0; d < 12; ++d) {
    std::vector<std::string> tokens;
    int len = 1 + static_cast<int>(rng.next_below(9));
    for (int i = 0; i < len; ++i) tokens.push_back(pool[rng.next_below(4)]);
    docs.push_back(doc("d" + std::to_string(d), std::move(tokens)));
  }
  auto idx = InvertedIndex::build(docs);
  testutil::TmpDir tmp("index");
  idx.save(tmp.file("index.bin"), "# ratnmt test kind=index");
  auto loaded = InvertedIndex::load(tmp.file("index.bin"));

  CHECK(loaded.doc_count() == idx.doc_count());
  CHECK(loaded.total_tokens() == idx.total_tokens());
  auto r1 = search(idx, q({"alpha", "beta"}), 5, 100.0);
  auto r2 = search(loaded, q({"alpha", "beta"}), 5, 100.0);
  REQUIRE(r1.entries.size() == r2.entries.size());
  for (size_t i = 0; i < r1.entries.size(); ++i) {
    CHECK(r1.entries[i].doc_id == r2.entries[i].doc_id);
    CHECK(r1.entries[i].score == r2.entries[i].score);
  }

  // identical bytes when saved twice
  idx.save(tmp.file("index2.bin"), "# ratnmt test kind=index");
  CHECK(read_file(tmp.file("index.bin")) == read_file(tmp.file("index2.bin")));
}
