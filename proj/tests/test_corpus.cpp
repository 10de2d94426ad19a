#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "corpus.hpp"
#include "testutil.hpp"

using namespace ratnmt;
using namespace ratnmt::corpus;
using textprep::StopList;

TEST_CASE("load_parallel: preprocessing, drops, and malformed rows") {
  testutil::TmpDir tmp("parallel");
  auto none = StopList::none();

  write_file(tmp.file("tc.tsv"), "ciao mondo\thello world\nsolo\t\n2003\tnumbers only\n");
  LoadStats stats;
  auto pairs = load_parallel(tmp.file("tc.tsv"), none, none, &stats);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].id == 0);
  CHECK(pairs[0].source_tokens == std::vector<std::string>{"ciao", "mondo"});
  CHECK(pairs[0].target_tokens == std::vector<std::string>{"hello", "world"});
  CHECK(stats.dropped == 2);  // empty target; empty source after normalization

  write_file(tmp.file("bad.tsv"), "a\tb\nx\ty\tz\n");
  CHECK_THROWS_WITH_AS(load_parallel(tmp.file("bad.tsv"), none, none),
                       doctest::Contains("line 2"), DataError);
}

TEST_CASE("load_documents: JSONL, TREC SGML, duplicate ids") {
  testutil::TmpDir tmp("docs");
  auto none = StopList::none();

  write_file(tmp.file("rc.jsonl"),
             "{\"id\":\"d1\",\"text\":\"Winter games.\"}\n"
             "{\"id\":\"d2\",\"text\":\"...\"}\n");
  LoadStats stats;
  auto docs = load_documents(tmp.file("rc.jsonl"), none, &stats);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].doc_id == "d1");
  CHECK(docs[0].tokens == std::vector<std::string>{"winter", "games"});
  CHECK(stats.dropped == 1);

  write_file(tmp.file("rc.trec"),
             "<DOC>\n<DOCNO> LA010194-0001 </DOCNO>\n<TEXT>\nCold winter day.\n</TEXT>\n</DOC>\n"
             "<DOC>\n<DOCNO>LA010194-0002</DOCNO>\n<TEXT>Snow.</TEXT>\n</DOC>\n");
  auto trec = load_documents(tmp.file("rc.trec"), none);
  REQUIRE(trec.size() == 2);
  CHECK(trec[0].doc_id == "LA010194-0001");
  CHECK(trec[0].tokens == std::vector<std::string>{"cold", "winter", "day"});

  write_file(tmp.file("dup.jsonl"),
             "{\"id\":\"d1\",\"text\":\"a\"}\n{\"id\":\"d1\",\"text\":\"b\"}\n");
  CHECK_THROWS_AS(load_documents(tmp.file("dup.jsonl"), none), DataError);

  write_file(tmp.file("garbage.txt"), "plain text\n");
  CHECK_THROWS_AS(load_documents(tmp.file("garbage.txt"), none), DataError);
}

TEST_CASE("topics and qrels") {
  testutil::TmpDir tmp("topics");
  write_file(tmp.file("topics.jsonl"),
             "{\"qid\":\"41\",\"title\":\"Winter Olympics\",\"description\":\"Medals won at "
             "Lillehammer\"}\n"
             "{\"qid\":\"42\",\"title\":\"Pesticides\",\"description\":\"\"}\n");
  auto topics = load_topics(tmp.file("topics.jsonl"));
  REQUIRE(topics.size() == 2);
  CHECK(topics[1].description.empty());

  StopList stop;
  stop.terms = {"at"};
  auto tokens = topic_query_tokens(topics[0], stop);
  CHECK(tokens == std::vector<std::string>{"winter", "olympics", "medals", "won", "lillehammer"});
  CHECK(topic_query_tokens(topics[1], stop) == std::vector<std::string>{"pesticides"});

  Topic empty{"43", "At", "at AT"};
  CHECK_THROWS_AS(topic_query_tokens(empty, stop), DataError);

  write_file(tmp.file("qrels.txt"), "41 0 LA011094-0123 1\n41 0 LA011094-0124 0\n");
  auto qrels = QrelSet::load(tmp.file("qrels.txt"));
  CHECK(qrels.grade("41", "LA011094-0123") == 1);
  CHECK(qrels.grade("41", "LA011094-0124") == 0);
  CHECK(qrels.grade("41", "nope") == 0);
  CHECK(qrels.relevant_count("41") == 1);

  write_file(tmp.file("qrels_bad.txt"), "41 0 LA011094-0123 -1\n");
  CHECK_THROWS_AS(QrelSet::load(tmp.file("qrels_bad.txt")), DataError);

  write_file(tmp.file("qrels_flag.txt"), "9 0 d1 0\n8 0 d2 1\n");
  auto flagged = QrelSet::load(tmp.file("qrels_flag.txt")).queries_without_relevant();
  REQUIRE(flagged.size() == 1);
  CHECK(flagged[0] == "9");
}

namespace {

ParallelPair pair_of(int64_t id, std::vector<std::string> tgt) {
  ParallelPair p;
  p.id = id;
  p.source_tokens = {"x"};
  p.target_tokens = std::move(tgt);
  return p;
}

}  // namespace

TEST_CASE("build_vocab: counts, ordering, specials") {
  std::vector<ParallelPair> pairs{pair_of(0, {"a", "b"}), pair_of(1, {"a"})};
  std::vector<Document> docs{testutil::doc("d1", {"b", "c"})};
  auto v = build_vocab(pairs, docs);

  CHECK(v.size() == 3 + Vocabulary::kNumSpecials);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  // totals 2,2,1 with the a/b tie broken lexicographically
  CHECK(v.token(4) == "a");
  CHECK(v.token(5) == "b");
  CHECK(v.token(6) == "c");
  CHECK(v.entry(4).count_tc == 2);
  CHECK(v.entry(4).count_rc == 0);
  CHECK(v.entry(5).count_tc == 1);
  CHECK(v.entry(5).count_rc == 1);
  CHECK(v.entry(6).count_tc == 0);
  CHECK(v.entry(6).count_rc == 1);
  CHECK(v.total_tc() == 3);
  CHECK(v.total_rc() == 2);
  CHECK(v.lookup("a") == 4);
  CHECK(v.lookup("zzz") == Vocabulary::kUnk);

  // disjoint vocabularies add up
  std::vector<Document> other{testutil::doc("d1", {"q", "r"})};
  auto v2 = build_vocab(pairs, other);
  CHECK(v2.size() == 2 + 2 + Vocabulary::kNumSpecials);

  // empty RC: every count_rc is zero
  auto v3 = build_vocab(pairs, std::span<const Document>{});
  CHECK(v3.total_rc() == 0);
  for (int32_t i = 0; i < v3.size(); ++i) CHECK(v3.entry(i).count_rc == 0);
}

TEST_CASE("vocabulary sums and TSV round trip") {
  std::vector<ParallelPair> pairs{pair_of(0, {"bb", "aa", "bb"}), pair_of(1, {"cc"})};
  std::vector<Document> docs{testutil::doc("d1", {"aa", "dd", "dd"})};
  auto v = build_vocab(pairs, docs);

  int64_t sum_tc = 0, sum_rc = 0;
  for (int32_t i = 0; i < v.size(); ++i) {
    sum_tc += v.entry(i).count_tc;
    sum_rc += v.entry(i).count_rc;
  }
  CHECK(sum_tc == v.total_tc());
  CHECK(sum_rc == v.total_rc());

  testutil::TmpDir tmp("vocab");
  v.save_tsv(tmp.file("vocab.tsv"), "# ratnmt test kind=vocab");
  auto r = Vocabulary::load_tsv(tmp.file("vocab.tsv"));
  CHECK(r.size() == v.size());
  CHECK(r.content_hash() == v.content_hash());
  for (int32_t i = 0; i < v.size(); ++i) CHECK(r.token(i) == v.token(i));

  // reload of the same inputs reproduces identical ordering
  auto v_again = build_vocab(pairs, docs);
  CHECK(v_again.content_hash() == v.content_hash());

  auto src = build_source_vocab(pairs);
  CHECK(src.lookup("x") == 4);
  CHECK(src.total_rc() == 0);
}
