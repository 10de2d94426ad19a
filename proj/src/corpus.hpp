#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "textprep.hpp"

namespace ratnmt::corpus {

// One sentence pair (s_i, t_i), both sides preprocessed and non-empty.
struct ParallelPair {
  int64_t id = 0;
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_tokens;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
};

struct Topic {
  std::string query_id;
  std::string title;
  std::string description;
};

struct LoadStats {
  int64_t kept = 0;
  int64_t dropped = 0;  // rows/documents that became empty after preprocessing
};

// Lines our own artifacts prepend; loaders skip them.
bool is_artifact_header_line(std::string_view line);

std::vector<ParallelPair> load_parallel(const std::string& path,
                                        const textprep::StopList& src_stoplist,
                                        const textprep::StopList& tgt_stoplist,
                                        LoadStats* stats = nullptr);

// JSONL ({"id","text"}) or TREC SGML (<DOC><DOCNO/><TEXT/></DOC>), detected
// from the first non-blank byte.
std::vector<Document> load_documents(const std::string& path,
                                     const textprep::StopList& stoplist,
                                     LoadStats* stats = nullptr);

std::vector<Topic> load_topics(const std::string& path);

class QrelSet {
 public:
  static QrelSet load(const std::string& path);

  void add(const std::string& qid, const std::string& doc_id, int grade);
  int grade(const std::string& qid, const std::string& doc_id) const;  // 0 when unjudged
  // Count of documents with grade > 0 for this query.
  int64_t relevant_count(const std::string& qid) const;
  bool has_query(const std::string& qid) const;
  // Queries carrying judgments but no positively judged document.
  std::vector<std::string> queries_without_relevant() const;
  const std::map<std::string, std::unordered_map<std::string, int>>& by_query() const {
    return by_query_;
  }

 private:
  std::map<std::string, std::unordered_map<std::string, int>> by_query_;
};

std::vector<std::string> topic_query_tokens(const Topic& topic,
                                            const textprep::StopList& stoplist);

// Union vocabulary over TC target tokens and RC document tokens. Indices are
// dense, with <pad>, <unk>, <bos>, <eos> reserved at 0..3, then tokens by
// descending (count_tc + count_rc), ties lexicographic.
class Vocabulary {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kUnk = 1;
  static constexpr int32_t kBos = 2;
  static constexpr int32_t kEos = 3;
  static constexpr int32_t kNumSpecials = 4;

  struct Entry {
    std::string token;
    int64_t count_tc = 0;
    int64_t count_rc = 0;
  };

  int32_t size() const { return static_cast<int32_t>(entries_.size()); }
  int32_t real_size() const { return size() - kNumSpecials; }
  const Entry& entry(int32_t idx) const { return entries_[static_cast<size_t>(idx)]; }
  const std::string& token(int32_t idx) const { return entries_[static_cast<size_t>(idx)].token; }
  // <unk> for out-of-vocabulary tokens.
  int32_t lookup(std::string_view token) const;
  std::optional<int32_t> find(std::string_view token) const;
  int64_t total_tc() const { return total_tc_; }
  int64_t total_rc() const { return total_rc_; }

  std::vector<int32_t> ids(std::span<const std::string> tokens) const;

  void save_tsv(const std::string& path, const std::string& header) const;
  static Vocabulary load_tsv(const std::string& path);
  // Hash over the content lines, independent of the header.
  uint64_t content_hash() const;

  friend Vocabulary build_vocab(std::span<const ParallelPair> tc_pairs,
                                std::span<const Document> rc_docs);
  friend Vocabulary build_source_vocab(std::span<const ParallelPair> tc_pairs);

 private:
  void finish(std::map<std::string, std::pair<int64_t, int64_t>>&& counts);
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int32_t> index_;
  int64_t total_tc_ = 0;
  int64_t total_rc_ = 0;
};

Vocabulary build_vocab(std::span<const ParallelPair> tc_pairs,
                       std::span<const Document> rc_docs);
Vocabulary build_source_vocab(std::span<const ParallelPair> tc_pairs);

}  // namespace ratnmt::corpus
