#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"

namespace ratnmt::retrieval {

struct Posting {
  int32_t doc = 0;  // ordinal into the doc table
  int32_t tf = 0;
};

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;
};

// Immutable inverted index over RC. Doc ordinals follow natural doc_id order,
// so postings sorted by ordinal are sorted by doc_id.
class InvertedIndex {
 public:
  static InvertedIndex build(std::span<const corpus::Document> docs);

  void save(const std::string& path, const std::string& header_meta) const;
  static InvertedIndex load(const std::string& path);

  int64_t doc_count() const { return static_cast<int64_t>(doc_ids_.size()); }
  int64_t total_tokens() const { return total_tokens_; }
  const std::string& doc_id(int32_t ordinal) const {
    return doc_ids_[static_cast<size_t>(ordinal)];
  }
  int64_t doc_len(int32_t ordinal) const { return doc_len_[static_cast<size_t>(ordinal)]; }
  std::optional<int32_t> doc_ordinal(std::string_view doc_id) const;
  int64_t coll_freq(std::string_view token) const;
  const std::vector<Posting>* postings(std::string_view token) const;
  int32_t tf(std::string_view token, int32_t ordinal) const;

 private:
  std::vector<std::string> doc_ids_;
  std::vector<int64_t> doc_len_;
  std::unordered_map<std::string, int32_t> doc_index_;
  std::vector<std::string> terms_;  // lexicographic
  std::unordered_map<std::string, int32_t> term_index_;
  std::vector<int64_t> coll_freq_;
  std::vector<std::vector<Posting>> postings_;
  int64_t total_tokens_ = 0;
};

// Query-likelihood score with Dirichlet smoothing:
//   sum over query terms w with coll_freq(w) > 0 of
//   c(w,q) * log((tf(w,d) + mu*cf(w)/total) / (doc_len + mu)).
// Terms with zero collection frequency are skipped; all-zero queries error.
double ql_dirichlet_score(std::span<const std::string> query, std::string_view doc_id,
                          const InvertedIndex& index, double mu);

// Top-k over documents containing at least one query term. Ties broken by
// ascending doc_id (natural order).
RankedList search(const InvertedIndex& index, std::span<const std::string> query, int k,
                  double mu, std::string query_id = "");

// Highest-ranked document for a sentence used as a query; nullopt when the
// sentence has no scoreable term.
std::optional<std::string> top_document(const InvertedIndex& index,
                                        std::span<const std::string> sentence, double mu);

}  // namespace ratnmt::retrieval
