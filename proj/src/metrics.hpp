#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "retrieval.hpp"

namespace ratnmt::metrics {

// Per-token TC/RC counts with corpus totals, backing the balance metric.
// Built from the union vocabulary; the reserved specials do not count.
struct TermStats {
  std::unordered_map<std::string, std::pair<int64_t, int64_t>> counts;  // (tc, rc)
  int64_t total_tc = 0;
  int64_t total_rc = 0;
  int64_t vocab_size = 0;  // |V_union| without specials

  static TermStats from_vocab(const corpus::Vocabulary& vocab);
};

struct TranslationRecord {
  std::string query_id;
  std::vector<std::string> model_terms;  // Q^M, deduplicated
  std::vector<std::string> human_terms;  // Q', deduplicated
};

// AP = sum over relevant ranks of Precision@rank, divided by the number of
// relevant documents for the query (grade > 0). Errors when that count is 0.
double average_precision(const retrieval::RankedList& ranked, const corpus::QrelSet& qrels);

// Mean over unique terms of P_TC(t)/P_RC(t) with additive smoothing:
// P_C(t) = (count_C(t) + eps) / (total_C + eps * |V_union|).
double balance(std::span<const std::string> terms, const TermStats& stats,
               double epsilon_smoothing = 1.0);

// Exact set-intersection precision/recall of model terms against the human
// translation terms; no stemming, so morphological variants do not match.
std::pair<double, double> translation_pr(const TranslationRecord& rec);

double aggregate(std::span<const double> per_query_values);

}  // namespace ratnmt::metrics
