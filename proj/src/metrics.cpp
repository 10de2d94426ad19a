#include "metrics.hpp"

#include <algorithm>
#include <set>

#include "common.hpp"

namespace ratnmt::metrics {

TermStats TermStats::from_vocab(const corpus::Vocabulary& vocab) {
  TermStats s;
  for (int32_t i = corpus::Vocabulary::kNumSpecials; i < vocab.size(); ++i) {
    const auto& e = vocab.entry(i);
    s.counts[e.token] = {e.count_tc, e.count_rc};
  }
  s.total_tc = vocab.total_tc();
  s.total_rc = vocab.total_rc();
  s.vocab_size = vocab.real_size();
  return s;
}

double average_precision(const retrieval::RankedList& ranked, const corpus::QrelSet& qrels) {
  int64_t relevant_total = qrels.relevant_count(ranked.query_id);
  if (relevant_total == 0) {
    throw DataError("average_precision: query '" + ranked.query_id +
                    "' has no relevant document");
  }
  double sum = 0.0;
  int64_t hits = 0;
  for (const auto& e : ranked.entries) {
    if (qrels.grade(ranked.query_id, e.doc_id) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(e.rank);
    }
  }
  return sum / static_cast<double>(relevant_total);
}

double balance(std::span<const std::string> terms, const TermStats& stats,
               double epsilon_smoothing) {
  if (terms.empty()) throw DataError("balance: empty term set");
  if (!(epsilon_smoothing > 0.0)) throw UsageError("balance: smoothing must be positive");
  std::set<std::string> unique(terms.begin(), terms.end());
  double denom_tc = static_cast<double>(stats.total_tc) +
                    epsilon_smoothing * static_cast<double>(stats.vocab_size);
  double denom_rc = static_cast<double>(stats.total_rc) +
                    epsilon_smoothing * static_cast<double>(stats.vocab_size);
  double sum = 0.0;
  for (const auto& t : unique) {
    int64_t ctc = 0, crc = 0;
    auto it = stats.counts.find(t);
    if (it != stats.counts.end()) {
      ctc = it->second.first;
      crc = it->second.second;
    }
    double p_tc = (static_cast<double>(ctc) + epsilon_smoothing) / denom_tc;
    double p_rc = (static_cast<double>(crc) + epsilon_smoothing) / denom_rc;
    sum += p_tc / p_rc;
  }
  return sum / static_cast<double>(unique.size());
}

std::pair<double, double> translation_pr(const TranslationRecord& rec) {
  if (rec.model_terms.empty()) {
    throw DataError("translation_pr: query '" + rec.query_id + "' has empty model term set");
  }
  if (rec.human_terms.empty()) {
    throw DataError("translation_pr: query '" + rec.query_id + "' has empty human term set");
  }
  std::set<std::string> model(rec.model_terms.begin(), rec.model_terms.end());
  std::set<std::string> human(rec.human_terms.begin(), rec.human_terms.end());
  int64_t inter = 0;
  for (const auto& t : model) {
    if (human.count(t)) ++inter;
  }
  double p = static_cast<double>(inter) / static_cast<double>(model.size());
  double r = static_cast<double>(inter) / static_cast<double>(human.size());
  return {p, r};
}

double aggregate(std::span<const double> per_query_values) {
  if (per_query_values.empty()) throw DataError("aggregate: no per-query values");
  double sum = 0.0;
  for (double v : per_query_values) sum += v;
  return sum / static_cast<double>(per_query_values.size());
}

}  // namespace ratnmt::metrics
