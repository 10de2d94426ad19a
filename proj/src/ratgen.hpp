#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "retrieval.hpp"

namespace ratnmt::ratgen {

// Lookup from doc_id to its token sequence; the index itself keeps no text.
class DocStore {
 public:
  explicit DocStore(std::span<const corpus::Document> docs);
  const std::vector<std::string>* tokens(std::string_view doc_id) const;

 private:
  std::unordered_map<std::string, const corpus::Document*> by_id_;
};

// (s_i, t_i, t_i'): the target sentence augmented with its top document.
struct AugmentedTriple {
  corpus::ParallelPair pair;
  std::vector<std::string> aug_tokens;
  std::optional<std::string> top_doc;
};

struct ContextPivotPair {
  std::vector<int32_t> context;
  int32_t pivot = 0;
};

struct RatGroup {
  int64_t pair_id = 0;
  std::vector<ContextPivotPair> pairs;
};

// Retrieves the top document for t_i, concatenates, caps (keeping all of t_i
// and sampling document tokens), and shuffles with a PRNG seeded by
// (seed, pair.id). Without a top document the triple degrades to t_i alone.
AugmentedTriple augment(const corpus::ParallelPair& pair, const retrieval::InvertedIndex& index,
                        const DocStore& docs, int64_t cap, uint64_t seed, double mu);

// CBOW pairs over a window; tokens outside the vocabulary map to <unk>.
std::vector<ContextPivotPair> context_pivot_pairs(const AugmentedTriple& aug, int window,
                                                  const corpus::Vocabulary& vocab);

// Recomputes CBOW pairs from a token sequence (used when re-shuffling per epoch).
std::vector<ContextPivotPair> context_pivot_pairs_tokens(std::span<const std::string> tokens,
                                                         int window,
                                                         const corpus::Vocabulary& vocab);

struct RatDataset {
  std::vector<AugmentedTriple> triples;  // ordered by pair.id
  std::vector<RatGroup> groups;          // aligned with triples
  int64_t pairs_without_top_doc = 0;
};

RatDataset build_rat_dataset(std::span<const corpus::ParallelPair> tc,
                             const retrieval::InvertedIndex& index, const DocStore& docs,
                             int64_t cap, int window, uint64_t seed,
                             const corpus::Vocabulary& vocab, double mu);

// TC' persistence: JSONL records {"id","src","tgt","aug","top_doc"}.
void save_triples(const std::string& path, std::span<const AugmentedTriple> triples,
                  const std::string& header_meta);
std::vector<AugmentedTriple> load_triples(const std::string& path);

}  // namespace ratnmt::ratgen
