#pragma once

#include <cstdint>
#include <string>

namespace ratnmt::synth {

// Bilingual-lexicon benchmark generator. TC targets express concepts with
// term set A; RC documents express the same concepts with synonym set B
// (partial overlap with A); qrels link each synthetic query to planted
// documents containing the B terms. A slice of query concepts never occurs
// in TC at all, giving the vocabulary-mismatch regime the multi-task model
// is supposed to soften.
struct SynthParams {
  int n_concepts = 50;
  int n_overlap = 16;   // concepts where A == B
  int n_mismatch = 10;  // concepts absent from TC (query/RC only)
  int n_tc_pairs = 600;
  int n_background_docs = 40;
  int n_val_queries = 16;
  int n_test_queries = 24;
  int n_planted_per_query = 3;
  int n_shared_fillers = 6;  // in TC targets and RC docs
  int n_tc_fillers = 6;      // TC targets only
  int n_rc_noise = 6;        // RC docs only
  double filler_prob = 0.5;
};

struct SynthFiles {
  std::string tc;
  std::string rc;
  std::string topics_val;
  std::string topics_test;
  std::string ref_val;
  std::string ref_test;
  std::string qrels_val;
  std::string qrels_test;
  std::string stoplist;
  std::string conf;
};

// Writes the corpus files plus a ready-to-run pipeline config into out_dir.
// Byte-deterministic for a given (params, seed).
SynthFiles generate(const std::string& out_dir, const SynthParams& params, uint64_t seed,
                    const std::string& header);

}  // namespace ratnmt::synth
