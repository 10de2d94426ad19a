#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "ratgen.hpp"
#include "retrieval.hpp"

namespace ratnmt::trainer {

struct TrainConfig {
  double lr_nmt = 0.01;
  double lr_we = 1e-5;
  double alpha = 0.1;
  int64_t batch_token_budget = 1024;
  int64_t validate_every = 500;
  int64_t patience = 10;
  int64_t max_steps = 2000;
  uint64_t seed = 1;
  double mu = 1500.0;
  int search_k = 1000;
  int window = 5;
  bool reshuffle_rat_per_epoch = false;
  double min_delta = 1e-6;  // early-stopping improvement threshold

  void validate() const {
    if (!(alpha >= 0.0)) throw UsageError("train config: alpha must be >= 0");
    if (!(lr_nmt > 0.0) || !(lr_we > 0.0)) throw UsageError("train config: learning rates must be > 0");
    if (patience < 1) throw UsageError("train config: patience must be >= 1");
    if (batch_token_budget < 1) throw UsageError("train config: batch token budget must be >= 1");
    if (max_steps < 1) throw UsageError("train config: max_steps must be >= 1");
    if (validate_every < 1) throw UsageError("train config: validate_every must be >= 1");
  }
};

struct PairLen {
  int64_t id = 0;
  int64_t len = 0;  // target length
};

struct Batch {
  std::vector<int64_t> pair_ids;
};

// Buckets pairs by target length, shuffles within buckets under the seed,
// packs greedily so each batch's target tokens stay within the budget, then
// shuffles the batch order.
std::vector<Batch> make_batches(std::span<const PairLen> pairs, int64_t token_budget,
                                uint64_t seed);

// Telemetry CSV: step,l_nmt,l_we,val_map,wall_ms. l_nmt is the per-target-
// token training loss of the step's batch; l_we the alpha-scaled per-pair
// CBOW loss. Missing values are empty cells.
class TelemetrySink {
 public:
  struct Row {
    int64_t step = 0;
    double l_nmt = 0.0;
    std::optional<double> l_we;
    std::optional<double> val_map;
    int64_t wall_ms = 0;
  };

  void add(Row row);
  const std::vector<Row>& rows() const { return rows_; }
  void save_csv(const std::string& path, const std::string& header) const;

 private:
  std::vector<Row> rows_;
};

struct ValQuery {
  std::string query_id;
  std::vector<int32_t> src_ids;
};

struct ValBundle {
  std::vector<ValQuery> queries;
  const retrieval::InvertedIndex* index = nullptr;
  const corpus::QrelSet* qrels = nullptr;
  const corpus::Vocabulary* union_vocab = nullptr;
  int64_t translate_max_len = 0;  // 0: model max_len - 1
};

// Translates every topic, retrieves, and returns MAP over topics with at
// least one relevant document. Untranslatable or unscoreable topics score 0.
double validate(model::TransformerModel<float>& m, const ValBundle& val, double mu, int k);

// Stop when no improvement > min_delta over the best value for `patience`
// consecutive validations.
bool should_stop(std::span<const double> val_map_history, int64_t patience,
                 double min_delta = 1e-6);

struct TrainResult {
  double best_val_map = 0.0;
  int64_t best_step = 0;
  int64_t final_step = 0;
  int64_t next_epoch = 0;
  bool early_stopped = false;
  int64_t we_steps_skipped = 0;
};

// NMT-only warm-up phase. The model is left at the best-validation-MAP
// parameters. start_step/start_epoch support resuming.
TrainResult pretrain_baseline(model::TransformerModel<float>& m,
                              std::span<const model::IdPair> pairs, const ValBundle& val,
                              const TrainConfig& cfg, TelemetrySink& telemetry,
                              int64_t start_step = 0, int64_t start_epoch = 0);

struct RatPair {
  model::IdPair pair;
  std::vector<std::string> aug_tokens;
};

// Interleaved multi-task phase: per batch, (1) alpha-scaled CBOW loss backward
// and Adam step with lr_we, then (2) NMT loss backward and Adam step with
// lr_nmt, with independent optimizer states.
TrainResult train_multitask(model::TransformerModel<float>& m, std::span<const RatPair> data,
                            const ValBundle& val, const TrainConfig& cfg,
                            const corpus::Vocabulary& vocab, TelemetrySink& telemetry,
                            int64_t start_step = 0, int64_t start_epoch = 0);

// Forward-only diagnostics (no dropout): summed loss and per-token loss.
std::pair<double, int64_t> nmt_loss_sum(model::TransformerModel<float>& m,
                                        std::span<const model::IdPair> pairs);
double per_token_loss(model::TransformerModel<float>& m, std::span<const model::IdPair> pairs);

}  // namespace ratnmt::trainer
