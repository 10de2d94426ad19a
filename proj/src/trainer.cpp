#include "trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>

#include "common.hpp"
#include "metrics.hpp"

namespace ratnmt::trainer {

std::vector<Batch> make_batches(std::span<const PairLen> pairs, int64_t token_budget,
                                uint64_t seed) {
  for (const auto& p : pairs) {
    if (p.len > token_budget) {
      throw DataError("pair " + std::to_string(p.id) + " has target length " +
                      std::to_string(p.len) + " exceeding the batch token budget " +
                      std::to_string(token_budget));
    }
    if (p.len < 1) throw DataError("pair " + std::to_string(p.id) + " has empty target");
  }
  std::map<int64_t, std::vector<int64_t>> buckets;
  for (const auto& p : pairs) buckets[p.len].push_back(p.id);

  Rng rng(seed);
  std::vector<std::pair<int64_t, int64_t>> ordered;  // (id, len) after in-bucket shuffle
  ordered.reserve(pairs.size());
  for (auto& [len, ids] : buckets) {
    rng.shuffle(ids);
    for (int64_t id : ids) ordered.emplace_back(id, len);
  }

  std::vector<Batch> batches;
  Batch cur;
  int64_t cur_tokens = 0;
  for (const auto& [id, len] : ordered) {
    if (cur_tokens + len > token_budget && !cur.pair_ids.empty()) {
      batches.push_back(std::move(cur));
      cur = Batch{};
      cur_tokens = 0;
    }
    cur.pair_ids.push_back(id);
    cur_tokens += len;
  }
  if (!cur.pair_ids.empty()) batches.push_back(std::move(cur));
  rng.shuffle(batches);
  return batches;
}

void TelemetrySink::add(Row row) {
  if (!rows_.empty() && row.step <= rows_.back().step) {
    throw InternalError("telemetry steps must be strictly increasing");
  }
  rows_.push_back(std::move(row));
}

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void TelemetrySink::save_csv(const std::string& path, const std::string& header) const {
  std::ostringstream oss;
  if (!header.empty()) oss << header << "\n";
  oss << "step,l_nmt,l_we,val_map,wall_ms\n";
  for (const auto& r : rows_) {
    oss << r.step << ',' << fmt_g(r.l_nmt) << ',';
    if (r.l_we) oss << fmt_g(*r.l_we);
    oss << ',';
    if (r.val_map) oss << fmt_g(*r.val_map);
    oss << ',' << r.wall_ms << "\n";
  }
  write_file(path, oss.str());
}

double validate(model::TransformerModel<float>& m, const ValBundle& val, double mu, int k) {
  if (!val.index || !val.qrels || !val.union_vocab) {
    throw UsageError("validate: validation bundle missing index, qrels or vocabulary");
  }
  if (val.queries.empty()) throw DataError("validate: no validation queries");
  int64_t max_len = val.translate_max_len > 0 ? val.translate_max_len : m.cfg.max_len - 1;
  std::vector<double> aps;
  for (const auto& q : val.queries) {
    if (val.qrels->relevant_count(q.query_id) == 0) continue;  // excluded topics
    std::vector<int32_t> out_ids = m.greedy_decode(q.src_ids, max_len);
    std::vector<std::string> tokens;
    for (int32_t id : out_ids) {
      if (id >= corpus::Vocabulary::kNumSpecials) tokens.push_back(val.union_vocab->token(id));
    }
    double ap = 0.0;
    if (!tokens.empty()) {
      try {
        retrieval::RankedList ranked = retrieval::search(*val.index, tokens, k, mu, q.query_id);
        ap = metrics::average_precision(ranked, *val.qrels);
      } catch (const DataError&) {
        ap = 0.0;  // no scoreable term: contributes zero
      }
    }
    aps.push_back(ap);
  }
  if (aps.empty()) throw DataError("validate: no validation topic has a relevant document");
  double sum = 0.0;
  for (double v : aps) sum += v;
  return sum / static_cast<double>(aps.size());
}

bool should_stop(std::span<const double> val_map_history, int64_t patience, double min_delta) {
  if (val_map_history.empty()) throw UsageError("should_stop: empty history");
  if (patience < 1) throw UsageError("should_stop: patience must be >= 1");
  double best = -1.0;
  int64_t streak = 0;
  for (double v : val_map_history) {
    if (v > best + min_delta) {
      best = v;
      streak = 0;
    } else {
      ++streak;
    }
  }
  return streak >= patience;
}

namespace {

using ModelF = model::TransformerModel<float>;
using ParamF = autodiff::Parameter<float>;

std::vector<autodiff::Tensor<float>> snapshot(ModelF& m) {
  std::vector<autodiff::Tensor<float>> out;
  for (auto* p : m.all_params()) out.push_back(p->value);
  return out;
}

void restore(ModelF& m, const std::vector<autodiff::Tensor<float>>& snap) {
  auto params = m.all_params();
  if (params.size() != snap.size()) throw InternalError("restore: snapshot size mismatch");
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

int64_t target_tokens(std::span<const model::IdPair> batch) {
  int64_t n = 0;
  for (const auto& p : batch) n += static_cast<int64_t>(p.tgt.size()) + 1;  // + <eos>
  return n;
}

struct PhaseClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

}  // namespace

TrainResult pretrain_baseline(ModelF& m, std::span<const model::IdPair> pairs,
                              const ValBundle& val, const TrainConfig& cfg,
                              TelemetrySink& telemetry, int64_t start_step,
                              int64_t start_epoch) {
  cfg.validate();
  if (pairs.empty()) throw DataError("pretrain_baseline: no training pairs");
  if (!val.index || !val.qrels) throw DataError("pretrain_baseline: validation bundle missing");

  std::vector<PairLen> lens;
  lens.reserve(pairs.size());
  std::map<int64_t, const model::IdPair*> by_id;
  for (const auto& p : pairs) {
    lens.push_back({p.id, static_cast<int64_t>(p.tgt.size())});
    by_id[p.id] = &p;
  }

  autodiff::AdamOptimizer<float> opt(m.nmt_params());
  TrainResult res;
  std::vector<double> history;
  std::vector<autodiff::Tensor<float>> best;
  PhaseClock clock;

  int64_t step = start_step;
  int64_t epoch = start_epoch;
  bool done = false;
  while (!done) {
    auto batches = make_batches(lens, cfg.batch_token_budget, hash_seed(cfg.seed, "batches",
                                                                        static_cast<uint64_t>(epoch)));
    for (const auto& batch : batches) {
      ++step;
      std::vector<model::IdPair> items;
      items.reserve(batch.pair_ids.size());
      for (int64_t id : batch.pair_ids) items.push_back(*by_id.at(id));

      autodiff::Graph<float> g;
      Rng drop(hash_seed(cfg.seed, "nmt-dropout", static_cast<uint64_t>(step)));
      Rng* drop_p = m.cfg.dropout_rate > 0.0 ? &drop : nullptr;
      auto loss = m.nmt_loss(g, items, drop_p);
      double loss_value = static_cast<double>(g.value(loss)(0, 0));
      g.backward(loss);
      opt.step(cfg.lr_nmt);

      TelemetrySink::Row row;
      row.step = step;
      row.l_nmt = loss_value / static_cast<double>(target_tokens(items));
      row.wall_ms = clock.ms();

      int64_t phase_steps = step - start_step;
      if (phase_steps % cfg.validate_every == 0 || phase_steps >= cfg.max_steps) {
        double map = validate(m, val, cfg.mu, cfg.search_k);
        history.push_back(map);
        row.val_map = map;
        if (best.empty() || map >= res.best_val_map - cfg.min_delta) {
          if (map > res.best_val_map) res.best_val_map = map;
          res.best_step = step;
          best = snapshot(m);
        }
        if (should_stop(history, cfg.patience, cfg.min_delta)) {
          res.early_stopped = true;
          done = true;
        }
      }
      telemetry.add(std::move(row));
      if (phase_steps >= cfg.max_steps) done = true;
      if (done) break;
    }
    ++epoch;
  }
  res.final_step = step;
  res.next_epoch = epoch;
  if (!best.empty()) restore(m, best);
  return res;
}

TrainResult train_multitask(ModelF& m, std::span<const RatPair> data, const ValBundle& val,
                            const TrainConfig& cfg, const corpus::Vocabulary& vocab,
                            TelemetrySink& telemetry, int64_t start_step, int64_t start_epoch) {
  cfg.validate();
  if (data.empty()) throw DataError("train_multitask: no training data");
  if (!val.index || !val.qrels) throw DataError("train_multitask: validation bundle missing");

  std::vector<PairLen> lens;
  lens.reserve(data.size());
  std::map<int64_t, const RatPair*> by_id;
  for (const auto& r : data) {
    lens.push_back({r.pair.id, static_cast<int64_t>(r.pair.tgt.size())});
    by_id[r.pair.id] = &r;
  }

  // Context/pivot pairs are fixed at dataset build unless per-epoch
  // reshuffling is enabled.
  std::map<int64_t, std::vector<ratgen::ContextPivotPair>> rat_static;
  if (!cfg.reshuffle_rat_per_epoch) {
    for (const auto& r : data) {
      rat_static[r.pair.id] = ratgen::context_pivot_pairs_tokens(r.aug_tokens, cfg.window, vocab);
    }
  }

  autodiff::AdamOptimizer<float> nmt_opt(m.nmt_params());
  autodiff::AdamOptimizer<float> we_opt(m.we_params());
  TrainResult res;
  std::vector<double> history;
  std::vector<autodiff::Tensor<float>> best;
  PhaseClock clock;

  int64_t step = start_step;
  int64_t epoch = start_epoch;
  bool done = false;
  while (!done) {
    std::map<int64_t, std::vector<ratgen::ContextPivotPair>> rat_epoch;
    const auto* rat = &rat_static;
    if (cfg.reshuffle_rat_per_epoch) {
      for (const auto& r : data) {
        std::vector<std::string> tokens = r.aug_tokens;
        Rng rng(hash_seed(cfg.seed, "rat-reshuffle",
                          hash_mix(static_cast<uint64_t>(epoch), static_cast<uint64_t>(r.pair.id))));
        rng.shuffle(tokens);
        rat_epoch[r.pair.id] = ratgen::context_pivot_pairs_tokens(tokens, cfg.window, vocab);
      }
      rat = &rat_epoch;
    }

    auto batches = make_batches(lens, cfg.batch_token_budget, hash_seed(cfg.seed, "batches",
                                                                        static_cast<uint64_t>(epoch)));
    for (const auto& batch : batches) {
      ++step;
      std::vector<model::IdPair> items;
      std::vector<ratgen::ContextPivotPair> rat_pairs;
      for (int64_t id : batch.pair_ids) {
        items.push_back(by_id.at(id)->pair);
        const auto& group = rat->at(id);
        rat_pairs.insert(rat_pairs.end(), group.begin(), group.end());
      }

      // (1) word-embedding step on the batch's RAT pairs
      std::optional<double> l_we;
      if (rat_pairs.empty()) {
        ++res.we_steps_skipped;
      } else {
        autodiff::Graph<float> g;
        auto raw = m.cbow_loss(g, rat_pairs);
        auto scaled = g.scale(raw, static_cast<float>(cfg.alpha));
        double raw_value = static_cast<double>(g.value(raw)(0, 0));
        g.backward(scaled);
        we_opt.step(cfg.lr_we);
        l_we = cfg.alpha * raw_value / static_cast<double>(rat_pairs.size());
      }

      // (2) NMT step on the sentence pairs
      autodiff::Graph<float> g;
      Rng drop(hash_seed(cfg.seed, "nmt-dropout", static_cast<uint64_t>(step)));
      Rng* drop_p = m.cfg.dropout_rate > 0.0 ? &drop : nullptr;
      auto loss = m.nmt_loss(g, items, drop_p);
      double loss_value = static_cast<double>(g.value(loss)(0, 0));
      g.backward(loss);
      nmt_opt.step(cfg.lr_nmt);

      TelemetrySink::Row row;
      row.step = step;
      row.l_nmt = loss_value / static_cast<double>(target_tokens(items));
      row.l_we = l_we;
      row.wall_ms = clock.ms();

      int64_t phase_steps = step - start_step;
      if (phase_steps % cfg.validate_every == 0 || phase_steps >= cfg.max_steps) {
        double map = validate(m, val, cfg.mu, cfg.search_k);
        history.push_back(map);
        row.val_map = map;
        if (best.empty() || map >= res.best_val_map - cfg.min_delta) {
          if (map > res.best_val_map) res.best_val_map = map;
          res.best_step = step;
          best = snapshot(m);
        }
        if (should_stop(history, cfg.patience, cfg.min_delta)) {
          res.early_stopped = true;
          done = true;
        }
      }
      telemetry.add(std::move(row));
      if (phase_steps >= cfg.max_steps) done = true;
      if (done) break;
    }
    ++epoch;
  }
  res.final_step = step;
  res.next_epoch = epoch;
  if (!best.empty()) restore(m, best);
  return res;
}

std::pair<double, int64_t> nmt_loss_sum(ModelF& m, std::span<const model::IdPair> pairs) {
  autodiff::Graph<float> g;
  auto loss = m.nmt_loss(g, pairs, nullptr);
  return {static_cast<double>(g.value(loss)(0, 0)), target_tokens(pairs)};
}

double per_token_loss(ModelF& m, std::span<const model::IdPair> pairs) {
  auto [sum, tokens] = nmt_loss_sum(m, pairs);
  return sum / static_cast<double>(tokens);
}

}  // namespace ratnmt::trainer
