#include "ratnmt.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "common.hpp"
#include "corpus.hpp"
#include "model.hpp"
#include "model_io.hpp"
#include "pipeline.hpp"
#include "retrieval.hpp"
#include "version.hpp"

using namespace ratnmt;

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_message;

rnt_status to_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
      return RNT_ERR_USAGE;
    case ErrorKind::Data:
      return RNT_ERR_DATA;
    case ErrorKind::Internal:
      return RNT_ERR_INTERNAL;
  }
  return RNT_ERR_INTERNAL;
}

template <typename Fn>
rnt_status guarded(Fn&& fn) {
  try {
    fn();
    return RNT_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RNT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RNT_ERR_INTERNAL;
  }
}

rnt_status run_stage(const rnt_config* cfg, const char** message,
                     pipeline::StageResult (*stage)(const pipeline::RunConfig&));

}  // namespace

struct rnt_config {
  pipeline::RunConfig cfg;
  mutable std::string get_buffer;
};

struct rnt_index {
  retrieval::InvertedIndex index;
};

struct rnt_ranking {
  retrieval::RankedList list;
};

struct rnt_model {
  corpus::Vocabulary vocab;
  corpus::Vocabulary src_vocab;
  model::TransformerModel<float>* m = nullptr;
  ~rnt_model() { delete m; }
};

extern "C" {

const char* rnt_version(void) { return RATNMT_VERSION; }

const char* rnt_last_error(void) { return g_last_error.c_str(); }

rnt_config* rnt_config_new(void) { return new (std::nothrow) rnt_config(); }

void rnt_config_free(rnt_config* cfg) { delete cfg; }

rnt_status rnt_config_load(rnt_config* cfg, const char* path) {
  if (!cfg || !path) {
    g_last_error = "rnt_config_load: null argument";
    return RNT_ERR_USAGE;
  }
  return guarded([&] {
    auto loaded = pipeline::RunConfig::from_file(path);
    // File values fill in; explicit set() calls made earlier stay in force
    // only if re-applied afterwards, matching CLI flag-over-file precedence.
    for (const auto& [k, v] : loaded.entries()) cfg->cfg.set(k, v);
  });
}

rnt_status rnt_config_set(rnt_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) {
    g_last_error = "rnt_config_set: null argument";
    return RNT_ERR_USAGE;
  }
  return guarded([&] { cfg->cfg.set(key, value); });
}

const char* rnt_config_get(const rnt_config* cfg, const char* key) {
  if (!cfg || !key || !cfg->cfg.has(key)) return nullptr;
  cfg->get_buffer = cfg->cfg.get_str(key);
  return cfg->get_buffer.c_str();
}

rnt_status rnt_run_prep(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_prep);
}
rnt_status rnt_run_index_build(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_index_build);
}
rnt_status rnt_run_ratgen(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_ratgen);
}
rnt_status rnt_run_train_baseline(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_train_baseline);
}
rnt_status rnt_run_train_multitask(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_train_multitask);
}
rnt_status rnt_run_translate(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_translate);
}
rnt_status rnt_run_retrieve(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_retrieve);
}
rnt_status rnt_run_eval(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_eval);
}
rnt_status rnt_run_synth(const rnt_config* cfg, const char** message) {
  return run_stage(cfg, message, &pipeline::run_synth);
}

rnt_status rnt_index_open(const char* path, rnt_index** out) {
  if (!path || !out) {
    g_last_error = "rnt_index_open: null argument";
    return RNT_ERR_USAGE;
  }
  *out = nullptr;
  return guarded([&] {
    auto* h = new rnt_index{retrieval::InvertedIndex::load(path)};
    *out = h;
  });
}

void rnt_index_close(rnt_index* index) { delete index; }

int64_t rnt_index_doc_count(const rnt_index* index) {
  return index ? index->index.doc_count() : 0;
}

int64_t rnt_index_total_tokens(const rnt_index* index) {
  return index ? index->index.total_tokens() : 0;
}

rnt_status rnt_index_search(const rnt_index* index, const char* query, int k, double mu,
                            rnt_ranking** out) {
  if (!index || !query || !out) {
    g_last_error = "rnt_index_search: null argument";
    return RNT_ERR_USAGE;
  }
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> tokens;
    for (const auto& t : split(query, ' ')) {
      if (!t.empty()) tokens.push_back(t);
    }
    auto* h = new rnt_ranking{retrieval::search(index->index, tokens, k, mu)};
    *out = h;
  });
}

void rnt_ranking_free(rnt_ranking* ranking) { delete ranking; }

int64_t rnt_ranking_size(const rnt_ranking* ranking) {
  return ranking ? static_cast<int64_t>(ranking->list.entries.size()) : 0;
}

const char* rnt_ranking_doc_id(const rnt_ranking* ranking, int64_t i) {
  if (!ranking || i < 0 || i >= rnt_ranking_size(ranking)) return nullptr;
  return ranking->list.entries[static_cast<size_t>(i)].doc_id.c_str();
}

double rnt_ranking_score(const rnt_ranking* ranking, int64_t i) {
  if (!ranking || i < 0 || i >= rnt_ranking_size(ranking)) return 0.0;
  return ranking->list.entries[static_cast<size_t>(i)].score;
}

rnt_status rnt_model_open(const char* checkpoint_path, const char* vocab_tsv,
                          const char* src_vocab_tsv, rnt_model** out) {
  if (!checkpoint_path || !vocab_tsv || !src_vocab_tsv || !out) {
    g_last_error = "rnt_model_open: null argument";
    return RNT_ERR_USAGE;
  }
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<rnt_model>();
    handle->vocab = corpus::Vocabulary::load_tsv(vocab_tsv);
    handle->src_vocab = corpus::Vocabulary::load_tsv(src_vocab_tsv);
    auto ckpt = model::load_checkpoint(checkpoint_path);
    if (auto it = ckpt.meta.find("vocab_hash");
        it != ckpt.meta.end() && it->second != hex64(handle->vocab.content_hash())) {
      throw DataError("checkpoint vocabulary hash does not match the vocabulary file");
    }
    auto mc = model::config_from_meta(ckpt.meta);
    handle->m = new model::TransformerModel<float>(mc, 0);
    model::apply_checkpoint(ckpt, *handle->m);
    *out = handle.release();
  });
}

void rnt_model_close(rnt_model* model) { delete model; }

rnt_status rnt_model_translate(const rnt_model* model, const char* source, int beam_width,
                               char** out) {
  if (!model || !source || !out) {
    g_last_error = "rnt_model_translate: null argument";
    return RNT_ERR_USAGE;
  }
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> tokens;
    for (const auto& t : split(source, ' ')) {
      if (!t.empty()) tokens.push_back(t);
    }
    auto src_ids = model->src_vocab.ids(tokens);
    auto out_ids = model->m->beam_decode(src_ids, model->m->cfg.max_len - 1, beam_width);
    std::string joined;
    for (int32_t id : out_ids) {
      if (id < corpus::Vocabulary::kNumSpecials) continue;
      if (!joined.empty()) joined += ' ';
      joined += model->vocab.token(id);
    }
    char* buf = static_cast<char*>(std::malloc(joined.size() + 1));
    if (!buf) throw InternalError("out of memory");
    std::memcpy(buf, joined.c_str(), joined.size() + 1);
    *out = buf;
  });
}

void rnt_string_free(char* s) { std::free(s); }

}  // extern "C"

namespace {

rnt_status run_stage(const rnt_config* cfg, const char** message,
                     pipeline::StageResult (*stage)(const pipeline::RunConfig&)) {
  if (message) *message = nullptr;
  if (!cfg) {
    g_last_error = "stage: null config";
    return RNT_ERR_USAGE;
  }
  return guarded([&] {
    auto result = stage(cfg->cfg);
    g_last_message = result.skipped ? result.message + " (skipped)" : result.message;
    if (message) *message = g_last_message.c_str();
  });
}

}  // namespace
