#include "pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common.hpp"
#include "corpus.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "model_io.hpp"
#include "ratgen.hpp"
#include "retrieval.hpp"
#include "synth.hpp"
#include "textprep.hpp"
#include "trainer.hpp"
#include "version.hpp"

namespace ratnmt::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig cfg;
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": expected key=value");
    }
    cfg.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw UsageError("config: empty key");
  entries_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string RunConfig::get_str(const std::string& key, const std::string& def) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? def : it->second;
}

int64_t RunConfig::get_i64(const std::string& key, int64_t def) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? def : parse_i64(it->second, "config key " + key);
}

double RunConfig::get_f64(const std::string& key, double def) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? def : parse_f64(it->second, "config key " + key);
}

bool RunConfig::get_bool(const std::string& key, bool def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("config key " + key + ": expected boolean, got '" + v + "'");
}

uint64_t RunConfig::seed() const {
  return static_cast<uint64_t>(get_i64("seed", 1));
}

// Path-typed and routing keys stay out of the hash: the hash names the
// experiment's semantics, while stage stamps track input file contents.
uint64_t RunConfig::config_hash() const {
  static const std::set<std::string> kExcluded{
      "workdir", "synth_dir", "tc",        "rc",        "topics",  "ref_topics",
      "qrels",   "val_topics", "val_qrels", "stoplist_src", "stoplist_tgt",
      "run",     "translations", "model",   "force"};
  uint64_t h = fnv1a64("ratnmt-config");
  for (const auto& [k, v] : entries_) {
    if (kExcluded.count(k)) continue;
    h = fnv1a64(k + "=" + v + "\n", h);
  }
  return h;
}

std::string RunConfig::header(const std::string& kind) const {
  return "# ratnmt " RATNMT_VERSION " kind=" + kind + " seed=" + std::to_string(seed()) +
         " config=" + hex64(config_hash());
}

std::string RunConfig::workdir() const {
  std::string w = get_str("workdir");
  if (w.empty()) throw UsageError("config key 'workdir' is required");
  return w;
}

std::string RunConfig::artifact(const std::string& name) const {
  return (fs::path(workdir()) / name).string();
}

std::string RunConfig::require_path(const std::string& key) const {
  std::string p = get_str(key);
  if (p.empty()) throw UsageError("config key '" + key + "' is required for this command");
  if (!fs::exists(p)) throw DataError("config key '" + key + "': file not found: " + p);
  return p;
}

namespace {

// --- stage stamps: skip completed stages whose inputs have not changed ---

uint64_t file_hash(const std::string& path) {
  return fnv1a64(read_file(path));
}

struct Stage {
  const RunConfig& cfg;
  std::string name;
  uint64_t h;
  std::vector<std::string> outputs;

  Stage(const RunConfig& c, std::string n) : cfg(c), name(std::move(n)) {
    h = fnv1a64("ratnmt-stage " RATNMT_VERSION " " + name);
    mix_str(hex64(cfg.config_hash()));
  }
  void mix_str(const std::string& s) { h = fnv1a64(s + "\n", h); }
  void mix_file(const std::string& path) {
    mix_str(path);
    mix_str(hex64(file_hash(path)));
  }
  void out(const std::string& path) { outputs.push_back(path); }

  std::string stamp_path() const { return cfg.artifact(".stage." + name); }

  bool can_skip() const {
    if (cfg.get_bool("force", false)) return false;
    if (!fs::exists(stamp_path())) return false;
    std::string content = read_file(stamp_path());
    if (std::string(trim(content)) != hex64(h)) return false;
    for (const auto& o : outputs) {
      if (!fs::exists(o)) return false;
    }
    return true;
  }
  void record() const { write_file(stamp_path(), hex64(h) + "\n"); }
};

textprep::StopList optional_stoplist(const RunConfig& cfg, const std::string& key,
                                     const std::string& language) {
  std::string path = cfg.get_str(key);
  if (path.empty()) return textprep::StopList::none();
  return textprep::StopList::load(cfg.require_path(key), language);
}

void write_prepped_queries(const std::string& path, const std::vector<corpus::Topic>& topics,
                           const textprep::StopList& stoplist, const std::string& header) {
  std::ostringstream oss;
  json meta;
  meta["_meta"] = {{"header", header}};
  oss << meta.dump() << "\n";
  for (const auto& t : topics) {
    json j;
    j["qid"] = t.query_id;
    j["tokens"] = corpus::topic_query_tokens(t, stoplist);
    oss << j.dump() << "\n";
  }
  write_file(path, oss.str());
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<model::IdPair> to_id_pairs(const std::vector<corpus::ParallelPair>& pairs,
                                       const corpus::Vocabulary& src_vocab,
                                       const corpus::Vocabulary& union_vocab) {
  std::vector<model::IdPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    model::IdPair ip;
    ip.id = p.id;
    ip.src = src_vocab.ids(p.source_tokens);
    ip.tgt = union_vocab.ids(p.target_tokens);
    out.push_back(std::move(ip));
  }
  return out;
}

model::TransformerConfig model_config(const RunConfig& cfg, int32_t vocab_src,
                                      int32_t vocab_union) {
  model::TransformerConfig mc;
  mc.d_model = cfg.get_i64("d_model", 64);
  mc.n_heads = cfg.get_i64("n_heads", 4);
  mc.n_layers = cfg.get_i64("n_layers", 2);
  mc.d_ff = cfg.get_i64("d_ff", 256);
  mc.max_len = cfg.get_i64("max_len", 64);
  mc.dropout_rate = cfg.get_f64("dropout", 0.1);
  mc.vocab_src = vocab_src;
  mc.vocab_union = vocab_union;
  return mc;
}

trainer::TrainConfig train_config(const RunConfig& cfg, const std::string& max_steps_key) {
  trainer::TrainConfig tc;
  tc.lr_nmt = cfg.get_f64("lr_nmt", 0.01);
  tc.lr_we = cfg.get_f64("lr_we", 1e-5);
  tc.alpha = cfg.get_f64("alpha", 0.1);
  tc.batch_token_budget = cfg.get_i64("batch_tokens", 1024);
  tc.validate_every = cfg.get_i64("validate_every", 500);
  tc.patience = cfg.get_i64("patience", 10);
  tc.max_steps = cfg.get_i64(max_steps_key, 2000);
  tc.seed = cfg.seed();
  tc.mu = cfg.get_f64("mu", 1500.0);
  tc.search_k = static_cast<int>(cfg.get_i64("k", 1000));
  tc.window = static_cast<int>(cfg.get_i64("window", 5));
  tc.reshuffle_rat_per_epoch = cfg.get_bool("reshuffle_rat", false);
  return tc;
}

struct ValData {
  retrieval::InvertedIndex index;
  corpus::QrelSet qrels;
  std::vector<PreppedQuery> queries;
};

trainer::ValBundle make_val_bundle(const ValData& data, const corpus::Vocabulary& src_vocab,
                                   const corpus::Vocabulary& union_vocab,
                                   std::vector<trainer::ValQuery>& storage) {
  storage.clear();
  for (const auto& q : data.queries) {
    storage.push_back({q.qid, src_vocab.ids(q.tokens)});
  }
  trainer::ValBundle val;
  val.queries = storage;
  val.index = &data.index;
  val.qrels = &data.qrels;
  val.union_vocab = &union_vocab;
  return val;
}

std::map<std::string, std::string> checkpoint_meta(const RunConfig& cfg,
                                                   const model::TransformerConfig& mc,
                                                   const std::string& phase,
                                                   const trainer::TrainResult& res,
                                                   uint64_t vocab_hash, uint64_t src_vocab_hash) {
  auto meta = model::config_to_meta(mc);
  meta["version"] = RATNMT_VERSION;
  meta["phase"] = phase;
  meta["seed"] = std::to_string(cfg.seed());
  meta["config_hash"] = hex64(cfg.config_hash());
  meta["vocab_hash"] = hex64(vocab_hash);
  meta["src_vocab_hash"] = hex64(src_vocab_hash);
  meta["step"] = std::to_string(res.final_step);
  meta["best_step"] = std::to_string(res.best_step);
  meta["best_val_map"] = fmt_g(res.best_val_map);
  meta["next_epoch"] = std::to_string(res.next_epoch);
  return meta;
}

std::string resolve_model_checkpoint(const RunConfig& cfg) {
  std::string which = cfg.get_str("model", "multitask");
  if (which == "baseline") return cfg.artifact("baseline.ckpt");
  if (which == "multitask") return cfg.artifact("multitask.ckpt");
  return which;  // explicit path
}

std::string model_tag(const RunConfig& cfg) {
  std::string which = cfg.get_str("model", "multitask");
  if (which == "baseline" || which == "multitask") return which;
  return "custom";
}

}  // namespace

std::vector<PreppedQuery> load_prepped_queries(const std::string& path) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  std::vector<PreppedQuery> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": unparseable JSON record");
    }
    if (j.contains("_meta")) continue;
    try {
      out.push_back({j.at("qid").get<std::string>(),
                     j.at("tokens").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TranslationEntry> load_translations(const std::string& path) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  std::vector<TranslationEntry> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": unparseable JSON record");
    }
    if (j.contains("_meta")) continue;
    TranslationEntry e;
    try {
      e.qid = j.at("qid").get<std::string>();
      e.model_terms = j.at("model_terms").get<std::vector<std::string>>();
      if (j.contains("model_tokens")) {
        e.model_tokens = j.at("model_tokens").get<std::vector<std::string>>();
      } else {
        e.model_tokens = e.model_terms;
      }
      if (j.contains("human_terms")) {
        e.human_terms = j.at("human_terms").get<std::vector<std::string>>();
      }
    } catch (const json::exception& ex) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": " + ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

StageResult run_prep(const RunConfig& cfg) {
  fs::create_directories(cfg.workdir());
  std::string tc_path = cfg.require_path("tc");
  std::string rc_path = cfg.require_path("rc");

  Stage stage(cfg, "prep");
  stage.mix_file(tc_path);
  stage.mix_file(rc_path);
  for (const char* key : {"topics", "ref_topics", "val_topics", "stoplist_src", "stoplist_tgt"}) {
    if (cfg.has(key)) stage.mix_file(cfg.require_path(key));
  }
  stage.out(cfg.artifact("prep.tc.tsv"));
  stage.out(cfg.artifact("prep.rc.jsonl"));
  stage.out(cfg.artifact("vocab.tsv"));
  stage.out(cfg.artifact("vocab.src.tsv"));
  if (cfg.has("topics")) stage.out(cfg.artifact("prep.queries.topics.jsonl"));
  if (cfg.has("ref_topics")) stage.out(cfg.artifact("prep.queries.ref.jsonl"));
  if (cfg.has("val_topics")) stage.out(cfg.artifact("prep.queries.val.jsonl"));
  if (stage.can_skip()) return {true, "prep: up to date"};

  auto src_stop = optional_stoplist(cfg, "stoplist_src", "src");
  auto tgt_stop = optional_stoplist(cfg, "stoplist_tgt", "tgt");

  corpus::LoadStats tc_stats, rc_stats;
  auto pairs = corpus::load_parallel(tc_path, src_stop, tgt_stop, &tc_stats);
  if (pairs.empty()) throw DataError("prep: no usable parallel pairs in " + tc_path);
  auto docs = corpus::load_documents(rc_path, tgt_stop, &rc_stats);
  if (docs.empty()) throw DataError("prep: no usable documents in " + rc_path);

  std::ostringstream tc_out;
  tc_out << cfg.header("prep-tc") << "\n";
  for (const auto& p : pairs) {
    for (size_t i = 0; i < p.source_tokens.size(); ++i) {
      if (i) tc_out << ' ';
      tc_out << p.source_tokens[i];
    }
    tc_out << '\t';
    for (size_t i = 0; i < p.target_tokens.size(); ++i) {
      if (i) tc_out << ' ';
      tc_out << p.target_tokens[i];
    }
    tc_out << "\n";
  }
  write_file(cfg.artifact("prep.tc.tsv"), tc_out.str());

  std::ostringstream rc_out;
  {
    json meta;
    meta["_meta"] = {{"header", cfg.header("prep-rc")}};
    rc_out << meta.dump() << "\n";
  }
  for (const auto& d : docs) {
    json j;
    j["id"] = d.doc_id;
    std::string text;
    for (size_t i = 0; i < d.tokens.size(); ++i) {
      if (i) text += ' ';
      text += d.tokens[i];
    }
    j["text"] = text;
    rc_out << j.dump() << "\n";
  }
  write_file(cfg.artifact("prep.rc.jsonl"), rc_out.str());

  auto vocab = corpus::build_vocab(pairs, docs);
  vocab.save_tsv(cfg.artifact("vocab.tsv"), cfg.header("vocab"));
  auto src_vocab = corpus::build_source_vocab(pairs);
  src_vocab.save_tsv(cfg.artifact("vocab.src.tsv"), cfg.header("vocab-src"));

  if (cfg.has("topics")) {
    write_prepped_queries(cfg.artifact("prep.queries.topics.jsonl"),
                          corpus::load_topics(cfg.require_path("topics")), src_stop,
                          cfg.header("prep-topics"));
  }
  if (cfg.has("ref_topics")) {
    write_prepped_queries(cfg.artifact("prep.queries.ref.jsonl"),
                          corpus::load_topics(cfg.require_path("ref_topics")), tgt_stop,
                          cfg.header("prep-ref"));
  }
  if (cfg.has("val_topics")) {
    write_prepped_queries(cfg.artifact("prep.queries.val.jsonl"),
                          corpus::load_topics(cfg.require_path("val_topics")), src_stop,
                          cfg.header("prep-val"));
  }
  stage.record();
  std::ostringstream msg;
  msg << "prep: " << pairs.size() << " pairs (" << tc_stats.dropped << " dropped), "
      << docs.size() << " docs (" << rc_stats.dropped << " dropped), vocab " << vocab.size()
      << " (incl. specials)";
  return {false, msg.str()};
}

StageResult run_index_build(const RunConfig& cfg) {
  std::string rc_prep = cfg.artifact("prep.rc.jsonl");
  if (!fs::exists(rc_prep)) throw DataError("index build: run prep first (missing " + rc_prep + ")");
  Stage stage(cfg, "index");
  stage.mix_file(rc_prep);
  stage.out(cfg.artifact("index.bin"));
  if (stage.can_skip()) return {true, "index build: up to date"};

  auto docs = corpus::load_documents(rc_prep, textprep::StopList::none());
  auto index = retrieval::InvertedIndex::build(docs);
  index.save(cfg.artifact("index.bin"), cfg.header("index"));
  stage.record();
  std::ostringstream msg;
  msg << "index build: " << index.doc_count() << " docs, " << index.total_tokens() << " tokens";
  return {false, msg.str()};
}

StageResult run_ratgen(const RunConfig& cfg) {
  std::string tc_prep = cfg.artifact("prep.tc.tsv");
  std::string rc_prep = cfg.artifact("prep.rc.jsonl");
  std::string index_path = cfg.artifact("index.bin");
  for (const auto& p : {tc_prep, rc_prep, index_path}) {
    if (!fs::exists(p)) throw DataError("ratgen: missing " + p + " (run prep/index first)");
  }
  Stage stage(cfg, "ratgen");
  stage.mix_file(tc_prep);
  stage.mix_file(rc_prep);
  stage.mix_file(index_path);
  stage.out(cfg.artifact("tcprime.jsonl"));
  if (stage.can_skip()) return {true, "ratgen: up to date"};

  auto none = textprep::StopList::none();
  auto pairs = corpus::load_parallel(tc_prep, none, none);
  auto docs = corpus::load_documents(rc_prep, none);
  auto index = retrieval::InvertedIndex::load(index_path);
  ratgen::DocStore store(docs);
  int64_t cap = cfg.get_i64("cap", 256);
  double mu = cfg.get_f64("mu", 1500.0);

  std::vector<ratgen::AugmentedTriple> triples;
  triples.reserve(pairs.size());
  int64_t no_top = 0;
  for (const auto& p : pairs) {
    triples.push_back(ratgen::augment(p, index, store, cap, cfg.seed(), mu));
    if (!triples.back().top_doc) ++no_top;
  }
  ratgen::save_triples(cfg.artifact("tcprime.jsonl"), triples, cfg.header("tcprime"));
  stage.record();
  std::ostringstream msg;
  msg << "ratgen: " << triples.size() << " triples, " << no_top << " without top document";
  return {false, msg.str()};
}

namespace {

struct TrainInputs {
  corpus::Vocabulary vocab;
  corpus::Vocabulary src_vocab;
  ValData val;
};

TrainInputs load_train_inputs(const RunConfig& cfg) {
  TrainInputs in;
  std::string vocab_path = cfg.artifact("vocab.tsv");
  std::string src_vocab_path = cfg.artifact("vocab.src.tsv");
  std::string index_path = cfg.artifact("index.bin");
  std::string val_queries = cfg.artifact("prep.queries.val.jsonl");
  for (const auto& p : {vocab_path, src_vocab_path, index_path, val_queries}) {
    if (!fs::exists(p)) throw DataError("train: missing " + p + " (run prep/index first)");
  }
  in.vocab = corpus::Vocabulary::load_tsv(vocab_path);
  in.src_vocab = corpus::Vocabulary::load_tsv(src_vocab_path);
  in.val.index = retrieval::InvertedIndex::load(index_path);
  in.val.qrels = corpus::QrelSet::load(cfg.require_path("val_qrels"));
  in.val.queries = load_prepped_queries(val_queries);
  return in;
}

}  // namespace

StageResult run_train_baseline(const RunConfig& cfg) {
  std::string tc_prep = cfg.artifact("prep.tc.tsv");
  if (!fs::exists(tc_prep)) throw DataError("train baseline: missing " + tc_prep);
  Stage stage(cfg, "train-baseline");
  stage.mix_file(tc_prep);
  stage.mix_file(cfg.artifact("vocab.tsv"));
  stage.mix_file(cfg.artifact("index.bin"));
  stage.out(cfg.artifact("baseline.ckpt"));
  stage.out(cfg.artifact("baseline.telemetry.csv"));
  if (stage.can_skip()) return {true, "train baseline: up to date"};

  auto in = load_train_inputs(cfg);
  auto none = textprep::StopList::none();
  auto pairs = corpus::load_parallel(tc_prep, none, none);
  auto id_pairs = to_id_pairs(pairs, in.src_vocab, in.vocab);

  auto mc = model_config(cfg, in.src_vocab.size(), in.vocab.size());
  model::TransformerModel<float> m(mc, hash_seed(cfg.seed(), "model"));
  auto tc = train_config(cfg, "max_steps_baseline");

  std::vector<trainer::ValQuery> vq;
  auto val = make_val_bundle(in.val, in.src_vocab, in.vocab, vq);
  trainer::TelemetrySink telemetry;
  auto res = trainer::pretrain_baseline(m, id_pairs, val, tc, telemetry);

  telemetry.save_csv(cfg.artifact("baseline.telemetry.csv"), cfg.header("telemetry-baseline"));
  auto meta = checkpoint_meta(cfg, mc, "baseline", res, in.vocab.content_hash(),
                              in.src_vocab.content_hash());
  model::save_checkpoint(cfg.artifact("baseline.ckpt"), m.all_params(), meta,
                         cfg.header("ckpt-baseline"));
  stage.record();
  std::ostringstream msg;
  msg << "train baseline: " << res.final_step << " steps, best val MAP " << fmt_g(res.best_val_map)
      << " at step " << res.best_step << (res.early_stopped ? " (early stop)" : "");
  return {false, msg.str()};
}

StageResult run_train_multitask(const RunConfig& cfg) {
  std::string tcprime = cfg.artifact("tcprime.jsonl");
  std::string base_ckpt = cfg.artifact("baseline.ckpt");
  for (const auto& p : {tcprime, base_ckpt}) {
    if (!fs::exists(p)) throw DataError("train multitask: missing " + p);
  }
  Stage stage(cfg, "train-multitask");
  stage.mix_file(tcprime);
  stage.mix_file(base_ckpt);
  stage.out(cfg.artifact("multitask.ckpt"));
  stage.out(cfg.artifact("multitask.telemetry.csv"));
  if (stage.can_skip()) return {true, "train multitask: up to date"};

  auto in = load_train_inputs(cfg);
  auto triples = ratgen::load_triples(tcprime);
  if (triples.empty()) throw DataError("train multitask: no triples in " + tcprime);

  auto ckpt = model::load_checkpoint(base_ckpt);
  auto vh = ckpt.meta.find("vocab_hash");
  if (vh != ckpt.meta.end() && vh->second != hex64(in.vocab.content_hash())) {
    throw DataError("train multitask: checkpoint vocabulary hash does not match vocab.tsv");
  }
  auto mc = model_config(cfg, in.src_vocab.size(), in.vocab.size());
  model::TransformerModel<float> m(mc, hash_seed(cfg.seed(), "model"));
  model::apply_checkpoint(ckpt, m);
  int64_t start_step = 0, start_epoch = 0;
  if (auto it = ckpt.meta.find("step"); it != ckpt.meta.end()) {
    start_step = parse_i64(it->second, "checkpoint step");
  }
  if (auto it = ckpt.meta.find("next_epoch"); it != ckpt.meta.end()) {
    start_epoch = parse_i64(it->second, "checkpoint next_epoch");
  }

  std::vector<trainer::RatPair> data;
  data.reserve(triples.size());
  for (const auto& tr : triples) {
    trainer::RatPair rp;
    rp.pair.id = tr.pair.id;
    rp.pair.src = in.src_vocab.ids(tr.pair.source_tokens);
    rp.pair.tgt = in.vocab.ids(tr.pair.target_tokens);
    rp.aug_tokens = tr.aug_tokens;
    data.push_back(std::move(rp));
  }

  auto tc = train_config(cfg, "max_steps_multitask");
  std::vector<trainer::ValQuery> vq;
  auto val = make_val_bundle(in.val, in.src_vocab, in.vocab, vq);
  trainer::TelemetrySink telemetry;
  auto res = trainer::train_multitask(m, data, val, tc, in.vocab, telemetry, start_step,
                                      start_epoch);

  telemetry.save_csv(cfg.artifact("multitask.telemetry.csv"), cfg.header("telemetry-multitask"));
  auto meta = checkpoint_meta(cfg, mc, "multitask", res, in.vocab.content_hash(),
                              in.src_vocab.content_hash());
  model::save_checkpoint(cfg.artifact("multitask.ckpt"), m.all_params(), meta,
                         cfg.header("ckpt-multitask"));
  stage.record();
  std::ostringstream msg;
  msg << "train multitask: steps " << start_step << ".." << res.final_step << ", best val MAP "
      << fmt_g(res.best_val_map) << " at step " << res.best_step
      << (res.early_stopped ? " (early stop)" : "")
      << (res.we_steps_skipped ? ", WE steps skipped: " + std::to_string(res.we_steps_skipped)
                               : "");
  return {false, msg.str()};
}

StageResult run_translate(const RunConfig& cfg) {
  std::string ckpt_path = resolve_model_checkpoint(cfg);
  std::string topics_path = cfg.artifact("prep.queries.topics.jsonl");
  if (!fs::exists(ckpt_path)) throw DataError("translate: missing checkpoint " + ckpt_path);
  if (!fs::exists(topics_path)) throw DataError("translate: missing " + topics_path);
  std::string tag = model_tag(cfg);
  std::string out_path = cfg.artifact("translations." + tag + ".jsonl");

  Stage stage(cfg, "translate-" + tag);
  stage.mix_file(ckpt_path);
  stage.mix_file(topics_path);
  stage.out(out_path);
  if (stage.can_skip()) return {true, "translate: up to date"};

  auto vocab = corpus::Vocabulary::load_tsv(cfg.artifact("vocab.tsv"));
  auto src_vocab = corpus::Vocabulary::load_tsv(cfg.artifact("vocab.src.tsv"));
  auto ckpt = model::load_checkpoint(ckpt_path);
  if (auto it = ckpt.meta.find("vocab_hash");
      it != ckpt.meta.end() && it->second != hex64(vocab.content_hash())) {
    throw DataError("translate: checkpoint vocabulary hash does not match vocab.tsv");
  }
  auto mc = model::config_from_meta(ckpt.meta);
  model::TransformerModel<float> m(mc, 0);
  model::apply_checkpoint(ckpt, m);

  auto queries = load_prepped_queries(topics_path);
  std::map<std::string, std::vector<std::string>> refs;
  std::string ref_path = cfg.artifact("prep.queries.ref.jsonl");
  if (fs::exists(ref_path)) {
    for (auto& q : load_prepped_queries(ref_path)) refs[q.qid] = q.tokens;
  }

  int beam = static_cast<int>(cfg.get_i64("beam", 1));
  std::ostringstream out;
  {
    json meta;
    meta["_meta"] = {{"header", cfg.header("translations-" + tag)}, {"model", tag}};
    out << meta.dump() << "\n";
  }
  auto dedupe = [](const std::vector<std::string>& tokens) {
    std::vector<std::string> terms;
    std::set<std::string> seen;
    for (const auto& t : tokens) {
      if (seen.insert(t).second) terms.push_back(t);
    }
    return terms;
  };
  for (const auto& q : queries) {
    auto src_ids = src_vocab.ids(q.tokens);
    auto out_ids = m.beam_decode(src_ids, mc.max_len - 1, beam);
    std::vector<std::string> tokens;
    for (int32_t id : out_ids) {
      if (id >= corpus::Vocabulary::kNumSpecials) tokens.push_back(vocab.token(id));
    }
    json j;
    j["qid"] = q.qid;
    j["model_tokens"] = tokens;
    j["model_terms"] = dedupe(tokens);
    auto it = refs.find(q.qid);
    if (it != refs.end()) j["human_terms"] = dedupe(it->second);
    out << j.dump() << "\n";
  }
  write_file(out_path, out.str());
  stage.record();
  return {false, "translate: " + std::to_string(queries.size()) + " queries -> " + out_path};
}

StageResult run_retrieve(const RunConfig& cfg) {
  std::string tag = model_tag(cfg);
  std::string trans_path = cfg.artifact("translations." + tag + ".jsonl");
  std::string index_path = cfg.artifact("index.bin");
  for (const auto& p : {trans_path, index_path}) {
    if (!fs::exists(p)) throw DataError("retrieve: missing " + p);
  }
  std::string out_path = cfg.artifact("run." + tag + ".trec");
  Stage stage(cfg, "retrieve-" + tag);
  stage.mix_file(trans_path);
  stage.mix_file(index_path);
  stage.out(out_path);
  if (stage.can_skip()) return {true, "retrieve: up to date"};

  auto index = retrieval::InvertedIndex::load(index_path);
  auto translations = load_translations(trans_path);
  double mu = cfg.get_f64("mu", 1500.0);
  int k = static_cast<int>(cfg.get_i64("k", 1000));
  std::string run_tag = cfg.get_str("run_tag", "ratnmt");

  std::ostringstream out;
  out << cfg.header("run-" + tag) << "\n";
  int64_t skipped = 0;
  for (const auto& t : translations) {
    if (t.model_tokens.empty()) {
      ++skipped;
      continue;
    }
    retrieval::RankedList ranked;
    try {
      ranked = retrieval::search(index, t.model_tokens, k, mu, t.qid);
    } catch (const DataError&) {
      ++skipped;  // no scoreable term
      continue;
    }
    for (const auto& e : ranked.entries) {
      char score[40];
      std::snprintf(score, sizeof(score), "%.8g", e.score);
      out << t.qid << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << score << ' ' << run_tag
          << "\n";
    }
  }
  write_file(out_path, out.str());
  stage.record();
  std::ostringstream msg;
  msg << "retrieve: " << translations.size() - skipped << " queries (" << skipped
      << " without scoreable translation) -> " << out_path;
  return {false, msg.str()};
}

namespace {

std::map<std::string, retrieval::RankedList> parse_run_file(const std::string& path) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  std::map<std::string, retrieval::RankedList> runs;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view raw = trim(lines[ln]);
    if (raw.empty() || corpus::is_artifact_header_line(raw)) continue;
    std::istringstream iss{std::string(raw)};
    std::string qid, q0, docid, tag;
    int rank;
    double score;
    if (!(iss >> qid >> q0 >> docid >> rank >> score >> tag)) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": malformed run line");
    }
    auto& rl = runs[qid];
    rl.query_id = qid;
    if (!rl.entries.empty() && rl.entries.back().rank + 1 != rank) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": ranks must be consecutive");
    }
    rl.entries.push_back({docid, score, rank});
  }
  return runs;
}

}  // namespace

StageResult run_eval(const RunConfig& cfg) {
  std::string tag = model_tag(cfg);
  std::string run_path = cfg.has("run") ? cfg.require_path("run")
                                        : cfg.artifact("run." + tag + ".trec");
  if (!fs::exists(run_path)) throw DataError("eval: missing run file " + run_path);
  std::string qrels_path = cfg.require_path("qrels");
  std::string trans_path = cfg.has("translations") ? cfg.get_str("translations")
                                                   : cfg.artifact("translations." + tag + ".jsonl");
  bool have_translations = fs::exists(trans_path);
  std::string vocab_path = cfg.artifact("vocab.tsv");
  bool have_vocab = fs::exists(vocab_path);

  std::string summary_path = cfg.artifact("eval." + tag + ".csv");
  std::string per_query_path = cfg.artifact("eval." + tag + ".per_query.csv");
  Stage stage(cfg, "eval-" + tag);
  stage.mix_file(run_path);
  stage.mix_file(qrels_path);
  if (have_translations) stage.mix_file(trans_path);
  stage.out(summary_path);
  stage.out(per_query_path);
  if (stage.can_skip()) return {true, "eval: up to date"};

  auto runs = parse_run_file(run_path);
  auto qrels = corpus::QrelSet::load(qrels_path);

  std::vector<TranslationEntry> translations;
  if (have_translations) {
    translations = load_translations(trans_path);
  } else {
    for (const auto& [qid, rl] : runs) {
      TranslationEntry e;
      e.qid = qid;
      translations.push_back(std::move(e));
    }
  }

  std::optional<metrics::TermStats> stats;
  if (have_vocab && have_translations) {
    stats = metrics::TermStats::from_vocab(corpus::Vocabulary::load_tsv(vocab_path));
  }

  std::vector<double> aps, balances, precisions, recalls;
  std::ostringstream per_query;
  per_query << cfg.header("eval-per-query") << "\n";
  per_query << "qid,ap,balance,precision,recall\n";
  for (const auto& t : translations) {
    std::string ap_cell, b_cell, p_cell, r_cell;
    if (qrels.relevant_count(t.qid) > 0) {
      retrieval::RankedList empty;
      empty.query_id = t.qid;
      auto it = runs.find(t.qid);
      double ap = metrics::average_precision(it == runs.end() ? empty : it->second, qrels);
      aps.push_back(ap);
      ap_cell = fmt_g(ap);
    }
    if (stats && !t.model_terms.empty()) {
      double b = metrics::balance(t.model_terms, *stats);
      balances.push_back(b);
      b_cell = fmt_g(b);
    }
    if (!t.model_terms.empty() && !t.human_terms.empty()) {
      metrics::TranslationRecord rec{t.qid, t.model_terms, t.human_terms};
      auto [p, r] = metrics::translation_pr(rec);
      precisions.push_back(p);
      recalls.push_back(r);
      p_cell = fmt_g(p);
      r_cell = fmt_g(r);
    }
    per_query << t.qid << ',' << ap_cell << ',' << b_cell << ',' << p_cell << ',' << r_cell
              << "\n";
  }
  if (aps.empty()) {
    throw DataError("eval: no evaluated query has a relevant document in the qrels");
  }

  std::ostringstream summary;
  summary << cfg.header("eval-summary") << "\n";
  summary << "map,mean_balance,mean_p,mean_r\n";
  summary << fmt_g(metrics::aggregate(aps)) << ',';
  if (!balances.empty()) summary << fmt_g(metrics::aggregate(balances));
  summary << ',';
  if (!precisions.empty()) summary << fmt_g(metrics::aggregate(precisions));
  summary << ',';
  if (!recalls.empty()) summary << fmt_g(metrics::aggregate(recalls));
  summary << "\n";
  write_file(per_query_path, per_query.str());
  write_file(summary_path, summary.str());
  stage.record();
  std::ostringstream msg;
  msg << "eval: map=" << fmt_g(metrics::aggregate(aps));
  if (!balances.empty()) msg << " mean_balance=" << fmt_g(metrics::aggregate(balances));
  if (!precisions.empty()) {
    msg << " mean_p=" << fmt_g(metrics::aggregate(precisions))
        << " mean_r=" << fmt_g(metrics::aggregate(recalls));
  }
  msg << " -> " << summary_path;
  return {false, msg.str()};
}

StageResult run_synth(const RunConfig& cfg) {
  std::string out_dir = cfg.get_str("synth_dir");
  if (out_dir.empty()) out_dir = cfg.workdir();
  synth::SynthParams params;
  params.n_tc_pairs = static_cast<int>(cfg.get_i64("synth_tc_pairs", params.n_tc_pairs));
  params.n_background_docs =
      static_cast<int>(cfg.get_i64("synth_background_docs", params.n_background_docs));
  auto files = synth::generate(out_dir, params, cfg.seed(), cfg.header("synth"));
  return {false, "synth: corpus written to " + out_dir + ", config " + files.conf};
}

EvalSummary read_eval_summary(const std::string& csv_path) {
  std::string content = read_file(csv_path);
  auto lines = split(content, '\n');
  EvalSummary s;
  bool have = false;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (line.empty() || corpus::is_artifact_header_line(line)) continue;
    if (line.rfind("map,", 0) == 0) continue;  // column header
    auto cols = split(line, ',');
    if (cols.size() != 4) throw DataError(csv_path + ": malformed summary row");
    s.map = parse_f64(cols[0], "map");
    if (!std::string(trim(cols[1])).empty()) {
      s.mean_balance = parse_f64(cols[1], "mean_balance");
      s.has_balance = true;
    }
    if (!std::string(trim(cols[2])).empty()) {
      s.mean_p = parse_f64(cols[2], "mean_p");
      s.has_pr = true;
    }
    if (!std::string(trim(cols[3])).empty()) s.mean_r = parse_f64(cols[3], "mean_r");
    have = true;
  }
  if (!have) throw DataError(csv_path + ": no summary row");
  return s;
}

}  // namespace ratnmt::pipeline
