// Command-line driver for the ratnmt pipeline. Talks to the core exclusively
// through the public C API.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ratnmt.h"

namespace {

struct Invocation {
  std::string config_file;
  std::vector<std::string> sets;  // raw key=value overrides
  std::map<std::string, std::string> flags;
  rnt_status (*stage)(const rnt_config*, const char**) = nullptr;
  std::string name;
};

void add_common_flags(CLI::App* cmd, Invocation& inv) {
  cmd->add_option("--config", inv.config_file, "key=value config file");
  cmd->add_option("--set", inv.sets, "extra key=value override (repeatable)");
  auto opt = [cmd, &inv](const char* flag, const char* key, const char* help) {
    cmd->add_option_function<std::string>(
        flag, [&inv, key](const std::string& v) { inv.flags[key] = v; }, help);
  };
  opt("--workdir", "workdir", "working directory for artifacts");
  opt("--seed", "seed", "run seed");
  opt("--tc", "tc", "parallel corpus TSV (source TAB target)");
  opt("--rc", "rc", "retrieval corpus (JSONL or TREC SGML)");
  opt("--topics", "topics", "topics JSONL {qid,title,description}");
  opt("--ref-topics", "ref_topics", "reference (human translation) topics JSONL");
  opt("--qrels", "qrels", "TREC qrels for the topics");
  opt("--val-topics", "val_topics", "validation topics JSONL");
  opt("--val-qrels", "val_qrels", "TREC qrels for validation topics");
  opt("--stoplist-src", "stoplist_src", "source-language stoplist file");
  opt("--stoplist-tgt", "stoplist_tgt", "target-language stoplist file");
  opt("--mu", "mu", "Dirichlet smoothing parameter");
  opt("--k", "k", "retrieval depth");
  opt("--cap", "cap", "augmented-sequence token cap");
  opt("--window", "window", "CBOW context window");
  opt("--model", "model", "model for translate/retrieve/eval: baseline|multitask|<path>");
  opt("--beam", "beam", "beam width for decoding (1 = greedy)");
  opt("--max-steps", "max_steps", "step cap for the invoked training phase");
  opt("--batch-tokens", "batch_tokens", "dynamic batch target-token budget");
  opt("--synth-dir", "synth_dir", "output directory for synth");
  cmd->add_flag_callback("--force", [&inv] { inv.flags["force"] = "1"; },
                         "re-run the stage even when inputs are unchanged");
}

int run(const Invocation& inv) {
  rnt_config* cfg = rnt_config_new();
  if (!cfg) {
    std::fprintf(stderr, "ratnmt %s: out of memory\n", inv.name.c_str());
    return RNT_ERR_INTERNAL;
  }
  rnt_status st = RNT_OK;
  if (!inv.config_file.empty()) st = rnt_config_load(cfg, inv.config_file.c_str());
  if (st == RNT_OK) {
    for (const auto& [k, v] : inv.flags) {
      st = rnt_config_set(cfg, k.c_str(), v.c_str());
      if (st != RNT_OK) break;
    }
  }
  if (st == RNT_OK) {
    for (const auto& kv : inv.sets) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "ratnmt %s: --set expects key=value, got '%s'\n", inv.name.c_str(),
                     kv.c_str());
        rnt_config_free(cfg);
        return RNT_ERR_USAGE;
      }
      st = rnt_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
      if (st != RNT_OK) break;
    }
  }
  // --max-steps applies to whichever training phase runs.
  if (st == RNT_OK && inv.flags.count("max_steps")) {
    const std::string& v = inv.flags.at("max_steps");
    rnt_config_set(cfg, "max_steps_baseline", v.c_str());
    rnt_config_set(cfg, "max_steps_multitask", v.c_str());
  }
  const char* message = nullptr;
  if (st == RNT_OK) st = inv.stage(cfg, &message);
  if (st == RNT_OK) {
    if (message && *message) std::printf("%s\n", message);
  } else {
    std::fprintf(stderr, "ratnmt %s: %s\n", inv.name.c_str(), rnt_last_error());
  }
  rnt_config_free(cfg);
  return st;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("ratnmt ") + rnt_version() +
               " — balanced query translation with retrieval-aware multi-task training"};
  app.require_subcommand(1);

  std::vector<Invocation> invocations;
  invocations.reserve(16);
  auto make = [&](CLI::App* parent, const char* name, const char* help,
                  rnt_status (*stage)(const rnt_config*, const char**),
                  const char* full_name = nullptr) -> Invocation& {
    CLI::App* cmd = parent->add_subcommand(name, help);
    invocations.push_back({});
    Invocation& inv = invocations.back();
    inv.stage = stage;
    inv.name = full_name ? full_name : name;
    add_common_flags(cmd, inv);
    cmd->callback([&inv] { std::exit(run(inv)); });
    return inv;
  };

  make(&app, "prep", "normalize raw corpora into canonical token files", &rnt_run_prep);
  CLI::App* index = app.add_subcommand("index", "inverted index commands");
  index->require_subcommand(1);
  make(index, "build", "build and persist the inverted index over RC", &rnt_run_index_build,
       "index build");
  make(&app, "ratgen", "augment TC with top retrieved documents (TC')", &rnt_run_ratgen);
  CLI::App* train = app.add_subcommand("train", "training phases");
  train->require_subcommand(1);
  make(train, "baseline", "NMT-only warm-up training", &rnt_run_train_baseline, "train baseline");
  make(train, "multitask", "interleaved WE/NMT multi-task training", &rnt_run_train_multitask,
       "train multitask");
  make(&app, "translate", "translate topics with a trained checkpoint", &rnt_run_translate);
  make(&app, "retrieve", "run translated queries against the index", &rnt_run_retrieve);
  make(&app, "eval", "score a run file: MAP, balance, translation P/R", &rnt_run_eval);
  make(&app, "synth", "generate the synthetic benchmark corpus", &rnt_run_synth);

  CLI11_PARSE(app, argc, argv);
  return 0;
}
