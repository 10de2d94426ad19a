#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ratnmt::pipeline {

// Flat key=value run configuration; file values are overridden by set().
class RunConfig {
 public:
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& def = "") const;
  int64_t get_i64(const std::string& key, int64_t def) const;
  double get_f64(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  uint64_t seed() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  uint64_t config_hash() const;
  // "# ratnmt <version> kind=<kind> seed=<seed> config=<hash>"
  std::string header(const std::string& kind) const;

  std::string workdir() const;
  std::string artifact(const std::string& name) const;  // workdir-relative path
  std::string require_path(const std::string& key) const;

 private:
  std::map<std::string, std::string> entries_;
};

struct StageResult {
  bool skipped = false;
  std::string message;
};

StageResult run_prep(const RunConfig& cfg);
StageResult run_index_build(const RunConfig& cfg);
StageResult run_ratgen(const RunConfig& cfg);
StageResult run_train_baseline(const RunConfig& cfg);
StageResult run_train_multitask(const RunConfig& cfg);
StageResult run_translate(const RunConfig& cfg);
StageResult run_retrieve(const RunConfig& cfg);
StageResult run_eval(const RunConfig& cfg);
StageResult run_synth(const RunConfig& cfg);

struct PreppedQuery {
  std::string qid;
  std::vector<std::string> tokens;
};
std::vector<PreppedQuery> load_prepped_queries(const std::string& path);

struct TranslationEntry {
  std::string qid;
  std::vector<std::string> model_tokens;  // decoded sequence
  std::vector<std::string> model_terms;   // deduplicated
  std::vector<std::string> human_terms;   // deduplicated; may be empty
};
std::vector<TranslationEntry> load_translations(const std::string& path);

struct EvalSummary {
  double map = 0.0;
  double mean_balance = 0.0;
  double mean_p = 0.0;
  double mean_r = 0.0;
  bool has_balance = false;
  bool has_pr = false;
};
EvalSummary read_eval_summary(const std::string& csv_path);

}  // namespace ratnmt::pipeline
