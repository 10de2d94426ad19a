#include "synth.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace ratnmt::synth {

using nlohmann::json;

namespace {

std::string code_word(const char* prefix, int i) {
  static const char* kSyll[] = {"ba", "de", "ki", "lo", "mu", "na", "pe", "ri",
                                "so", "tu", "va", "zo", "ga", "he", "ji", "fu"};
  std::string s = prefix;
  s += kSyll[i % 16];
  s += kSyll[(i / 16) % 16];
  return s;
}

std::string pad_num(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct Query {
  std::string qid;
  std::vector<int> concepts;
  std::vector<std::string> src_tokens;
  std::vector<std::string> ref_terms;
};

}  // namespace

SynthFiles generate(const std::string& out_dir, const SynthParams& p, uint64_t seed,
                    const std::string& header) {
  if (p.n_overlap + p.n_mismatch > p.n_concepts) {
    throw UsageError("synth: overlap + mismatch concepts exceed concept count");
  }
  std::filesystem::create_directories(out_dir);
  Rng rng(hash_seed(seed, "synth"));

  // Concept tokens. Concepts [0, n_overlap): A == B. Concepts in the last
  // n_mismatch slots never occur in TC.
  int n = p.n_concepts;
  int first_mismatch = n - p.n_mismatch;
  std::vector<std::string> src(n), term_a(n), term_b(n);
  for (int c = 0; c < n; ++c) {
    src[c] = code_word("su", c);
    term_a[c] = code_word("ta", c);
    term_b[c] = c < p.n_overlap ? term_a[c] : code_word("ro", c);
  }
  std::vector<std::string> shared_filler(p.n_shared_fillers), tc_filler(p.n_tc_fillers),
      rc_noise(p.n_rc_noise), filler_src(p.n_shared_fillers + p.n_tc_fillers);
  for (int i = 0; i < p.n_shared_fillers; ++i) shared_filler[i] = code_word("fi", i);
  for (int i = 0; i < p.n_tc_fillers; ++i) tc_filler[i] = code_word("ju", i);
  for (int i = 0; i < p.n_rc_noise; ++i) rc_noise[i] = code_word("no", i);
  for (size_t i = 0; i < filler_src.size(); ++i) {
    filler_src[i] = code_word("pa", static_cast<int>(i));
  }

  // --- translation corpus ---
  std::ostringstream tc;
  if (!header.empty()) tc << header << "\n";
  for (int i = 0; i < p.n_tc_pairs; ++i) {
    int len = 1 + static_cast<int>(rng.next_below(4));
    std::vector<int> concepts;
    while (static_cast<int>(concepts.size()) < len) {
      int c = static_cast<int>(rng.next_below(static_cast<uint64_t>(first_mismatch)));
      if (std::find(concepts.begin(), concepts.end(), c) == concepts.end()) concepts.push_back(c);
    }
    std::vector<std::string> s_tokens, t_tokens;
    for (int c : concepts) {
      s_tokens.push_back(src[c]);
      t_tokens.push_back(term_a[c]);
    }
    if (rng.next_unit() < p.filler_prob) {
      // Half the fillers exist only in TC, half also in RC.
      bool junk = rng.next_unit() < 0.5;
      int fi = static_cast<int>(
          rng.next_below(static_cast<uint64_t>(junk ? p.n_tc_fillers : p.n_shared_fillers)));
      s_tokens.push_back(filler_src[static_cast<size_t>(junk ? p.n_shared_fillers + fi : fi)]);
      t_tokens.push_back(junk ? tc_filler[fi] : shared_filler[fi]);
    }
    tc << join_tokens(s_tokens) << '\t' << join_tokens(t_tokens) << "\n";
  }

  // --- queries ---
  auto make_queries = [&](const char* tag, int count) {
    std::vector<Query> out;
    for (int i = 0; i < count; ++i) {
      Query q;
      q.qid = std::string(tag) + pad_num(i + 1, 2);
      // Covered pair of concepts, with a mismatch concept swapped in for a
      // fixed share of the queries.
      bool with_mismatch = (i % 3) == 2 && p.n_mismatch > 0;
      while (static_cast<int>(q.concepts.size()) < 2) {
        int c;
        if (with_mismatch && q.concepts.empty()) {
          c = first_mismatch + static_cast<int>(rng.next_below(static_cast<uint64_t>(p.n_mismatch)));
        } else {
          c = static_cast<int>(rng.next_below(static_cast<uint64_t>(first_mismatch)));
        }
        if (std::find(q.concepts.begin(), q.concepts.end(), c) == q.concepts.end()) {
          q.concepts.push_back(c);
        }
      }
      for (int c : q.concepts) {
        q.src_tokens.push_back(src[c]);
        q.ref_terms.push_back(term_b[c]);
        if (c >= p.n_overlap && c < first_mismatch && rng.next_unit() < 0.5) {
          q.ref_terms.push_back(term_a[c]);
        }
      }
      out.push_back(std::move(q));
    }
    return out;
  };
  auto val_queries = make_queries("val", p.n_val_queries);
  auto test_queries = make_queries("test", p.n_test_queries);

  // --- retrieval corpus: planted relevant docs per query, then background ---
  std::ostringstream rc, qrels_val, qrels_test;
  json rc_meta;
  rc_meta["_meta"] = {{"tool", "ratnmt"}, {"kind", "synth-rc"}, {"seed", seed}};
  rc << rc_meta.dump() << "\n";
  if (!header.empty()) {
    qrels_val << header << "\n";
    qrels_test << header << "\n";
  }
  int doc_no = 0;
  auto emit_doc = [&](const std::vector<int>& concepts) {
    ++doc_no;
    std::string id = "d" + pad_num(doc_no, 4);
    std::vector<std::string> tokens;
    for (int c : concepts) {
      int reps = 2 + static_cast<int>(rng.next_below(3));
      for (int r = 0; r < reps; ++r) tokens.push_back(term_b[c]);
    }
    int n_sh = 2 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < n_sh; ++i) {
      tokens.push_back(shared_filler[rng.next_below(static_cast<uint64_t>(p.n_shared_fillers))]);
    }
    int n_no = 2 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < n_no; ++i) {
      tokens.push_back(rc_noise[rng.next_below(static_cast<uint64_t>(p.n_rc_noise))]);
    }
    rng.shuffle(tokens);
    json j;
    j["id"] = id;
    j["text"] = join_tokens(tokens);
    rc << j.dump() << "\n";
    return id;
  };
  for (const auto& q : val_queries) {
    for (int k = 0; k < p.n_planted_per_query; ++k) {
      qrels_val << q.qid << " 0 " << emit_doc(q.concepts) << " 1\n";
    }
  }
  for (const auto& q : test_queries) {
    for (int k = 0; k < p.n_planted_per_query; ++k) {
      qrels_test << q.qid << " 0 " << emit_doc(q.concepts) << " 1\n";
    }
  }
  for (int i = 0; i < p.n_background_docs; ++i) {
    std::vector<int> concepts;
    int len = 2 + static_cast<int>(rng.next_below(3));
    while (static_cast<int>(concepts.size()) < len) {
      int c = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
      if (std::find(concepts.begin(), concepts.end(), c) == concepts.end()) concepts.push_back(c);
    }
    emit_doc(concepts);
  }

  // --- topic and reference files ---
  auto topics_json = [&](const std::vector<Query>& queries, bool ref) {
    std::ostringstream oss;
    json meta;
    meta["_meta"] = {{"tool", "ratnmt"}, {"kind", ref ? "synth-ref" : "synth-topics"},
                     {"seed", seed}};
    oss << meta.dump() << "\n";
    for (const auto& q : queries) {
      json j;
      j["qid"] = q.qid;
      if (ref) {
        j["title"] = join_tokens(q.ref_terms);
        j["description"] = "";
      } else {
        j["title"] = join_tokens(q.src_tokens);
        j["description"] = "";
      }
      oss << j.dump() << "\n";
    }
    return oss.str();
  };

  SynthFiles files;
  auto path = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };
  files.tc = path("synth.tc.tsv");
  files.rc = path("synth.rc.jsonl");
  files.topics_val = path("synth.topics.val.jsonl");
  files.topics_test = path("synth.topics.test.jsonl");
  files.ref_val = path("synth.ref.val.jsonl");
  files.ref_test = path("synth.ref.test.jsonl");
  files.qrels_val = path("synth.qrels.val.txt");
  files.qrels_test = path("synth.qrels.test.txt");
  files.stoplist = path("synth.stoplist.txt");
  files.conf = path("synth.conf");

  write_file(files.tc, tc.str());
  write_file(files.rc, rc.str());
  write_file(files.topics_val, topics_json(val_queries, false));
  write_file(files.topics_test, topics_json(test_queries, false));
  write_file(files.ref_val, topics_json(val_queries, true));
  write_file(files.ref_test, topics_json(test_queries, true));
  write_file(files.qrels_val, qrels_val.str());
  write_file(files.qrels_test, qrels_test.str());
  write_file(files.stoplist, "# synthetic language: no stop words\n");

  // Desk-scale pipeline configuration tuned for this corpus.
  std::ostringstream conf;
  conf << "# ratnmt synthetic experiment config\n";
  conf << "tc=" << files.tc << "\n";
  conf << "rc=" << files.rc << "\n";
  conf << "topics=" << files.topics_test << "\n";
  conf << "ref_topics=" << files.ref_test << "\n";
  conf << "qrels=" << files.qrels_test << "\n";
  conf << "val_topics=" << files.topics_val << "\n";
  conf << "val_qrels=" << files.qrels_val << "\n";
  conf << "stoplist_src=" << files.stoplist << "\n";
  conf << "stoplist_tgt=" << files.stoplist << "\n";
  conf << "seed=" << seed << "\n";
  conf << "d_model=32\n";
  conf << "n_heads=2\n";
  conf << "n_layers=1\n";
  conf << "d_ff=64\n";
  conf << "max_len=16\n";
  conf << "dropout=0.1\n";
  conf << "batch_tokens=96\n";
  conf << "validate_every=250\n";
  conf << "patience=1000\n";
  conf << "max_steps_baseline=2000\n";
  conf << "max_steps_multitask=2000\n";
  conf << "lr_nmt=0.002\n";
  conf << "lr_we=1e-5\n";
  conf << "alpha=0.1\n";
  conf << "mu=1500\n";
  conf << "cap=48\n";
  conf << "window=5\n";
  conf << "k=1000\n";
  write_file(files.conf, conf.str());
  return files;
}

}  // namespace ratnmt::synth
