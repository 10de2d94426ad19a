#include "ratgen.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "common.hpp"

namespace ratnmt::ratgen {

using nlohmann::json;

DocStore::DocStore(std::span<const corpus::Document> docs) {
  for (const auto& d : docs) by_id_.emplace(d.doc_id, &d);
}

const std::vector<std::string>* DocStore::tokens(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  return it == by_id_.end() ? nullptr : &it->second->tokens;
}

AugmentedTriple augment(const corpus::ParallelPair& pair, const retrieval::InvertedIndex& index,
                        const DocStore& docs, int64_t cap, uint64_t seed, double mu) {
  const auto& t = pair.target_tokens;
  if (cap < static_cast<int64_t>(t.size())) {
    throw DataError("augment: cap " + std::to_string(cap) + " smaller than target length " +
                    std::to_string(t.size()) + " of pair " + std::to_string(pair.id));
  }
  AugmentedTriple out;
  out.pair = pair;
  out.top_doc = retrieval::top_document(index, t, mu);
  if (!out.top_doc) {
    out.aug_tokens = t;
    return out;
  }
  const auto* doc_tokens = docs.tokens(*out.top_doc);
  if (!doc_tokens) {
    throw InternalError("augment: retrieved doc '" + *out.top_doc + "' missing from doc store");
  }

  Rng rng(hash_seed(seed, "ratgen-aug", static_cast<uint64_t>(pair.id)));
  out.aug_tokens = t;
  int64_t room = cap - static_cast<int64_t>(t.size());
  if (static_cast<int64_t>(doc_tokens->size()) <= room) {
    out.aug_tokens.insert(out.aug_tokens.end(), doc_tokens->begin(), doc_tokens->end());
  } else {
    // Uniform sample of document tokens, without replacement.
    std::vector<size_t> pick(doc_tokens->size());
    for (size_t i = 0; i < pick.size(); ++i) pick[i] = i;
    for (int64_t i = 0; i < room; ++i) {
      size_t j = static_cast<size_t>(i) +
                 static_cast<size_t>(rng.next_below(pick.size() - static_cast<size_t>(i)));
      std::swap(pick[static_cast<size_t>(i)], pick[j]);
      out.aug_tokens.push_back((*doc_tokens)[pick[static_cast<size_t>(i)]]);
    }
  }
  rng.shuffle(out.aug_tokens);
  return out;
}

std::vector<ContextPivotPair> context_pivot_pairs_tokens(std::span<const std::string> tokens,
                                                         int window,
                                                         const corpus::Vocabulary& vocab) {
  if (window < 1) throw UsageError("context window must be >= 1");
  std::vector<ContextPivotPair> out;
  int64_t n = static_cast<int64_t>(tokens.size());
  if (n < 2) return out;
  std::vector<int32_t> ids = vocab.ids(tokens);
  out.reserve(static_cast<size_t>(n));
  for (int64_t p = 0; p < n; ++p) {
    ContextPivotPair cp;
    cp.pivot = ids[static_cast<size_t>(p)];
    int64_t lo = std::max<int64_t>(0, p - window);
    int64_t hi = std::min<int64_t>(n - 1, p + window);
    for (int64_t q = lo; q <= hi; ++q) {
      if (q != p) cp.context.push_back(ids[static_cast<size_t>(q)]);
    }
    out.push_back(std::move(cp));
  }
  return out;
}

std::vector<ContextPivotPair> context_pivot_pairs(const AugmentedTriple& aug, int window,
                                                  const corpus::Vocabulary& vocab) {
  return context_pivot_pairs_tokens(aug.aug_tokens, window, vocab);
}

RatDataset build_rat_dataset(std::span<const corpus::ParallelPair> tc,
                             const retrieval::InvertedIndex& index, const DocStore& docs,
                             int64_t cap, int window, uint64_t seed,
                             const corpus::Vocabulary& vocab, double mu) {
  RatDataset ds;
  ds.triples.reserve(tc.size());
  for (const auto& pair : tc) {
    ds.triples.push_back(augment(pair, index, docs, cap, seed, mu));
    if (!ds.triples.back().top_doc) ++ds.pairs_without_top_doc;
  }
  std::sort(ds.triples.begin(), ds.triples.end(),
            [](const AugmentedTriple& a, const AugmentedTriple& b) { return a.pair.id < b.pair.id; });
  ds.groups.reserve(ds.triples.size());
  for (const auto& tr : ds.triples) {
    ds.groups.push_back({tr.pair.id, context_pivot_pairs(tr, window, vocab)});
  }
  return ds;
}

void save_triples(const std::string& path, std::span<const AugmentedTriple> triples,
                  const std::string& header_meta) {
  std::ostringstream oss;
  if (!header_meta.empty()) {
    json meta;
    meta["_meta"] = {{"header", header_meta}};
    oss << meta.dump() << "\n";
  }
  for (const auto& tr : triples) {
    json j;
    j["id"] = tr.pair.id;
    j["src"] = tr.pair.source_tokens;
    j["tgt"] = tr.pair.target_tokens;
    j["aug"] = tr.aug_tokens;
    if (tr.top_doc) {
      j["top_doc"] = *tr.top_doc;
    } else {
      j["top_doc"] = nullptr;
    }
    oss << j.dump() << "\n";
  }
  write_file(path, oss.str());
}

std::vector<AugmentedTriple> load_triples(const std::string& path) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  std::vector<AugmentedTriple> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": unparseable JSON record");
    }
    if (j.contains("_meta")) continue;
    AugmentedTriple tr;
    try {
      tr.pair.id = j.at("id").get<int64_t>();
      tr.pair.source_tokens = j.at("src").get<std::vector<std::string>>();
      tr.pair.target_tokens = j.at("tgt").get<std::vector<std::string>>();
      tr.aug_tokens = j.at("aug").get<std::vector<std::string>>();
      if (j.contains("top_doc") && !j.at("top_doc").is_null()) {
        tr.top_doc = j.at("top_doc").get<std::string>();
      }
    } catch (const json::exception& e) {
      throw DataError(path + " line " + std::to_string(ln + 1) + ": " + e.what());
    }
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace ratnmt::ratgen
