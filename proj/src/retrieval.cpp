#include "retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "common.hpp"

namespace ratnmt::retrieval {

InvertedIndex InvertedIndex::build(std::span<const corpus::Document> docs) {
  if (docs.empty()) throw DataError("cannot build index from an empty document set");
  InvertedIndex idx;

  std::vector<int32_t> order(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) order[i] = static_cast<int32_t>(i);
  std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    return natural_less(docs[static_cast<size_t>(a)].doc_id, docs[static_cast<size_t>(b)].doc_id);
  });

  idx.doc_ids_.reserve(docs.size());
  idx.doc_len_.reserve(docs.size());
  for (int32_t src : order) {
    const auto& d = docs[static_cast<size_t>(src)];
    if (d.doc_id.empty() || d.doc_id.find_first_of("\t\n") != std::string::npos) {
      throw DataError("invalid doc_id '" + d.doc_id + "'");
    }
    if (!idx.doc_index_.emplace(d.doc_id, static_cast<int32_t>(idx.doc_ids_.size())).second) {
      throw DataError("duplicate doc_id '" + d.doc_id + "'");
    }
    idx.doc_ids_.push_back(d.doc_id);
    idx.doc_len_.push_back(static_cast<int64_t>(d.tokens.size()));
    idx.total_tokens_ += static_cast<int64_t>(d.tokens.size());
  }

  // Term table in lexicographic order for reproducible files.
  std::map<std::string, int32_t> term_order;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) term_order.emplace(t, 0);
  }
  idx.terms_.reserve(term_order.size());
  for (auto& [t, id] : term_order) {
    id = static_cast<int32_t>(idx.terms_.size());
    idx.term_index_.emplace(t, id);
    idx.terms_.push_back(t);
  }
  idx.coll_freq_.assign(idx.terms_.size(), 0);
  idx.postings_.assign(idx.terms_.size(), {});

  // Walk docs in ordinal order so postings come out sorted by doc_id.
  for (int32_t ord = 0; ord < static_cast<int32_t>(order.size()); ++ord) {
    const auto& d = docs[static_cast<size_t>(order[static_cast<size_t>(ord)])];
    std::map<std::string, int32_t> tf;
    for (const auto& t : d.tokens) tf[t] += 1;
    for (const auto& [t, f] : tf) {
      int32_t tid = idx.term_index_.at(t);
      idx.postings_[static_cast<size_t>(tid)].push_back({ord, f});
      idx.coll_freq_[static_cast<size_t>(tid)] += f;
    }
  }
  return idx;
}

std::optional<int32_t> InvertedIndex::doc_ordinal(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) return std::nullopt;
  return it->second;
}

int64_t InvertedIndex::coll_freq(std::string_view token) const {
  auto it = term_index_.find(std::string(token));
  return it == term_index_.end() ? 0 : coll_freq_[static_cast<size_t>(it->second)];
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view token) const {
  auto it = term_index_.find(std::string(token));
  return it == term_index_.end() ? nullptr : &postings_[static_cast<size_t>(it->second)];
}

int32_t InvertedIndex::tf(std::string_view token, int32_t ordinal) const {
  const auto* pl = postings(token);
  if (!pl) return 0;
  auto it = std::lower_bound(pl->begin(), pl->end(), ordinal,
                             [](const Posting& p, int32_t o) { return p.doc < o; });
  if (it != pl->end() && it->doc == ordinal) return it->tf;
  return 0;
}

namespace {

struct QueryTerm {
  std::string token;
  double count;    // c(w, q)
  int64_t cf;      // collection frequency
};

// Unique query terms with multiplicities, first-occurrence order, zero-cf
// terms dropped. Empty result means the query is unscoreable.
std::vector<QueryTerm> analyze_query(std::span<const std::string> query,
                                     const InvertedIndex& index) {
  std::vector<QueryTerm> out;
  for (const auto& w : query) {
    bool seen = false;
    for (auto& qt : out) {
      if (qt.token == w) {
        qt.count += 1.0;
        seen = true;
        break;
      }
    }
    if (seen) continue;
    int64_t cf = index.coll_freq(w);
    if (cf > 0) out.push_back({w, 1.0, cf});
  }
  return out;
}

double score_doc(const std::vector<QueryTerm>& terms, const InvertedIndex& index,
                 int32_t ordinal, double mu) {
  double len = static_cast<double>(index.doc_len(ordinal));
  double total = static_cast<double>(index.total_tokens());
  double score = 0.0;
  for (const auto& qt : terms) {
    double tf = static_cast<double>(index.tf(qt.token, ordinal));
    double smoothed = (tf + mu * (static_cast<double>(qt.cf) / total)) / (len + mu);
    score += qt.count * std::log(smoothed);
  }
  return score;
}

void check_mu(double mu) {
  if (!(mu > 0.0)) throw UsageError("dirichlet mu must be positive");
}

}  // namespace

double ql_dirichlet_score(std::span<const std::string> query, std::string_view doc_id,
                          const InvertedIndex& index, double mu) {
  check_mu(mu);
  auto terms = analyze_query(query, index);
  if (terms.empty()) {
    throw DataError("query has no term with nonzero collection frequency; score undefined");
  }
  auto ord = index.doc_ordinal(doc_id);
  if (!ord) throw DataError("unknown doc_id '" + std::string(doc_id) + "'");
  return score_doc(terms, index, *ord, mu);
}

RankedList search(const InvertedIndex& index, std::span<const std::string> query, int k,
                  double mu, std::string query_id) {
  check_mu(mu);
  if (k < 1) throw UsageError("search k must be >= 1");
  auto terms = analyze_query(query, index);
  if (terms.empty()) {
    throw DataError("query has no term with nonzero collection frequency; score undefined");
  }
  // Candidates: union of postings of the query terms, ascending ordinal.
  std::vector<int32_t> candidates;
  for (const auto& qt : terms) {
    const auto* pl = index.postings(qt.token);
    for (const auto& p : *pl) candidates.push_back(p.doc);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<std::pair<double, int32_t>> scored;
  scored.reserve(candidates.size());
  for (int32_t ord : candidates) scored.emplace_back(score_doc(terms, index, ord, mu), ord);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // ordinal order == natural doc_id order
  });
  if (static_cast<size_t>(k) < scored.size()) scored.resize(static_cast<size_t>(k));

  RankedList out;
  out.query_id = std::move(query_id);
  out.entries.reserve(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    out.entries.push_back({index.doc_id(scored[i].second), scored[i].first,
                           static_cast<int>(i) + 1});
  }
  return out;
}

std::optional<std::string> top_document(const InvertedIndex& index,
                                        std::span<const std::string> sentence, double mu) {
  check_mu(mu);
  auto terms = analyze_query(sentence, index);
  if (terms.empty()) return std::nullopt;
  RankedList top = search(index, sentence, 1, mu);
  if (top.entries.empty()) return std::nullopt;
  return top.entries.front().doc_id;
}

namespace {

void put_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_u32_le(const std::string& s, size_t off) {
  return static_cast<uint32_t>(static_cast<unsigned char>(s[off])) |
         (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 1])) << 8) |
         (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 2])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 3])) << 24);
}

}  // namespace

void InvertedIndex::save(const std::string& path, const std::string& header_meta) const {
  std::ostringstream m;
  if (!header_meta.empty()) m << header_meta << "\n";
  m << "ratnmt-index v1\n";
  m << "docs " << doc_ids_.size() << "\n";
  for (size_t i = 0; i < doc_ids_.size(); ++i) {
    m << doc_ids_[i] << '\t' << doc_len_[i] << '\n';
  }
  m << "tokens " << terms_.size() << "\n";
  size_t total_postings = 0;
  for (size_t t = 0; t < terms_.size(); ++t) {
    m << terms_[t] << '\t' << coll_freq_[t] << '\t' << postings_[t].size() << '\n';
    total_postings += postings_[t].size();
  }
  std::string blob;
  blob.reserve(total_postings * 8);
  for (const auto& pl : postings_) {
    for (const auto& p : pl) {
      put_u32_le(blob, static_cast<uint32_t>(p.doc));
      put_u32_le(blob, static_cast<uint32_t>(p.tf));
    }
  }
  m << "blob " << blob.size() << "\n";
  std::string out = m.str();
  out += blob;
  write_file(path, out);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
  std::string content = read_file(path);
  InvertedIndex idx;
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) throw DataError(path + ": truncated index manifest");
    std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  std::string line = next_line();
  while (corpus::is_artifact_header_line(line)) line = next_line();
  if (line != "ratnmt-index v1") throw DataError(path + ": not a ratnmt index file");

  line = next_line();
  if (line.rfind("docs ", 0) != 0) throw DataError(path + ": malformed doc table header");
  int64_t n_docs = parse_i64(line.substr(5), "doc count");
  for (int64_t i = 0; i < n_docs; ++i) {
    auto cols = split(next_line(), '\t');
    if (cols.size() != 2) throw DataError(path + ": malformed doc table row");
    idx.doc_index_.emplace(cols[0], static_cast<int32_t>(idx.doc_ids_.size()));
    idx.doc_ids_.push_back(cols[0]);
    int64_t len = parse_i64(cols[1], "doc length");
    idx.doc_len_.push_back(len);
    idx.total_tokens_ += len;
  }

  line = next_line();
  if (line.rfind("tokens ", 0) != 0) throw DataError(path + ": malformed token table header");
  int64_t n_tokens = parse_i64(line.substr(7), "token count");
  std::vector<size_t> n_postings;
  for (int64_t i = 0; i < n_tokens; ++i) {
    auto cols = split(next_line(), '\t');
    if (cols.size() != 3) throw DataError(path + ": malformed token table row");
    idx.term_index_.emplace(cols[0], static_cast<int32_t>(idx.terms_.size()));
    idx.terms_.push_back(cols[0]);
    idx.coll_freq_.push_back(parse_i64(cols[1], "collection frequency"));
    n_postings.push_back(static_cast<size_t>(parse_i64(cols[2], "postings length")));
  }

  line = next_line();
  if (line.rfind("blob ", 0) != 0) throw DataError(path + ": malformed blob header");
  size_t blob_size = static_cast<size_t>(parse_i64(line.substr(5), "blob size"));
  if (content.size() - pos != blob_size) throw DataError(path + ": postings blob size mismatch");

  idx.postings_.resize(idx.terms_.size());
  size_t off = pos;
  for (size_t t = 0; t < idx.terms_.size(); ++t) {
    auto& pl = idx.postings_[t];
    pl.resize(n_postings[t]);
    int64_t sum_tf = 0;
    for (size_t j = 0; j < n_postings[t]; ++j) {
      pl[j].doc = static_cast<int32_t>(get_u32_le(content, off));
      pl[j].tf = static_cast<int32_t>(get_u32_le(content, off + 4));
      off += 8;
      sum_tf += pl[j].tf;
      if (j > 0 && pl[j - 1].doc >= pl[j].doc) {
        throw DataError(path + ": postings for '" + idx.terms_[t] + "' not sorted");
      }
      if (pl[j].doc < 0 || pl[j].doc >= static_cast<int32_t>(idx.doc_ids_.size())) {
        throw DataError(path + ": posting references unknown document");
      }
    }
    if (sum_tf != idx.coll_freq_[t]) {
      throw DataError(path + ": collection frequency mismatch for '" + idx.terms_[t] + "'");
    }
  }
  return idx;
}

}  // namespace ratnmt::retrieval
