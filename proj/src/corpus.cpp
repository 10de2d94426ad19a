#include "corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common.hpp"

namespace ratnmt::corpus {

using nlohmann::json;

bool is_artifact_header_line(std::string_view line) {
  return line.substr(0, 8) == "# ratnmt";
}

namespace {

std::string loc(const std::string& path, size_t line_no) {
  return path + " line " + std::to_string(line_no);
}

json parse_json_line(const std::string& path, size_t line_no, std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError(loc(path, line_no) + ": unparseable JSON record");
  }
  return j;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(where + ": missing field \"" + key + "\"");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<int64_t>());
  throw DataError(where + ": field \"" + key + "\" must be a string");
}

}  // namespace

std::vector<ParallelPair> load_parallel(const std::string& path,
                                        const textprep::StopList& src_stoplist,
                                        const textprep::StopList& tgt_stoplist,
                                        LoadStats* stats) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  std::vector<ParallelPair> pairs;
  LoadStats local;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (is_artifact_header_line(line)) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2) {
      throw DataError(loc(path, ln + 1) + ": expected 2 tab-separated columns, got " +
                      std::to_string(cols.size()));
    }
    ParallelPair p;
    p.source_tokens = textprep::preprocess(cols[0], src_stoplist);
    p.target_tokens = textprep::preprocess(cols[1], tgt_stoplist);
    if (p.source_tokens.empty() || p.target_tokens.empty()) {
      ++local.dropped;
      continue;
    }
    p.id = static_cast<int64_t>(pairs.size());
    pairs.push_back(std::move(p));
    ++local.kept;
  }
  if (stats) *stats = local;
  return pairs;
}

namespace {

std::vector<Document> load_documents_jsonl(const std::string& path, const std::string& content,
                                           const textprep::StopList& stoplist,
                                           LoadStats& stats) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  auto lines = split(content, '\n');
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    json j = parse_json_line(path, ln + 1, line);
    if (j.contains("_meta")) continue;
    Document d;
    d.doc_id = require_string(j, "id", loc(path, ln + 1));
    std::string text = require_string(j, "text", loc(path, ln + 1));
    if (!seen.insert(d.doc_id).second) {
      throw DataError(loc(path, ln + 1) + ": duplicate doc_id '" + d.doc_id + "'");
    }
    d.tokens = textprep::preprocess(text, stoplist);
    if (d.tokens.empty()) {
      ++stats.dropped;
      continue;
    }
    docs.push_back(std::move(d));
    ++stats.kept;
  }
  return docs;
}

// Finds <TAG> ... </TAG> starting at `from`; returns inner text.
std::optional<std::string> sgml_field(std::string_view block, const char* tag) {
  std::string open = std::string("<") + tag + ">";
  std::string close = std::string("</") + tag + ">";
  std::string out;
  size_t pos = 0;
  bool found = false;
  while (true) {
    size_t b = block.find(open, pos);
    if (b == std::string_view::npos) break;
    size_t e = block.find(close, b + open.size());
    if (e == std::string_view::npos) break;
    if (found) out += ' ';
    out += std::string(block.substr(b + open.size(), e - b - open.size()));
    found = true;
    pos = e + close.size();
  }
  if (!found) return std::nullopt;
  return out;
}

std::vector<Document> load_documents_trec(const std::string& path, const std::string& content,
                                          const textprep::StopList& stoplist,
                                          LoadStats& stats) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  size_t pos = 0;
  int block_no = 0;
  while (true) {
    size_t b = content.find("<DOC>", pos);
    if (b == std::string::npos) break;
    size_t e = content.find("</DOC>", b);
    if (e == std::string::npos) {
      throw DataError(path + ": unterminated <DOC> block at offset " + std::to_string(b));
    }
    ++block_no;
    std::string_view block(content.data() + b, e - b);
    auto docno = sgml_field(block, "DOCNO");
    if (!docno) {
      throw DataError(path + ": <DOC> block " + std::to_string(block_no) + " has no <DOCNO>");
    }
    auto text = sgml_field(block, "TEXT");
    Document d;
    d.doc_id = std::string(trim(*docno));
    if (d.doc_id.empty()) {
      throw DataError(path + ": <DOC> block " + std::to_string(block_no) + " has empty <DOCNO>");
    }
    if (!seen.insert(d.doc_id).second) {
      throw DataError(path + ": duplicate doc_id '" + d.doc_id + "'");
    }
    d.tokens = textprep::preprocess(text ? *text : "", stoplist);
    if (d.tokens.empty()) {
      ++stats.dropped;
    } else {
      docs.push_back(std::move(d));
      ++stats.kept;
    }
    pos = e + 6;
  }
  return docs;
}

}  // namespace

std::vector<Document> load_documents(const std::string& path, const textprep::StopList& stoplist,
                                     LoadStats* stats) {
  std::string content = read_file(path);
  LoadStats local;
  // Auto-detect by the first non-blank byte.
  char first = 0;
  for (char c : content) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      first = c;
      break;
    }
  }
  std::vector<Document> docs;
  if (first == '{') {
    docs = load_documents_jsonl(path, content, stoplist, local);
  } else if (first == '<') {
    docs = load_documents_trec(path, content, stoplist, local);
  } else {
    throw DataError(path + ": unrecognized document format (expected JSONL or TREC SGML)");
  }
  if (stats) *stats = local;
  return docs;
}

std::vector<Topic> load_topics(const std::string& path) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  std::vector<Topic> topics;
  std::set<std::string> seen;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    json j = parse_json_line(path, ln + 1, line);
    if (j.contains("_meta")) continue;
    Topic t;
    t.query_id = require_string(j, "qid", loc(path, ln + 1));
    t.title = j.value("title", std::string());
    t.description = j.value("description", std::string());
    if (!seen.insert(t.query_id).second) {
      throw DataError(loc(path, ln + 1) + ": duplicate query_id '" + t.query_id + "'");
    }
    topics.push_back(std::move(t));
  }
  return topics;
}

QrelSet QrelSet::load(const std::string& path) {
  QrelSet qrels;
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view raw = trim(lines[ln]);
    if (raw.empty() || is_artifact_header_line(raw)) continue;
    std::istringstream iss{std::string(raw)};
    std::string qid, iter, docid, grade_str;
    if (!(iss >> qid >> iter >> docid >> grade_str)) {
      throw DataError(loc(path, ln + 1) + ": malformed qrels line");
    }
    std::string extra;
    if (iss >> extra) throw DataError(loc(path, ln + 1) + ": trailing fields in qrels line");
    int64_t grade = parse_i64(grade_str, "qrels grade at " + loc(path, ln + 1));
    if (grade < 0) {
      throw DataError(loc(path, ln + 1) + ": negative relevance grade " + grade_str);
    }
    qrels.add(qid, docid, static_cast<int>(grade));
  }
  return qrels;
}

void QrelSet::add(const std::string& qid, const std::string& doc_id, int grade) {
  by_query_[qid][doc_id] = grade;
}

int QrelSet::grade(const std::string& qid, const std::string& doc_id) const {
  auto it = by_query_.find(qid);
  if (it == by_query_.end()) return 0;
  auto jt = it->second.find(doc_id);
  return jt == it->second.end() ? 0 : jt->second;
}

int64_t QrelSet::relevant_count(const std::string& qid) const {
  auto it = by_query_.find(qid);
  if (it == by_query_.end()) return 0;
  int64_t n = 0;
  for (const auto& [doc, g] : it->second) {
    if (g > 0) ++n;
  }
  return n;
}

bool QrelSet::has_query(const std::string& qid) const { return by_query_.count(qid) > 0; }

std::vector<std::string> QrelSet::queries_without_relevant() const {
  std::vector<std::string> out;
  for (const auto& [qid, _] : by_query_) {
    if (relevant_count(qid) == 0) out.push_back(qid);
  }
  return out;
}

std::vector<std::string> topic_query_tokens(const Topic& topic,
                                            const textprep::StopList& stoplist) {
  std::string text = topic.title + " " + topic.description;
  auto tokens = textprep::preprocess(text, stoplist);
  if (tokens.empty()) {
    throw DataError("topic '" + topic.query_id + "': no query tokens after preprocessing");
  }
  return tokens;
}

int32_t Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::optional<int32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int32_t> Vocabulary::ids(std::span<const std::string> tokens) const {
  std::vector<int32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lookup(t));
  return out;
}

void Vocabulary::finish(std::map<std::string, std::pair<int64_t, int64_t>>&& counts) {
  entries_.clear();
  index_.clear();
  total_tc_ = 0;
  total_rc_ = 0;
  entries_.push_back({"<pad>", 0, 0});
  entries_.push_back({"<unk>", 0, 0});
  entries_.push_back({"<bos>", 0, 0});
  entries_.push_back({"<eos>", 0, 0});
  std::vector<std::pair<std::string, std::pair<int64_t, int64_t>>> items(
      std::make_move_iterator(counts.begin()), std::make_move_iterator(counts.end()));
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    int64_t ta = a.second.first + a.second.second;
    int64_t tb = b.second.first + b.second.second;
    if (ta != tb) return ta > tb;
    return a.first < b.first;
  });
  for (auto& [token, c] : items) {
    total_tc_ += c.first;
    total_rc_ += c.second;
    entries_.push_back({std::move(token), c.first, c.second});
  }
  for (int32_t i = 0; i < size(); ++i) index_[entries_[static_cast<size_t>(i)].token] = i;
}

Vocabulary build_vocab(std::span<const ParallelPair> tc_pairs,
                       std::span<const Document> rc_docs) {
  std::map<std::string, std::pair<int64_t, int64_t>> counts;
  for (const auto& p : tc_pairs) {
    for (const auto& t : p.target_tokens) counts[t].first += 1;
  }
  for (const auto& d : rc_docs) {
    for (const auto& t : d.tokens) counts[t].second += 1;
  }
  Vocabulary v;
  v.finish(std::move(counts));
  return v;
}

Vocabulary build_source_vocab(std::span<const ParallelPair> tc_pairs) {
  std::map<std::string, std::pair<int64_t, int64_t>> counts;
  for (const auto& p : tc_pairs) {
    for (const auto& t : p.source_tokens) counts[t].first += 1;
  }
  Vocabulary v;
  v.finish(std::move(counts));
  return v;
}

void Vocabulary::save_tsv(const std::string& path, const std::string& header) const {
  std::ostringstream oss;
  if (!header.empty()) oss << header << "\n";
  for (int32_t i = 0; i < size(); ++i) {
    const Entry& e = entry(i);
    oss << e.token << '\t' << i << '\t' << e.count_tc << '\t' << e.count_rc << '\n';
  }
  write_file(path, oss.str());
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::string content = read_file(path);
  auto lines = split(content, '\n');
  Vocabulary v;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || is_artifact_header_line(line)) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 4) {
      throw DataError(loc(path, ln + 1) + ": expected 4 columns in vocabulary TSV");
    }
    Entry e;
    e.token = cols[0];
    int64_t idx = parse_i64(cols[1], "vocab index at " + loc(path, ln + 1));
    e.count_tc = parse_i64(cols[2], "count_tc at " + loc(path, ln + 1));
    e.count_rc = parse_i64(cols[3], "count_rc at " + loc(path, ln + 1));
    if (idx != static_cast<int64_t>(v.entries_.size())) {
      throw DataError(loc(path, ln + 1) + ": vocabulary indices must be dense and in order");
    }
    v.total_tc_ += e.count_tc;
    v.total_rc_ += e.count_rc;
    v.entries_.push_back(std::move(e));
  }
  if (v.size() < kNumSpecials || v.token(kPad) != "<pad>" || v.token(kUnk) != "<unk>" ||
      v.token(kBos) != "<bos>" || v.token(kEos) != "<eos>") {
    throw DataError(path + ": vocabulary is missing the reserved special tokens");
  }
  for (int32_t i = 0; i < v.size(); ++i) v.index_[v.entries_[static_cast<size_t>(i)].token] = i;
  return v;
}

uint64_t Vocabulary::content_hash() const {
  uint64_t h = fnv1a64("ratnmt-vocab");
  for (int32_t i = 0; i < size(); ++i) {
    const Entry& e = entry(i);
    std::string line = e.token + "\t" + std::to_string(i) + "\t" + std::to_string(e.count_tc) +
                       "\t" + std::to_string(e.count_rc) + "\n";
    h = fnv1a64(line, h);
  }
  return h;
}

}  // namespace ratnmt::corpus
