#include "model_io.hpp"

#include <cstring>
#include <sstream>

#include <json.hpp>

#include "common.hpp"
#include "corpus.hpp"

namespace ratnmt::model {

using nlohmann::json;

const autodiff::Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : params) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

void put_f32_le(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>((bits >> 8) & 0xFF));
  out.push_back(static_cast<char>((bits >> 16) & 0xFF));
  out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

float get_f32_le(const std::string& s, size_t off) {
  uint32_t bits = static_cast<uint32_t>(static_cast<unsigned char>(s[off])) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 1])) << 8) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 2])) << 16) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(s[off + 3])) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<autodiff::Parameter<float>*>& params,
                     const std::map<std::string, std::string>& meta,
                     const std::string& header) {
  std::ostringstream m;
  if (!header.empty()) m << header << "\n";
  m << "ratnmt-ckpt v1\n";
  json j(meta);
  m << "meta " << j.dump() << "\n";
  int64_t offset = 0;
  for (const auto* p : params) {
    m << "param " << p->name << ' ' << p->value.rows << ' ' << p->value.cols << ' ' << offset
      << "\n";
    offset += p->value.numel() * 4;
  }
  std::string blob;
  blob.reserve(static_cast<size_t>(offset));
  for (const auto* p : params) {
    for (float v : p->value.data) put_f32_le(blob, v);
  }
  m << "blob " << blob.size() << "\n";
  std::string out = m.str();
  out += blob;
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string content = read_file(path);
  Checkpoint ckpt;
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) throw DataError(path + ": truncated checkpoint manifest");
    std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  std::string line = next_line();
  while (corpus::is_artifact_header_line(line)) line = next_line();
  if (line != "ratnmt-ckpt v1") throw DataError(path + ": not a ratnmt checkpoint");
  struct Entry {
    std::string name;
    int64_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  size_t blob_size = 0;
  for (;;) {
    line = next_line();
    if (line.rfind("meta ", 0) == 0) {
      json j = json::parse(line.substr(5), nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw DataError(path + ": malformed meta line");
      for (auto& [k, v] : j.items()) {
        ckpt.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else if (line.rfind("param ", 0) == 0) {
      std::istringstream iss(line.substr(6));
      Entry e;
      if (!(iss >> e.name >> e.rows >> e.cols >> e.offset)) {
        throw DataError(path + ": malformed param line: " + line);
      }
      entries.push_back(std::move(e));
    } else if (line.rfind("blob ", 0) == 0) {
      blob_size = static_cast<size_t>(parse_i64(line.substr(5), "checkpoint blob size"));
      break;
    } else {
      throw DataError(path + ": unexpected manifest line: " + line);
    }
  }
  if (content.size() - pos != blob_size) throw DataError(path + ": checkpoint blob size mismatch");
  for (const auto& e : entries) {
    autodiff::Tensor<float> t(e.rows, e.cols);
    size_t base = pos + static_cast<size_t>(e.offset);
    if (base + static_cast<size_t>(t.numel()) * 4 > content.size()) {
      throw DataError(path + ": parameter '" + e.name + "' extends past blob");
    }
    for (int64_t i = 0; i < t.numel(); ++i) {
      t.data[static_cast<size_t>(i)] = get_f32_le(content, base + static_cast<size_t>(i) * 4);
    }
    ckpt.params.emplace_back(e.name, std::move(t));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, TransformerModel<float>& m) {
  for (auto* p : m.all_params()) {
    const auto* t = ckpt.find(p->name);
    if (!t) {
      if (p->name.rfind("rat_proj", 0) == 0 || p->name.rfind("cbow_", 0) == 0) continue;
      throw DataError("checkpoint missing parameter '" + p->name + "'");
    }
    if (t->rows != p->value.rows || t->cols != p->value.cols) {
      throw DataError("checkpoint parameter '" + p->name + "' has shape " + t->shape_str() +
                      ", model expects " + p->value.shape_str());
    }
    p->value = *t;
  }
}

std::map<std::string, std::string> config_to_meta(const TransformerConfig& cfg) {
  return {
      {"d_model", std::to_string(cfg.d_model)},
      {"n_heads", std::to_string(cfg.n_heads)},
      {"n_layers", std::to_string(cfg.n_layers)},
      {"d_ff", std::to_string(cfg.d_ff)},
      {"max_len", std::to_string(cfg.max_len)},
      {"dropout", std::to_string(cfg.dropout_rate)},
      {"vocab_src", std::to_string(cfg.vocab_src)},
      {"vocab_union", std::to_string(cfg.vocab_union)},
  };
}

TransformerConfig config_from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&](const char* key) -> std::string {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError(std::string("checkpoint meta missing '") + key + "'");
    return it->second;
  };
  TransformerConfig cfg;
  cfg.d_model = parse_i64(get("d_model"), "d_model");
  cfg.n_heads = parse_i64(get("n_heads"), "n_heads");
  cfg.n_layers = parse_i64(get("n_layers"), "n_layers");
  cfg.d_ff = parse_i64(get("d_ff"), "d_ff");
  cfg.max_len = parse_i64(get("max_len"), "max_len");
  cfg.dropout_rate = parse_f64(get("dropout"), "dropout");
  cfg.vocab_src = static_cast<int32_t>(parse_i64(get("vocab_src"), "vocab_src"));
  cfg.vocab_union = static_cast<int32_t>(parse_i64(get("vocab_union"), "vocab_union"));
  return cfg;
}

}  // namespace ratnmt::model
