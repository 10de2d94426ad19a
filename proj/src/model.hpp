#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "autodiff.hpp"
#include "corpus.hpp"
#include "ratgen.hpp"

namespace ratnmt::model {

struct TransformerConfig {
  int64_t d_model = 64;
  int64_t n_heads = 4;
  int64_t n_layers = 2;
  int64_t d_ff = 256;
  int64_t max_len = 64;
  double dropout_rate = 0.1;
  int32_t vocab_src = 0;
  int32_t vocab_union = 0;

  void validate() const {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0 || max_len <= 0) {
      throw UsageError("transformer config: all dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw UsageError("transformer config: d_model % n_heads != 0");
    if (d_model % 2 != 0) throw UsageError("transformer config: d_model must be even");
    if (vocab_src < corpus::Vocabulary::kNumSpecials ||
        vocab_union < corpus::Vocabulary::kNumSpecials) {
      throw UsageError("transformer config: vocabulary sizes not set");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw UsageError("transformer config: dropout_rate must be in [0, 1)");
    }
  }
};

// Sinusoidal positional encoding (Vaswani et al.): even columns sine, odd
// columns cosine of pos / 10000^(2i/d).
template <typename T>
autodiff::Tensor<T> positional_encoding(int64_t length, int64_t d_model) {
  if (d_model % 2 != 0) throw UsageError("positional_encoding: d_model must be even");
  if (length < 0) throw UsageError("positional_encoding: negative length");
  autodiff::Tensor<T> pe(length, d_model);
  for (int64_t pos = 0; pos < length; ++pos) {
    for (int64_t i = 0; i < d_model / 2; ++i) {
      double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      double angle = static_cast<double>(pos) * freq;
      pe(pos, 2 * i) = static_cast<T>(std::sin(angle));
      pe(pos, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

// softmax(Q K^T / sqrt(d_k) + mask) V.  The mask is additive; disallowed
// positions carry -1e9.
template <typename T>
typename autodiff::Graph<T>::NodeId scaled_dot_attention(
    autodiff::Graph<T>& g, typename autodiff::Graph<T>::NodeId q,
    typename autodiff::Graph<T>::NodeId k, typename autodiff::Graph<T>::NodeId v,
    std::optional<typename autodiff::Graph<T>::NodeId> mask = std::nullopt) {
  int64_t d_k = g.value(q).cols;
  if (g.value(k).cols != d_k || g.value(k).rows != g.value(v).rows) {
    throw InternalError("scaled_dot_attention: inconsistent shapes");
  }
  auto scores = g.scale(g.matmul(q, g.transpose(k)), static_cast<T>(1.0 / std::sqrt(d_k)));
  if (mask) scores = g.add(scores, *mask);
  return g.matmul(g.softmax_rows(scores), v);
}

struct IdPair {
  int64_t id = 0;
  std::vector<int32_t> src;
  std::vector<int32_t> tgt;
};

// Keys carry no bias: a bias shared by every key shifts each softmax row by a
// constant and cancels, so the parameter would be dead weight.
template <typename T>
struct AttentionParams {
  autodiff::Parameter<T> wq, bq, wk, wv, bv, wo, bo;
};

template <typename T>
struct FfnParams {
  autodiff::Parameter<T> w1, b1, w2, b2;
};

template <typename T>
struct LayerNormParams {
  autodiff::Parameter<T> gain, bias;
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> ln1;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln2;
  FfnParams<T> ffn;
};

template <typename T>
struct DecoderLayerParams {
  LayerNormParams<T> ln1;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln2;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> ln3;
  FfnParams<T> ffn;
};

// Pre-norm Transformer encoder-decoder over the union vocabulary, plus a CBOW
// head. The target embedding and the output transformation (out_proj,
// out_bias) are one storage read and written by both tasks; a control model
// with share_cbow_layers=false gives the CBOW head private copies instead.
template <typename T>
class TransformerModel {
 public:
  using G = autodiff::Graph<T>;
  using NodeId = typename G::NodeId;
  using Param = autodiff::Parameter<T>;

  TransformerModel(TransformerConfig config, uint64_t seed, bool share_cbow_layers = true)
      : cfg(config), shared_(share_cbow_layers) {
    cfg.validate();
    int64_t d = cfg.d_model;
    src_embedding = Param("src_embedding", cfg.vocab_src, d);
    tgt_embedding = Param("tgt_embedding", cfg.vocab_union, d);
    out_proj = Param("out_proj", d, cfg.vocab_union);
    out_bias = Param("out_bias", 1, cfg.vocab_union);
    enc_layers.resize(static_cast<size_t>(cfg.n_layers));
    dec_layers.resize(static_cast<size_t>(cfg.n_layers));
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
      std::string ep = "enc" + std::to_string(l) + ".";
      std::string dp = "dec" + std::to_string(l) + ".";
      init_attention(enc_layers[static_cast<size_t>(l)].self_attn, ep + "self.");
      init_ln(enc_layers[static_cast<size_t>(l)].ln1, ep + "ln1.");
      init_ln(enc_layers[static_cast<size_t>(l)].ln2, ep + "ln2.");
      init_ffn(enc_layers[static_cast<size_t>(l)].ffn, ep + "ffn.");
      init_attention(dec_layers[static_cast<size_t>(l)].self_attn, dp + "self.");
      init_attention(dec_layers[static_cast<size_t>(l)].cross_attn, dp + "cross.");
      init_ln(dec_layers[static_cast<size_t>(l)].ln1, dp + "ln1.");
      init_ln(dec_layers[static_cast<size_t>(l)].ln2, dp + "ln2.");
      init_ln(dec_layers[static_cast<size_t>(l)].ln3, dp + "ln3.");
      init_ffn(dec_layers[static_cast<size_t>(l)].ffn, dp + "ffn.");
    }
    init_ln(enc_final_ln, "enc_ln.");
    init_ln(dec_final_ln, "dec_ln.");
    rat_proj_w = Param("rat_proj_w", d, d);
    rat_proj_b = Param("rat_proj_b", 1, d);
    if (!shared_) {
      cbow_embedding = Param("cbow_embedding", cfg.vocab_union, d);
      cbow_out_proj = Param("cbow_out_proj", d, cfg.vocab_union);
      cbow_out_bias = Param("cbow_out_bias", 1, cfg.vocab_union);
    }
    pe_table_ = positional_encoding<T>(cfg.max_len, d);
    init_values(seed);
  }

  TransformerConfig cfg;

  Param src_embedding;
  Param tgt_embedding;  // shared layer 1
  Param out_proj;       // shared layer 2 (transformation)
  Param out_bias;
  std::vector<EncoderLayerParams<T>> enc_layers;
  std::vector<DecoderLayerParams<T>> dec_layers;
  LayerNormParams<T> enc_final_ln, dec_final_ln;
  Param rat_proj_w;  // CBOW-private linear projection
  Param rat_proj_b;
  Param cbow_embedding, cbow_out_proj, cbow_out_bias;  // control model only

  bool layers_shared() const { return shared_; }

  // One leaf node per parameter per graph so batch gradients accumulate.
  struct Leaves {
    G* g;
    std::unordered_map<const Param*, NodeId> ids;
    NodeId of(Param& p) {
      auto it = ids.find(&p);
      if (it != ids.end()) return it->second;
      NodeId id = g->leaf(p);
      ids.emplace(&p, id);
      return id;
    }
  };

  // ---- training losses ----

  // Sum over the batch and over target positions (t tokens plus <eos>) of the
  // token cross-entropy, teacher forced. dropout_rng=nullptr disables dropout.
  NodeId nmt_loss(G& g, std::span<const IdPair> batch, Rng* dropout_rng) {
    if (batch.empty()) throw DataError("nmt_loss: empty batch");
    Leaves lv{&g, {}};
    std::vector<NodeId> losses;
    losses.reserve(batch.size());
    for (const auto& pair : batch) {
      losses.push_back(sentence_loss(g, lv, pair, dropout_rng));
    }
    return g.sum_scalars(losses);
  }

  // CBOW objective: mean context embedding -> linear projection -> shared
  // transformation; cross-entropy against the pivot, summed over pairs.
  // Unscaled; the trainer applies alpha.
  NodeId cbow_loss(G& g, std::span<const ratgen::ContextPivotPair> batch) {
    if (batch.empty()) throw DataError("cbow_loss: empty batch");
    Leaves lv{&g, {}};
    std::vector<std::vector<int32_t>> bags;
    std::vector<int32_t> pivots;
    bags.reserve(batch.size());
    pivots.reserve(batch.size());
    for (const auto& cp : batch) {
      if (cp.context.empty()) throw DataError("cbow_loss: pair with empty context");
      bags.push_back(cp.context);
      pivots.push_back(cp.pivot);
    }
    Param& emb = shared_ ? tgt_embedding : cbow_embedding;
    Param& proj = shared_ ? out_proj : cbow_out_proj;
    Param& bias = shared_ ? out_bias : cbow_out_bias;
    NodeId ctx = g.bag_mean_embedding(lv.of(emb), std::move(bags));
    NodeId projected =
        g.add_row_broadcast(g.matmul(ctx, lv.of(rat_proj_w)), lv.of(rat_proj_b));
    NodeId logits =
        g.add_row_broadcast(g.matmul(projected, lv.of(proj)), lv.of(bias));
    return g.cross_entropy_sum(logits, std::move(pivots));
  }

  // ---- inference ----

  std::vector<int32_t> greedy_decode(std::span<const int32_t> src_ids, int64_t max_len) {
    return beam_decode(src_ids, max_len, 1);
  }

  // Beam search without length normalization; width 1 reduces to greedy.
  std::vector<int32_t> beam_decode(std::span<const int32_t> src_ids, int64_t max_len,
                                   int beam_width) {
    if (src_ids.empty()) throw DataError("translate: empty source");
    if (beam_width < 1) throw UsageError("translate: beam width must be >= 1");
    max_len = std::min<int64_t>(max_len, cfg.max_len - 1);
    const int32_t bos = corpus::Vocabulary::kBos;
    const int32_t eos = corpus::Vocabulary::kEos;

    G g;
    Leaves lv{&g, {}};
    NodeId enc = encode(g, lv, src_ids, nullptr);

    struct Hyp {
      std::vector<int32_t> ids;  // starts with <bos>
      double logprob = 0.0;
      bool done = false;
    };
    std::vector<Hyp> beams{Hyp{{bos}, 0.0, false}};
    for (int64_t step = 0; step < max_len; ++step) {
      bool all_done = true;
      std::vector<Hyp> expansions;
      for (const auto& h : beams) {
        if (h.done) {
          expansions.push_back(h);
          continue;
        }
        all_done = false;
        NodeId logits = decode(g, lv, enc, h.ids, nullptr);
        NodeId logp = g.log_softmax_rows(logits);
        const auto& lp = g.value(logp);
        int64_t last = lp.rows - 1;
        // Top beam_width continuations of this hypothesis.
        std::vector<int32_t> order(static_cast<size_t>(lp.cols));
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int32_t>(i);
        std::partial_sort(order.begin(),
                          order.begin() + std::min<size_t>(order.size(),
                                                           static_cast<size_t>(beam_width)),
                          order.end(), [&](int32_t a, int32_t b) {
                            T la = lp(last, a), lb = lp(last, b);
                            if (la != lb) return la > lb;
                            return a < b;
                          });
        for (int w = 0; w < beam_width && w < static_cast<int>(order.size()); ++w) {
          Hyp nh = h;
          int32_t tok = order[static_cast<size_t>(w)];
          nh.ids.push_back(tok);
          nh.logprob += static_cast<double>(lp(last, tok));
          nh.done = (tok == eos);
          expansions.push_back(std::move(nh));
        }
      }
      if (all_done) break;
      std::stable_sort(expansions.begin(), expansions.end(),
                       [](const Hyp& a, const Hyp& b) { return a.logprob > b.logprob; });
      if (expansions.size() > static_cast<size_t>(beam_width)) {
        expansions.resize(static_cast<size_t>(beam_width));
      }
      beams = std::move(expansions);
    }
    const Hyp* best = &beams.front();
    for (const auto& h : beams) {
      if (h.logprob > best->logprob) best = &h;
    }
    // Strip <bos> and a trailing <eos>.
    std::vector<int32_t> out(best->ids.begin() + 1, best->ids.end());
    if (!out.empty() && out.back() == eos) out.pop_back();
    return out;
  }

  // ---- parameter sets ----

  std::vector<Param*> shared_layer_params() { return {&tgt_embedding, &out_proj, &out_bias}; }

  std::vector<Param*> nmt_private_params() {
    std::vector<Param*> out{&src_embedding};
    for (auto& l : enc_layers) collect_enc(l, out);
    for (auto& l : dec_layers) collect_dec(l, out);
    out.push_back(&enc_final_ln.gain);
    out.push_back(&enc_final_ln.bias);
    out.push_back(&dec_final_ln.gain);
    out.push_back(&dec_final_ln.bias);
    return out;
  }

  std::vector<Param*> nmt_params() {
    auto out = nmt_private_params();
    for (auto* p : shared_layer_params()) out.push_back(p);
    return out;
  }

  std::vector<Param*> we_params() {
    std::vector<Param*> out;
    if (shared_) {
      out = shared_layer_params();
    } else {
      out = {&cbow_embedding, &cbow_out_proj, &cbow_out_bias};
    }
    out.push_back(&rat_proj_w);
    out.push_back(&rat_proj_b);
    return out;
  }

  std::vector<Param*> all_params() {
    auto out = nmt_params();
    out.push_back(&rat_proj_w);
    out.push_back(&rat_proj_b);
    if (!shared_) {
      out.push_back(&cbow_embedding);
      out.push_back(&cbow_out_proj);
      out.push_back(&cbow_out_bias);
    }
    return out;
  }

  Param* param_by_name(const std::string& name) {
    for (auto* p : all_params()) {
      if (p->name == name) return p;
    }
    return nullptr;
  }

  // ---- forward pieces (public for tests) ----

  NodeId encode(G& g, Leaves& lv, std::span<const int32_t> src_ids, Rng* dropout_rng) {
    if (src_ids.empty()) throw DataError("encode: empty source");
    if (static_cast<int64_t>(src_ids.size()) > cfg.max_len) {
      throw DataError("encode: sequence longer than max_len");
    }
    NodeId x = embed(g, lv.of(src_embedding), src_ids, dropout_rng);
    for (auto& layer : enc_layers) {
      NodeId normed = ln(g, lv, layer.ln1, x);
      NodeId att = attention(g, lv, layer.self_attn, normed, normed, std::nullopt);
      x = g.add(x, maybe_dropout(g, att, dropout_rng));
      NodeId normed2 = ln(g, lv, layer.ln2, x);
      NodeId ff = ffn(g, lv, layer.ffn, normed2);
      x = g.add(x, maybe_dropout(g, ff, dropout_rng));
    }
    return ln(g, lv, enc_final_ln, x);
  }

  // Decoder logits for the given (bos-framed) input ids; causal self-attention.
  NodeId decode(G& g, Leaves& lv, NodeId enc_out, std::span<const int32_t> dec_input_ids,
                Rng* dropout_rng) {
    if (dec_input_ids.empty()) throw DataError("decode: empty decoder input");
    if (static_cast<int64_t>(dec_input_ids.size()) > cfg.max_len) {
      throw DataError("decode: sequence longer than max_len");
    }
    int64_t m = static_cast<int64_t>(dec_input_ids.size());
    NodeId x = embed(g, lv.of(tgt_embedding), dec_input_ids, dropout_rng);
    NodeId causal = g.constant(causal_mask(m));
    for (auto& layer : dec_layers) {
      NodeId normed = ln(g, lv, layer.ln1, x);
      NodeId att = attention(g, lv, layer.self_attn, normed, normed, causal);
      x = g.add(x, maybe_dropout(g, att, dropout_rng));
      NodeId normed2 = ln(g, lv, layer.ln2, x);
      NodeId cross = attention(g, lv, layer.cross_attn, normed2, enc_out, std::nullopt);
      x = g.add(x, maybe_dropout(g, cross, dropout_rng));
      NodeId normed3 = ln(g, lv, layer.ln3, x);
      NodeId ff = ffn(g, lv, layer.ffn, normed3);
      x = g.add(x, maybe_dropout(g, ff, dropout_rng));
    }
    x = ln(g, lv, dec_final_ln, x);
    return g.add_row_broadcast(g.matmul(x, lv.of(out_proj)), lv.of(out_bias));
  }

  NodeId sentence_loss(G& g, Leaves& lv, const IdPair& pair, Rng* dropout_rng) {
    if (pair.tgt.empty() || pair.src.empty()) {
      throw DataError("nmt_loss: empty side in pair " + std::to_string(pair.id));
    }
    if (static_cast<int64_t>(pair.tgt.size()) + 1 > cfg.max_len) {
      throw DataError("nmt_loss: target of pair " + std::to_string(pair.id) +
                      " longer than max_len");
    }
    NodeId enc = encode(g, lv, pair.src, dropout_rng);
    std::vector<int32_t> dec_in;
    dec_in.reserve(pair.tgt.size() + 1);
    dec_in.push_back(corpus::Vocabulary::kBos);
    dec_in.insert(dec_in.end(), pair.tgt.begin(), pair.tgt.end());
    NodeId logits = decode(g, lv, enc, dec_in, dropout_rng);
    std::vector<int32_t> targets(pair.tgt.begin(), pair.tgt.end());
    targets.push_back(corpus::Vocabulary::kEos);
    return g.cross_entropy_sum(logits, std::move(targets));
  }

 private:
  bool shared_;
  autodiff::Tensor<T> pe_table_;

  void init_attention(AttentionParams<T>& a, const std::string& prefix) {
    int64_t d = cfg.d_model;
    a.wq = Param(prefix + "wq", d, d);
    a.bq = Param(prefix + "bq", 1, d);
    a.wk = Param(prefix + "wk", d, d);
    a.wv = Param(prefix + "wv", d, d);
    a.bv = Param(prefix + "bv", 1, d);
    a.wo = Param(prefix + "wo", d, d);
    a.bo = Param(prefix + "bo", 1, d);
  }

  void init_ffn(FfnParams<T>& f, const std::string& prefix) {
    f.w1 = Param(prefix + "w1", cfg.d_model, cfg.d_ff);
    f.b1 = Param(prefix + "b1", 1, cfg.d_ff);
    f.w2 = Param(prefix + "w2", cfg.d_ff, cfg.d_model);
    f.b2 = Param(prefix + "b2", 1, cfg.d_model);
  }

  void init_ln(LayerNormParams<T>& l, const std::string& prefix) {
    l.gain = Param(prefix + "gain", 1, cfg.d_model);
    l.bias = Param(prefix + "bias", 1, cfg.d_model);
    l.gain.value.fill(T(1));
  }

  static void collect_attn(AttentionParams<T>& a, std::vector<Param*>& out) {
    out.push_back(&a.wq);
    out.push_back(&a.bq);
    out.push_back(&a.wk);
    out.push_back(&a.wv);
    out.push_back(&a.bv);
    out.push_back(&a.wo);
    out.push_back(&a.bo);
  }

  static void collect_ln(LayerNormParams<T>& l, std::vector<Param*>& out) {
    out.push_back(&l.gain);
    out.push_back(&l.bias);
  }

  static void collect_ffn(FfnParams<T>& f, std::vector<Param*>& out) {
    out.push_back(&f.w1);
    out.push_back(&f.b1);
    out.push_back(&f.w2);
    out.push_back(&f.b2);
  }

  static void collect_enc(EncoderLayerParams<T>& l, std::vector<Param*>& out) {
    collect_ln(l.ln1, out);
    collect_attn(l.self_attn, out);
    collect_ln(l.ln2, out);
    collect_ffn(l.ffn, out);
  }

  static void collect_dec(DecoderLayerParams<T>& l, std::vector<Param*>& out) {
    collect_ln(l.ln1, out);
    collect_attn(l.self_attn, out);
    collect_ln(l.ln2, out);
    collect_attn(l.cross_attn, out);
    collect_ln(l.ln3, out);
    collect_ffn(l.ffn, out);
  }

  // Gaussian init for embeddings, attention and FFN weights; layer-norm affine
  // at identity; the output transformation starts at zero so fresh models put
  // a uniform distribution over the union vocabulary.
  void init_values(uint64_t seed) {
    Rng rng(hash_seed(seed, "model-init"));
    double emb_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    auto fill_gauss = [&](Param& p, double std) {
      for (auto& v : p.value.data) v = static_cast<T>(rng.next_gaussian() * std);
    };
    fill_gauss(src_embedding, emb_std);
    fill_gauss(tgt_embedding, emb_std);
    for (auto& l : enc_layers) {
      for (Param* w : {&l.self_attn.wq, &l.self_attn.wk, &l.self_attn.wv, &l.self_attn.wo}) {
        fill_gauss(*w, emb_std);
      }
      fill_gauss(l.ffn.w1, emb_std);
      fill_gauss(l.ffn.w2, 1.0 / std::sqrt(static_cast<double>(cfg.d_ff)));
    }
    for (auto& l : dec_layers) {
      for (Param* w : {&l.self_attn.wq, &l.self_attn.wk, &l.self_attn.wv, &l.self_attn.wo,
                       &l.cross_attn.wq, &l.cross_attn.wk, &l.cross_attn.wv, &l.cross_attn.wo}) {
        fill_gauss(*w, emb_std);
      }
      fill_gauss(l.ffn.w1, emb_std);
      fill_gauss(l.ffn.w2, 1.0 / std::sqrt(static_cast<double>(cfg.d_ff)));
    }
    fill_gauss(rat_proj_w, emb_std);
    if (!shared_) {
      cbow_embedding.value = tgt_embedding.value;
      cbow_out_proj.value = out_proj.value;
      cbow_out_bias.value = out_bias.value;
    }
  }

  autodiff::Tensor<T> causal_mask(int64_t m) const {
    autodiff::Tensor<T> mask(m, m);
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = i + 1; j < m; ++j) mask(i, j) = T(-1e9);
    }
    return mask;
  }

  NodeId maybe_dropout(G& g, NodeId x, Rng* rng) {
    if (!rng || cfg.dropout_rate <= 0.0) return x;
    const auto& v = g.value(x);
    autodiff::Tensor<T> mask(v.rows, v.cols);
    T keep_scale = static_cast<T>(1.0 / (1.0 - cfg.dropout_rate));
    for (auto& mv : mask.data) {
      mv = rng->next_unit() < cfg.dropout_rate ? T(0) : keep_scale;
    }
    return g.dropout(x, std::move(mask));
  }

  NodeId embed(G& g, NodeId emb_leaf, std::span<const int32_t> ids, Rng* dropout_rng) {
    NodeId x = g.embedding_lookup(emb_leaf, std::vector<int32_t>(ids.begin(), ids.end()));
    autodiff::Tensor<T> pe(static_cast<int64_t>(ids.size()), cfg.d_model);
    for (int64_t i = 0; i < pe.rows; ++i) {
      for (int64_t j = 0; j < cfg.d_model; ++j) pe(i, j) = pe_table_(i, j);
    }
    x = g.add(x, g.constant(std::move(pe)));
    return maybe_dropout(g, x, dropout_rng);
  }

  NodeId ln(G& g, Leaves& lv, LayerNormParams<T>& p, NodeId x) {
    return g.layer_norm_rows(x, lv.of(p.gain), lv.of(p.bias));
  }

  NodeId attention(G& g, Leaves& lv, AttentionParams<T>& p, NodeId queries_in, NodeId memory,
                   std::optional<NodeId> mask) {
    int64_t dk = cfg.d_model / cfg.n_heads;
    NodeId q = g.add_row_broadcast(g.matmul(queries_in, lv.of(p.wq)), lv.of(p.bq));
    NodeId k = g.matmul(memory, lv.of(p.wk));
    NodeId v = g.add_row_broadcast(g.matmul(memory, lv.of(p.wv)), lv.of(p.bv));
    std::vector<NodeId> heads;
    heads.reserve(static_cast<size_t>(cfg.n_heads));
    for (int64_t h = 0; h < cfg.n_heads; ++h) {
      NodeId qh = g.slice_cols(q, h * dk, (h + 1) * dk);
      NodeId kh = g.slice_cols(k, h * dk, (h + 1) * dk);
      NodeId vh = g.slice_cols(v, h * dk, (h + 1) * dk);
      heads.push_back(scaled_dot_attention(g, qh, kh, vh, mask));
    }
    NodeId cat = g.concat_cols(heads);
    return g.add_row_broadcast(g.matmul(cat, lv.of(p.wo)), lv.of(p.bo));
  }

  NodeId ffn(G& g, Leaves& lv, FfnParams<T>& p, NodeId x) {
    NodeId h = g.relu(g.add_row_broadcast(g.matmul(x, lv.of(p.w1)), lv.of(p.b1)));
    return g.add_row_broadcast(g.matmul(h, lv.of(p.w2)), lv.of(p.b2));
  }
};

}  // namespace ratnmt::model
