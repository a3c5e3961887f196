#include "nmt/model/transformer.hpp"

#include <cmath>
#include <limits>

#include "nmt/error.hpp"

namespace nmt::model {

using tensor::Shape;
using tensor::shape_str;
using tensor::Tensor;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void ModelConfig::validate() const {
  if (d_model == 0 || num_layers == 0 || num_heads == 0 || d_ff == 0) {
    throw DataError("model dimensions must be positive");
  }
  if (d_model % 2 != 0) {
    throw DataError("d_model must be even for sinusoidal positions, got " +
                    std::to_string(d_model));
  }
  if (d_model % num_heads != 0) {
    throw DataError("d_model " + std::to_string(d_model) +
                    " is not divisible by num_heads " +
                    std::to_string(num_heads));
  }
  if (src_vocab_size < tok::kNumSpecials || tgt_vocab_size < tok::kNumSpecials) {
    throw DataError("vocabulary sizes must include the special tokens");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw DataError("dropout_rate must lie in [0, 1)");
  }
}

std::size_t ModelConfig::param_count() const {
  const std::size_t d = d_model, f = d_ff;
  const std::size_t attn = 4 * d * d;
  const std::size_t ffn = d * f + f + f * d + d;
  const std::size_t norm = 2 * d;
  const std::size_t enc_layer = attn + ffn + 2 * norm;
  const std::size_t dec_layer = 2 * attn + ffn + 3 * norm;
  return src_vocab_size * d + tgt_vocab_size * d +
         num_layers * (enc_layer + dec_layer) + d * tgt_vocab_size +
         tgt_vocab_size;
}

// ---- parameters ------------------------------------------------------

namespace {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

AttentionParams init_attention(std::size_t d, Rng& rng) {
  return {glorot({d, d}, d, d, rng), glorot({d, d}, d, d, rng),
          glorot({d, d}, d, d, rng), glorot({d, d}, d, d, rng)};
}

NormParams init_norm(std::size_t d) {
  return {Tensor::full({d}, 1.0), Tensor::zeros({d})};
}

FeedForwardParams init_ffn(std::size_t d, std::size_t f, Rng& rng) {
  return {glorot({d, f}, d, f, rng), Tensor::zeros({f}),
          glorot({f, d}, f, d, rng), Tensor::zeros({d})};
}

void collect_attention(std::vector<NamedParam>& out, const std::string& prefix,
                       const AttentionParams& p) {
  out.push_back({prefix + ".wq", p.wq, false});
  out.push_back({prefix + ".wk", p.wk, false});
  out.push_back({prefix + ".wv", p.wv, false});
  out.push_back({prefix + ".wo", p.wo, false});
}

void collect_norm(std::vector<NamedParam>& out, const std::string& prefix,
                  const NormParams& p) {
  out.push_back({prefix + ".gain", p.gain, false});
  out.push_back({prefix + ".bias", p.bias, false});
}

void collect_ffn(std::vector<NamedParam>& out, const std::string& prefix,
                 const FeedForwardParams& p) {
  out.push_back({prefix + ".w1", p.w1, false});
  out.push_back({prefix + ".b1", p.b1, false});
  out.push_back({prefix + ".w2", p.w2, false});
  out.push_back({prefix + ".b2", p.b2, false});
}

}  // namespace

TransformerParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(Rng::mix(seed, 0x706172616d73ULL));  // params stream
  TransformerParams p;
  p.config = config;
  const std::size_t d = config.d_model;
  p.src_embed = glorot({config.src_vocab_size, d}, config.src_vocab_size, d, rng);
  p.tgt_embed = glorot({config.tgt_vocab_size, d}, config.tgt_vocab_size, d, rng);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    p.encoder.push_back({init_attention(d, rng), init_norm(d),
                         init_ffn(d, config.d_ff, rng), init_norm(d)});
  }
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    p.decoder.push_back({init_attention(d, rng), init_norm(d),
                         init_attention(d, rng), init_norm(d),
                         init_ffn(d, config.d_ff, rng), init_norm(d)});
  }
  p.out_proj = glorot({d, config.tgt_vocab_size}, d, config.tgt_vocab_size, rng);
  p.out_bias = Tensor::zeros({config.tgt_vocab_size});
  p.set_requires_grad(true);
  return p;
}

std::vector<NamedParam> TransformerParams::named() const {
  std::vector<NamedParam> out;
  out.push_back({"src_embed", src_embed, true});
  out.push_back({"tgt_embed", tgt_embed, true});
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const std::string base = "enc." + std::to_string(l);
    collect_attention(out, base + ".self", encoder[l].self_attn);
    collect_norm(out, base + ".norm1", encoder[l].norm1);
    collect_ffn(out, base + ".ffn", encoder[l].ffn);
    collect_norm(out, base + ".norm2", encoder[l].norm2);
  }
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string base = "dec." + std::to_string(l);
    collect_attention(out, base + ".self", decoder[l].self_attn);
    collect_norm(out, base + ".norm1", decoder[l].norm1);
    collect_attention(out, base + ".cross", decoder[l].cross_attn);
    collect_norm(out, base + ".norm2", decoder[l].norm2);
    collect_ffn(out, base + ".ffn", decoder[l].ffn);
    collect_norm(out, base + ".norm3", decoder[l].norm3);
  }
  out.push_back({"out_proj", out_proj, false});
  out.push_back({"out_bias", out_bias, false});
  return out;
}

void TransformerParams::set_requires_grad(bool v) {
  for (auto& np : named()) np.tensor.set_requires_grad(v);
}

void TransformerParams::zero_grad() {
  for (auto& np : named()) np.tensor.zero_grad();
}

std::size_t TransformerParams::total_elements() const {
  std::size_t n = 0;
  for (const auto& np : named()) n += np.tensor.numel();
  return n;
}

// ---- fixed tensors ---------------------------------------------------

Tensor positional_encoding(std::size_t max_len, std::size_t d_model) {
  if (d_model % 2 != 0) {
    throw DataError("positional encoding requires even d_model, got " +
                    std::to_string(d_model));
  }
  Tensor t = Tensor::zeros({max_len, d_model});
  auto& v = t.values();
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, (2.0 * static_cast<double>(i)) /
                                static_cast<double>(d_model));
      v[pos * d_model + 2 * i] = std::sin(angle);
      v[pos * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  return t;
}

Tensor causal_mask(std::size_t len) {
  Tensor t = Tensor::zeros({len, len});
  auto& v = t.values();
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = i + 1; j < len; ++j) v[i * len + j] = kNegInf;
  }
  return t;
}

namespace {

std::size_t common_length(const std::vector<tok::TokenSeq>& ids,
                          const char* what) {
  if (ids.empty()) throw DataError(std::string(what) + ": empty batch");
  const std::size_t len = ids[0].size();
  for (const auto& row : ids) {
    if (row.size() != len) {
      throw DataError(std::string(what) +
                      ": ragged batch; pad rows to a common length first");
    }
  }
  return len;
}

}  // namespace

Tensor padding_mask(const std::vector<tok::TokenSeq>& ids) {
  const std::size_t len = common_length(ids, "padding_mask");
  Tensor t = Tensor::zeros({ids.size(), len});
  auto& v = t.values();
  for (std::size_t b = 0; b < ids.size(); ++b) {
    for (std::size_t j = 0; j < len; ++j) {
      if (ids[b][j] == tok::kPad) v[b * len + j] = kNegInf;
    }
  }
  return t;
}

Tensor attention_mask(const std::vector<tok::TokenSeq>& key_ids,
                      std::size_t query_len, std::size_t num_heads,
                      bool causal) {
  const std::size_t key_len = common_length(key_ids, "attention_mask");
  if (causal && query_len != key_len) {
    throw DimensionError("a causal mask needs square attention, got " +
                         std::to_string(query_len) + " queries over " +
                         std::to_string(key_len) + " keys");
  }
  bool any_pad = false;
  for (const auto& row : key_ids) {
    for (tok::TokenId id : row) any_pad |= (id == tok::kPad);
  }
  if (!any_pad && !causal) return {};
  if (!any_pad && causal) return causal_mask(query_len);

  const std::size_t batch = key_ids.size();
  Tensor t = Tensor::zeros({batch, num_heads, query_len, key_len});
  auto& v = t.values();
  std::size_t idx = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < num_heads; ++h) {
      for (std::size_t i = 0; i < query_len; ++i) {
        for (std::size_t j = 0; j < key_len; ++j, ++idx) {
          if ((causal && j > i) || key_ids[b][j] == tok::kPad) v[idx] = kNegInf;
        }
      }
    }
  }
  return t;
}

// ---- forward ---------------------------------------------------------

namespace {

Tensor apply_dropout(const Tensor& x, const Dropout& dropout) {
  if (!dropout.active()) return x;
  const double keep = 1.0 - dropout.rate;
  Tensor mask = Tensor::zeros(x.shape());
  for (double& v : mask.values()) {
    v = dropout.rng->uniform01() < keep ? 1.0 / keep : 0.0;
  }
  return tensor::mul(x, mask);
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& p) {
  Tensor h = tensor::relu(tensor::add(tensor::matmul(x, p.w1), p.b1));
  return tensor::add(tensor::matmul(h, p.w2), p.b2);
}

Tensor sublayer_norm(const Tensor& residual, const Tensor& sublayer_out,
                     const NormParams& norm, const Dropout& dropout) {
  return tensor::layer_norm(
      tensor::add(residual, apply_dropout(sublayer_out, dropout)), norm.gain,
      norm.bias);
}

// Embedding * sqrt(d) + positions for a padded id batch.
Tensor embed_with_positions(const Tensor& table,
                            const std::vector<tok::TokenSeq>& ids,
                            const ModelConfig& config, const char* what,
                            const Dropout& dropout) {
  const std::size_t len = common_length(ids, what);
  if (len > config.max_len) {
    throw DataError(std::string(what) + ": sequence length " +
                    std::to_string(len) + " exceeds max_len " +
                    std::to_string(config.max_len));
  }
  tok::TokenSeq flat;
  flat.reserve(ids.size() * len);
  for (const auto& row : ids) flat.insert(flat.end(), row.begin(), row.end());
  Tensor x = tensor::embedding_lookup(table, flat);
  x = tensor::reshape(x, {ids.size(), len, config.d_model});
  x = tensor::scale(x, std::sqrt(static_cast<double>(config.d_model)));
  x = tensor::add(x, positional_encoding(len, config.d_model));
  return apply_dropout(x, dropout);
}

}  // namespace

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor& mask, const AttentionParams& params,
                            std::size_t num_heads, Tensor* attn_out) {
  const Shape& sq = q.shape();
  if (sq.size() != 3 || k.shape().size() != 3 || v.shape().size() != 3) {
    throw DimensionError("attention expects [batch, len, d_model] inputs");
  }
  const std::size_t batch = sq[0];
  const std::size_t d = sq[2];
  if (d % num_heads != 0) {
    throw DimensionError("d_model " + std::to_string(d) +
                         " not divisible by num_heads " +
                         std::to_string(num_heads));
  }
  if (k.shape() != v.shape() || k.shape()[0] != batch || k.shape()[2] != d) {
    throw DimensionError("attention key/value shapes " +
                         shape_str(k.shape()) + "/" + shape_str(v.shape()) +
                         " incompatible with queries " + shape_str(sq));
  }
  const std::size_t lq = sq[1];
  const std::size_t lk = k.shape()[1];
  const std::size_t dh = d / num_heads;

  Tensor qh = tensor::transpose(
      tensor::reshape(tensor::matmul(q, params.wq), {batch, lq, num_heads, dh}),
      1, 2);
  Tensor kh = tensor::transpose(
      tensor::reshape(tensor::matmul(k, params.wk), {batch, lk, num_heads, dh}),
      1, 2);
  Tensor vh = tensor::transpose(
      tensor::reshape(tensor::matmul(v, params.wv), {batch, lk, num_heads, dh}),
      1, 2);

  Tensor scores = tensor::scale(tensor::matmul(qh, tensor::transpose(kh, 2, 3)),
                                1.0 / std::sqrt(static_cast<double>(dh)));
  if (mask.defined()) scores = tensor::add(scores, mask);
  Tensor attn = tensor::softmax(scores);
  if (attn_out) *attn_out = attn;

  Tensor ctx = tensor::reshape(tensor::transpose(tensor::matmul(attn, vh), 1, 2),
                               {batch, lq, d});
  return tensor::matmul(ctx, params.wo);
}

Tensor encoder_forward(const std::vector<tok::TokenSeq>& src_ids,
                       const TransformerParams& params,
                       const ModelConfig& config, const Dropout& dropout) {
  Tensor x = embed_with_positions(params.src_embed, src_ids, config,
                                  "encoder_forward", dropout);
  const std::size_t len = src_ids[0].size();
  Tensor mask = attention_mask(src_ids, len, config.num_heads, false);
  for (const auto& layer : params.encoder) {
    Tensor attn =
        multi_head_attention(x, x, x, mask, layer.self_attn, config.num_heads);
    x = sublayer_norm(x, attn, layer.norm1, dropout);
    Tensor ff = feed_forward(x, layer.ffn);
    x = sublayer_norm(x, ff, layer.norm2, dropout);
  }
  return x;
}

DecoderMasks make_decoder_masks(const std::vector<tok::TokenSeq>& tgt_ids,
                                const std::vector<tok::TokenSeq>& src_ids,
                                std::size_t num_heads) {
  const std::size_t tgt_len = common_length(tgt_ids, "make_decoder_masks");
  DecoderMasks masks;
  masks.self_mask = attention_mask(tgt_ids, tgt_len, num_heads, true);
  masks.cross_mask = attention_mask(src_ids, tgt_len, num_heads, false);
  return masks;
}

Tensor decoder_forward(const std::vector<tok::TokenSeq>& tgt_ids,
                       const Tensor& memory, const DecoderMasks& masks,
                       const TransformerParams& params,
                       const ModelConfig& config, const Dropout& dropout) {
  if (memory.shape().size() != 3 || memory.shape()[0] != tgt_ids.size() ||
      memory.shape()[2] != config.d_model) {
    throw DimensionError("decoder memory shape " + shape_str(memory.shape()) +
                         " does not match batch of " +
                         std::to_string(tgt_ids.size()) + " and d_model " +
                         std::to_string(config.d_model));
  }
  Tensor x = embed_with_positions(params.tgt_embed, tgt_ids, config,
                                  "decoder_forward", dropout);
  for (const auto& layer : params.decoder) {
    Tensor self_attn = multi_head_attention(x, x, x, masks.self_mask,
                                            layer.self_attn, config.num_heads);
    x = sublayer_norm(x, self_attn, layer.norm1, dropout);
    Tensor cross = multi_head_attention(x, memory, memory, masks.cross_mask,
                                        layer.cross_attn, config.num_heads);
    x = sublayer_norm(x, cross, layer.norm2, dropout);
    Tensor ff = feed_forward(x, layer.ffn);
    x = sublayer_norm(x, ff, layer.norm3, dropout);
  }
  return tensor::add(tensor::matmul(x, params.out_proj), params.out_bias);
}

}  // namespace nmt::model
