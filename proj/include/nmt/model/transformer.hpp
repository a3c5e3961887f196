#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmt/rng.hpp"
#include "nmt/tensor/tensor.hpp"
#include "nmt/vocab.hpp"

namespace nmt::model {

struct ModelConfig {
  std::size_t num_layers = 6;
  std::size_t d_model = 512;
  std::size_t num_heads = 8;
  std::size_t d_ff = 2048;  // 4 x d_model throughout
  std::size_t src_vocab_size = 0;
  std::size_t tgt_vocab_size = 0;
  std::size_t max_len = 256;
  double dropout_rate = 0.1;

  std::size_t head_dim() const { return d_model / num_heads; }
  void validate() const;

  // Closed-form learnable parameter count for this configuration.
  std::size_t param_count() const;

  bool operator==(const ModelConfig&) const = default;
};

struct AttentionParams {
  tensor::Tensor wq, wk, wv, wo;  // each [d_model, d_model]
};

struct NormParams {
  tensor::Tensor gain, bias;  // each [d_model]
};

struct FeedForwardParams {
  tensor::Tensor w1, b1, w2, b2;  // [d,ff], [ff], [ff,d], [d]
};

struct EncoderLayerParams {
  AttentionParams self_attn;
  NormParams norm1;
  FeedForwardParams ffn;
  NormParams norm2;
};

struct DecoderLayerParams {
  AttentionParams self_attn;
  NormParams norm1;
  AttentionParams cross_attn;
  NormParams norm2;
  FeedForwardParams ffn;
  NormParams norm3;
};

// A named view over one learnable tensor. Embedding tables get the lazy
// row-sparse optimizer treatment.
struct NamedParam {
  std::string name;
  tensor::Tensor tensor;
  bool embedding_rows = false;
};

struct TransformerParams {
  ModelConfig config;
  tensor::Tensor src_embed, tgt_embed;  // [V, d_model]
  std::vector<EncoderLayerParams> encoder;
  std::vector<DecoderLayerParams> decoder;
  tensor::Tensor out_proj;  // [d_model, tgt_vocab]
  tensor::Tensor out_bias;  // [tgt_vocab]

  // Stable enumeration shared by the optimizer and the checkpoint format.
  std::vector<NamedParam> named() const;
  void set_requires_grad(bool v);
  void zero_grad();
  std::size_t total_elements() const;
};

// Deterministic Glorot-uniform initialization; layer-norm gains 1, biases 0.
TransformerParams init_params(const ModelConfig& config, std::uint64_t seed);

// Sinusoidal table: dim 2i holds sin(pos / 10000^(2i/d)), dim 2i+1 the cos
// of the same argument. Throws on odd d_model.
tensor::Tensor positional_encoding(std::size_t max_len, std::size_t d_model);

// [len, len]: 0 at or below the diagonal, -inf strictly above.
tensor::Tensor causal_mask(std::size_t len);

// [batch, len]: -inf at PAD key positions, 0 elsewhere. Rows must share a
// common padded length.
tensor::Tensor padding_mask(const std::vector<tok::TokenSeq>& ids);

// Materialized additive mask [batch, heads, query_len, key_len] combining
// optional causality with PAD-key masking. Returns an undefined tensor when
// nothing would be masked.
tensor::Tensor attention_mask(const std::vector<tok::TokenSeq>& key_ids,
                              std::size_t query_len, std::size_t num_heads,
                              bool causal);

// Optional training-time context. Inactive (deterministic) by default.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

// Scaled dot-product attention over num_heads subspaces; heads are
// projected, attended, concatenated and projected back. `mask` may be
// undefined, [Lq, Lk], or [B, H, Lq, Lk]. When `attn_out` is given it
// receives the post-softmax attention weights [B, H, Lq, Lk].
tensor::Tensor multi_head_attention(const tensor::Tensor& q,
                                    const tensor::Tensor& k,
                                    const tensor::Tensor& v,
                                    const tensor::Tensor& mask,
                                    const AttentionParams& params,
                                    std::size_t num_heads,
                                    tensor::Tensor* attn_out = nullptr);

// Embeds, adds positions, then num_layers x [self-attention, feed-forward]
// sublayers, each residual + post-norm. Returns [batch, src_len, d_model].
tensor::Tensor encoder_forward(const std::vector<tok::TokenSeq>& src_ids,
                               const TransformerParams& params,
                               const ModelConfig& config,
                               const Dropout& dropout = {});

struct DecoderMasks {
  tensor::Tensor self_mask;   // causal + tgt PAD keys
  tensor::Tensor cross_mask;  // src PAD keys
};

DecoderMasks make_decoder_masks(const std::vector<tok::TokenSeq>& tgt_ids,
                                const std::vector<tok::TokenSeq>& src_ids,
                                std::size_t num_heads);

// Masked self-attention, encoder-decoder cross-attention and feed-forward
// per layer, then the output projection. Returns logits
// [batch, tgt_len, tgt_vocab_size].
tensor::Tensor decoder_forward(const std::vector<tok::TokenSeq>& tgt_ids,
                               const tensor::Tensor& memory,
                               const DecoderMasks& masks,
                               const TransformerParams& params,
                               const ModelConfig& config,
                               const Dropout& dropout = {});

}  // namespace nmt::model
