#include "nmt/infer/translator.hpp"

#include <cmath>

#include "nmt/error.hpp"
#include "nmt/tensor/tensor.hpp"
#include "nmt/unicode.hpp"

namespace nmt::infer {

using model::ModelConfig;
using model::TransformerParams;
using tensor::Tensor;

TokenMode parse_token_mode(const std::string& s) {
  if (s == "word") return TokenMode::word;
  if (s == "subword") return TokenMode::subword;
  throw DataError("unknown tokenization mode '" + s +
                  "' (expected word|subword)");
}

std::string token_mode_name(TokenMode m) {
  return m == TokenMode::word ? "word" : "subword";
}

Hypothesis greedy_from_scorer(
    const std::function<std::vector<double>(const tok::TokenSeq&)>& scorer,
    std::size_t max_new_tokens) {
  Hypothesis hyp;
  hyp.ids.push_back(tok::kBos);
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    const std::vector<double> logits = scorer(hyp.ids);
    if (logits.empty()) throw DataError("scorer returned an empty logit row");
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (logits[j] > logits[best]) best = j;  // strict: ties keep lowest id
    }
    // log-softmax of the chosen position
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    hyp.score += logits[best] - mx - std::log(sum);
    hyp.ids.push_back(static_cast<tok::TokenId>(best));
    if (static_cast<tok::TokenId>(best) == tok::kEos) break;
  }
  return hyp;
}

Hypothesis greedy_decode(const tok::TokenSeq& src_ids,
                         const TransformerParams& params,
                         const ModelConfig& config,
                         std::size_t max_new_tokens) {
  if (max_new_tokens == 0) max_new_tokens = 2 * src_ids.size() + 10;
  // The decoder prefix holds BOS plus the emitted tokens.
  max_new_tokens = std::min(max_new_tokens, config.max_len - 1);

  const std::vector<tok::TokenSeq> src_batch{src_ids};
  Tensor memory = model::encoder_forward(src_batch, params, config);

  auto scorer = [&](const tok::TokenSeq& prefix) {
    const std::vector<tok::TokenSeq> tgt_batch{prefix};
    auto masks =
        model::make_decoder_masks(tgt_batch, src_batch, config.num_heads);
    Tensor logits = model::decoder_forward(tgt_batch, memory, masks, params,
                                           config);
    const std::size_t v = config.tgt_vocab_size;
    const std::size_t last = (prefix.size() - 1) * v;
    const auto& lv = logits.values();
    return std::vector<double>(lv.begin() + last, lv.begin() + last + v);
  };
  return greedy_from_scorer(scorer, max_new_tokens);
}

ModelArtifacts load_artifacts(const std::string& checkpoint_path,
                              const std::string& src_vocab_path,
                              const std::string& tgt_vocab_path,
                              const std::string& src_merges_path,
                              const std::string& tgt_merges_path,
                              TokenMode mode) {
  ModelArtifacts art;
  art.mode = mode;
  train::TrainState state = train::load_checkpoint(checkpoint_path, &art.meta);
  art.params = std::move(state.params);
  art.params.set_requires_grad(false);

  auto check_hash = [&](const std::string& path, std::uint64_t expected,
                        const char* what) {
    if (expected == 0) return;  // not recorded
    const std::uint64_t actual = train::fnv1a_file(path);
    if (actual != expected) {
      throw DataError(std::string(what) + " file " + path +
                      " does not match the checkpoint fingerprint");
    }
  };
  art.src_vocab = tok::WordVocab::load(src_vocab_path);
  art.tgt_vocab = tok::WordVocab::load(tgt_vocab_path);
  check_hash(src_vocab_path, art.meta.src_vocab_hash, "source vocab");
  check_hash(tgt_vocab_path, art.meta.tgt_vocab_hash, "target vocab");
  if (mode == TokenMode::subword) {
    if (src_merges_path.empty() || tgt_merges_path.empty()) {
      throw DataError("subword mode requires source and target merge files");
    }
    art.src_merges = tok::MergeTable::load(src_merges_path);
    art.tgt_merges = tok::MergeTable::load(tgt_merges_path);
    check_hash(src_merges_path, art.meta.src_merges_hash, "source merges");
    check_hash(tgt_merges_path, art.meta.tgt_merges_hash, "target merges");
  }
  if (art.src_vocab.size() != art.params.config.src_vocab_size ||
      art.tgt_vocab.size() != art.params.config.tgt_vocab_size) {
    throw DataError("vocabulary sizes do not match the checkpoint model");
  }
  return art;
}

tok::TokenSeq encode_line(const std::string& cleaned_line,
                          const ModelArtifacts& artifacts) {
  if (artifacts.mode == TokenMode::word) {
    return tok::tokenize_words(cleaned_line, artifacts.src_vocab);
  }
  return tok::tokenize_subwords(cleaned_line, artifacts.src_merges,
                                artifacts.src_vocab);
}

std::string render_ids(const tok::TokenSeq& ids,
                       const ModelArtifacts& artifacts) {
  std::vector<std::string> tokens;
  for (tok::TokenId id : ids) {
    if (id == tok::kBos || id == tok::kEos || id == tok::kPad) continue;
    tokens.push_back(artifacts.tgt_vocab.token_of(id));
  }
  if (artifacts.mode == TokenMode::subword) return tok::decode_bpe(tokens);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string translate_line(const std::string& raw_line,
                           const ModelArtifacts& artifacts) {
  // same normalization the corpus loader applies to training text
  const std::string cleaned = corpus::clean_line(
      unicode::nfc_normalize(raw_line), artifacts.input_side);
  const tok::TokenSeq src = encode_line(cleaned, artifacts);
  Hypothesis hyp =
      greedy_decode(src, artifacts.params, artifacts.params.config);
  return render_ids(hyp.ids, artifacts);
}

void translate_file(const std::string& src_path, const std::string& out_path,
                    const ModelArtifacts& artifacts) {
  const auto lines = corpus::read_lines(src_path);
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& line : lines) {
    out.push_back(translate_line(line, artifacts));
  }
  corpus::write_lines(out_path, out);
}

}  // namespace nmt::infer
