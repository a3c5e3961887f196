#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nmt/bpe.hpp"
#include "nmt/corpus.hpp"
#include "nmt/model/transformer.hpp"
#include "nmt/train/checkpoint.hpp"
#include "nmt/vocab.hpp"

namespace nmt::infer {

enum class TokenMode { word, subword };
TokenMode parse_token_mode(const std::string& s);
std::string token_mode_name(TokenMode m);

struct Hypothesis {
  tok::TokenSeq ids;  // starts with BOS; ends with EOS unless capped
  std::string text;   // detokenized rendering without specials
  double score = 0.0; // sum of log-probabilities of emitted tokens
};

// Greedy policy over an abstract next-token scorer: `scorer` maps the
// current target prefix (starting [BOS]) to a logit row over the target
// vocabulary. Appends the argmax (ties to the lowest token id) until EOS or
// until max_new_tokens have been emitted.
Hypothesis greedy_from_scorer(
    const std::function<std::vector<double>(const tok::TokenSeq&)>& scorer,
    std::size_t max_new_tokens);

// Greedy decoding of one source id sequence through the model.
// max_new_tokens 0 picks the default 2*src_len + 10, capped so the decoder
// prefix stays within config.max_len.
Hypothesis greedy_decode(const tok::TokenSeq& src_ids,
                         const model::TransformerParams& params,
                         const model::ModelConfig& config,
                         std::size_t max_new_tokens = 0);

// Everything needed to translate text in one direction.
struct ModelArtifacts {
  model::TransformerParams params;
  train::CheckpointMeta meta;
  tok::WordVocab src_vocab, tgt_vocab;
  tok::MergeTable src_merges, tgt_merges;
  TokenMode mode = TokenMode::word;
  // Cleaning applied to input lines. The forward (source->target) model
  // reads source-side text; a back-translation model reads target-side
  // (lowercased) text.
  corpus::Side input_side = corpus::Side::source;
};

// Loads a checkpoint plus its vocab/merge files, verifying every file hash
// against the checkpoint's recorded fingerprints (DataError on mismatch).
// Merge paths may be empty in word mode.
ModelArtifacts load_artifacts(const std::string& checkpoint_path,
                              const std::string& src_vocab_path,
                              const std::string& tgt_vocab_path,
                              const std::string& src_merges_path,
                              const std::string& tgt_merges_path,
                              TokenMode mode);

tok::TokenSeq encode_line(const std::string& cleaned_line,
                          const ModelArtifacts& artifacts);
std::string render_ids(const tok::TokenSeq& ids,
                       const ModelArtifacts& artifacts);

// Clean, tokenize, greedily decode, detokenize.
std::string translate_line(const std::string& raw_line,
                           const ModelArtifacts& artifacts);

// One output line per input line.
void translate_file(const std::string& src_path, const std::string& out_path,
                    const ModelArtifacts& artifacts);

}  // namespace nmt::infer
