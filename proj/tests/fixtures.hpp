// Deterministic toy corpora shared by the unit and acceptance suites.
#pragma once

#include <set>
#include <string>
#include <vector>

#include "nmt/corpus.hpp"
#include "nmt/model/transformer.hpp"
#include "nmt/rng.hpp"
#include "nmt/train/trainer.hpp"

namespace fixtures {

// Wordwise "cipher": every source word maps to its reversal and the target
// sentence reverses the word order. Learnable by a micro transformer and
// trivially checkable.
inline std::string flip_word(const std::string& w) {
  return std::string(w.rbegin(), w.rend());
}

inline std::string map_sentence(const std::string& src) {
  auto words = nmt::corpus::split_whitespace(src);
  std::string out;
  for (auto it = words.rbegin(); it != words.rend(); ++it) {
    if (!out.empty()) out.push_back(' ');
    out += flip_word(*it);
  }
  return out;
}

// 64 distinct 4-word sentences over {ra, ke, ti, mo}: every (a,b,c) triple
// followed by a again. Targets have 4 tokens, so 4-gram BLEU is defined.
inline nmt::corpus::Bitext overfit_corpus() {
  const std::vector<std::string> words = {"ra", "ke", "ti", "mo"};
  nmt::corpus::Bitext b;
  b.name = "overfit64";
  for (const auto& a : words) {
    for (const auto& c : words) {
      for (const auto& d : words) {
        const std::string src = a + " " + c + " " + d + " " + a;
        b.pairs.push_back({src, map_sentence(src),
                           nmt::corpus::Origin::original});
      }
    }
  }
  return b;
}

inline nmt::model::ModelConfig micro_model_config(std::size_t src_vocab,
                                                  std::size_t tgt_vocab) {
  nmt::model::ModelConfig m;
  m.num_layers = 2;
  m.d_model = 32;
  m.num_heads = 2;
  m.d_ff = 64;
  m.src_vocab_size = src_vocab;
  m.tgt_vocab_size = tgt_vocab;
  m.max_len = 24;
  m.dropout_rate = 0.0;
  return m;
}

inline nmt::train::TrainConfig overfit_train_config(std::uint64_t seed = 11) {
  nmt::train::TrainConfig t;
  t.micro_batch_size = 8;
  // Full-batch updates (8 accumulations over the 64 pairs) keep the loss
  // trajectory smooth enough for the moving-average trend check.
  t.effective_batch_size = 64;
  t.max_steps = 2000;
  // Noam peak at d_model 32, warmup 50 is 0.177/sqrt(50); the 0.25 scale
  // brings the peak to ~6e-3, where Adam memorizes the fixture quickly.
  t.lr_scale = 0.25;
  t.warmup_steps = 50;
  t.seed = seed;
  t.eval_every = 100;
  t.patience = 8;
  t.checkpoint_every = 0;
  return t;
}

// Distinct random sentences over a 30-word inventory, 3-7 words each.
// `offset` shifts the id stream so disjoint corpora can be drawn.
inline nmt::corpus::Bitext toy_language(std::size_t count, std::uint64_t seed,
                                        std::uint64_t offset = 0) {
  static const std::vector<std::string> inventory = {
      "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
      "ga", "ge", "gi", "go", "gu", "la", "le", "li", "lo", "lu",
      "ma", "me", "mi", "mo", "mu", "sa", "se", "si", "so", "su"};
  nmt::corpus::Bitext b;
  b.name = "toy";
  std::set<std::string> seen;
  std::uint64_t stream = offset;
  while (b.pairs.size() < count) {
    nmt::Rng rng(nmt::Rng::mix(seed, stream++));
    const std::size_t len = 3 + rng.below(5);
    std::string src;
    for (std::size_t w = 0; w < len; ++w) {
      if (w) src.push_back(' ');
      src += inventory[rng.below(inventory.size())];
    }
    if (!seen.insert(src).second) continue;
    b.pairs.push_back({src, map_sentence(src), nmt::corpus::Origin::original});
  }
  return b;
}

// Corpus for the out-of-vocabulary contrast: four sentence frames, each
// carrying one rare word (one occurrence corpus-wide) in third position.
// Capping the word vocabulary at 3 per side turns every rare word into UNK
// during word-level training, so the model learns to emit UNK there.
inline nmt::corpus::Bitext oov_corpus() {
  const std::vector<std::vector<std::string>> frames = {
      {"da", "ni", "po"}, {"ni", "po", "da"}, {"po", "da", "ni"},
      {"da", "po", "ni"}};
  // Rare words use only characters that also occur in the common words plus
  // x/z/u, so BPE can always segment novel test words.
  const std::vector<std::string> heads = {"xa", "xi", "xo", "xu",
                                          "za", "zi", "zo", "zu"};
  const std::vector<std::string> tails = {"d", "n", "p", "x",
                                          "z", "a", "i", "o"};
  nmt::corpus::Bitext b;
  b.name = "oov";
  for (std::size_t k = 0; k < 64; ++k) {
    const auto& f = frames[k % frames.size()];
    const std::string rare = heads[k % 8] + tails[k / 8];
    const std::string src = f[0] + " " + f[1] + " " + rare + " " + f[2];
    b.pairs.push_back({src, map_sentence(src), nmt::corpus::Origin::original});
  }
  return b;
}

// Test sentences whose third word never occurs in oov_corpus (but whose
// characters all do).
inline std::vector<std::string> oov_test_sources() {
  return {"da ni zux po", "ni po xiz da", "po da nuz ni"};
}

inline std::vector<std::string> corpus_side(const nmt::corpus::Bitext& b,
                                            bool source) {
  std::vector<std::string> lines;
  lines.reserve(b.size());
  for (const auto& p : b.pairs) lines.push_back(source ? p.source : p.target);
  return lines;
}

}  // namespace fixtures
