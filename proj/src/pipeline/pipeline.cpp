#include "nmt/pipeline/pipeline.hpp"

#include <cmath>
#include <unordered_set>

#include "nmt/error.hpp"
#include "nmt/rng.hpp"

namespace nmt::pipeline {

std::size_t BatchPlan::scaled_increment(std::size_t i) const {
  if (i >= increments.size()) {
    throw DataError("batch plan has " + std::to_string(increments.size()) +
                    " increments, asked for " + std::to_string(i));
  }
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(increments[i]) * scale));
}

std::size_t BatchPlan::cumulative_quota(std::size_t level) const {
  if (level > increments.size()) {
    throw DataError("batch level " + std::to_string(level) +
                    " exceeds the plan's " +
                    std::to_string(increments.size()) + " batches");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < level; ++i) total += scaled_increment(i);
  return total;
}

corpus::Bitext assemble_batch(const BatchPlan& plan,
                              const corpus::Bitext& synthetic_pool,
                              std::size_t level, std::uint64_t seed) {
  const std::size_t quota = plan.cumulative_quota(level);
  if (level == 0) return plan.base;
  if (synthetic_pool.size() < quota) {
    throw DataError("synthetic pool holds " +
                    std::to_string(synthetic_pool.size()) +
                    " pairs but level " + std::to_string(level) + " needs " +
                    std::to_string(quota) + " (short by " +
                    std::to_string(quota - synthetic_pool.size()) + ")");
  }
  corpus::Bitext out;
  out.name = plan.base.name + "+batch" + std::to_string(level);
  out.pairs = plan.base.pairs;
  out.pairs.insert(out.pairs.end(), synthetic_pool.pairs.begin(),
                   synthetic_pool.pairs.begin() +
                       static_cast<std::ptrdiff_t>(quota));
  Rng rng(Rng::mix(seed, 0xa55e6b1eULL));
  rng.shuffle(out.pairs);
  return out;
}

corpus::Bitext backtranslate(const std::string& monolingual_target_path,
                             const infer::ModelArtifacts& reverse_model,
                             std::size_t limit) {
  const auto lines = corpus::read_lines(monolingual_target_path);
  const std::size_t count = std::min(limit, lines.size());
  corpus::Bitext out;
  out.name = "synthetic";
  out.pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // The reverse model reads target-language text; its own input cleaning
    // (Side::target) is exactly the pipeline's target-side cleaning, so the
    // pair's target equals the cleaned monolingual line verbatim.
    corpus::SentencePair pair;
    pair.target = corpus::clean_line(lines[i], corpus::Side::target);
    pair.source = infer::translate_line(lines[i], reverse_model);
    pair.origin = corpus::Origin::synthetic;
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

SplitSide parse_split_side(const std::string& s) {
  if (s == "source") return SplitSide::source;
  if (s == "target") return SplitSide::target;
  if (s == "both") return SplitSide::both;
  throw DataError("unknown split side '" + s +
                  "' (expected source|target|both)");
}

namespace {

bool all_in_vocab(const std::string& line, const tok::WordVocab& v) {
  for (const auto& token : corpus::split_whitespace(line)) {
    if (!v.contains(token)) return false;
  }
  return true;
}

}  // namespace

TestSplit split_test_set(const corpus::Bitext& test,
                         const tok::WordVocab& word_vocab, SplitSide side) {
  TestSplit split;
  split.set1.name = test.name + ".set1";
  split.set2 = test;
  split.set2.name = test.name + ".set2";
  for (const auto& pair : test.pairs) {
    bool keep = true;
    if (side == SplitSide::source || side == SplitSide::both) {
      keep = keep && all_in_vocab(pair.source, word_vocab) &&
             !pair.source.empty();
    }
    if (side == SplitSide::target || side == SplitSide::both) {
      keep = keep && all_in_vocab(pair.target, word_vocab) &&
             !pair.target.empty();
    }
    if (keep) split.set1.pairs.push_back(pair);
  }
  return split;
}

std::vector<train::TokenizedPair> tokenize_bitext(
    const corpus::Bitext& b, infer::TokenMode mode,
    const tok::WordVocab& src_vocab, const tok::WordVocab& tgt_vocab,
    const tok::MergeTable& src_merges, const tok::MergeTable& tgt_merges,
    std::size_t max_len, std::size_t* dropped) {
  std::vector<train::TokenizedPair> out;
  out.reserve(b.size());
  std::size_t skipped = 0;
  for (const auto& pair : b.pairs) {
    train::TokenizedPair tp;
    if (mode == infer::TokenMode::word) {
      tp.src = tok::tokenize_words(pair.source, src_vocab);
      tp.tgt = tok::tokenize_words(pair.target, tgt_vocab);
    } else {
      tp.src = tok::tokenize_subwords(pair.source, src_merges, src_vocab);
      tp.tgt = tok::tokenize_subwords(pair.target, tgt_merges, tgt_vocab);
    }
    if (tp.src.size() > max_len || tp.tgt.size() > max_len) {
      ++skipped;
      continue;
    }
    out.push_back(std::move(tp));
  }
  if (dropped) *dropped = skipped;
  return out;
}

model::ModelConfig model_config_from(const KeyValueConfig& cfg) {
  model::ModelConfig m;
  m.num_layers = static_cast<std::size_t>(cfg.get_int("model.num_layers", 6));
  m.d_model = static_cast<std::size_t>(cfg.get_int("model.d_model", 512));
  m.num_heads = static_cast<std::size_t>(cfg.get_int("model.num_heads", 8));
  m.d_ff = static_cast<std::size_t>(
      cfg.get_int("model.d_ff", static_cast<long>(4 * m.d_model)));
  m.max_len = static_cast<std::size_t>(cfg.get_int("model.max_len", 256));
  m.dropout_rate = cfg.get_real("model.dropout", 0.1);
  return m;
}

train::TrainConfig train_config_from(const KeyValueConfig& cfg) {
  train::TrainConfig t;
  t.micro_batch_size =
      static_cast<std::size_t>(cfg.get_int("train.micro_batch_size", 64));
  t.effective_batch_size = static_cast<std::size_t>(
      cfg.get_int("train.effective_batch_size", 384));
  t.max_steps = static_cast<std::size_t>(cfg.get_int("train.max_steps", 70000));
  t.lr_scale = cfg.get_real("train.lr_scale", 1.0);
  t.warmup_steps =
      static_cast<std::size_t>(cfg.get_int("train.warmup_steps", 4000));
  t.beta1 = cfg.get_real("train.beta1", 0.9);
  t.beta2 = cfg.get_real("train.beta2", 0.999);
  t.adam_eps = cfg.get_real("train.adam_eps", 1e-9);
  t.label_smoothing = cfg.get_real("train.label_smoothing", 0.0);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 1));
  t.checkpoint_every =
      static_cast<std::size_t>(cfg.get_int("train.checkpoint_every", 0));
  t.eval_every = static_cast<std::size_t>(cfg.get_int("train.eval_every", 500));
  t.patience = static_cast<std::size_t>(cfg.get_int("train.patience", 5));
  return t;
}

std::vector<std::size_t> increments_from(const KeyValueConfig& cfg) {
  const std::string text =
      cfg.get("plan.increments", "500000,1000000,1000000,500000");
  std::vector<std::size_t> out;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t comma = text.find(',', begin);
    if (comma == std::string::npos) comma = text.size();
    const std::string part = text.substr(begin, comma - begin);
    if (!part.empty()) {
      try {
        out.push_back(static_cast<std::size_t>(std::stoull(part)));
      } catch (const std::exception&) {
        throw DataError("plan.increments: '" + part + "' is not an integer");
      }
    }
    begin = comma + 1;
  }
  if (out.empty()) throw DataError("plan.increments is empty");
  return out;
}

}  // namespace nmt::pipeline
