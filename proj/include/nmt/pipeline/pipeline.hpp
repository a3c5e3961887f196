#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmt/bpe.hpp"
#include "nmt/corpus.hpp"
#include "nmt/infer/translator.hpp"
#include "nmt/model/transformer.hpp"
#include "nmt/pipeline/configfile.hpp"
#include "nmt/train/trainer.hpp"
#include "nmt/vocab.hpp"

namespace nmt::pipeline {

// Cumulative back-translation quotas. The default increments reproduce the
// batch protocol (0.5M, +1M, +1M, +0.5M on top of the original data); scale
// shrinks every quota proportionally for desk-scale runs.
struct BatchPlan {
  corpus::Bitext base;
  std::vector<std::size_t> increments = {500000, 1000000, 1000000, 500000};
  double scale = 1.0;

  std::size_t levels() const { return increments.size(); }
  std::size_t scaled_increment(std::size_t i) const;
  // Total synthetic pairs included at `level` (level 0 = none).
  std::size_t cumulative_quota(std::size_t level) const;
};

// base plus the first cumulative-quota synthetic pairs in pool order.
// Level 0 returns the base unchanged; higher levels are shuffled
// deterministically by seed. Throws DataError naming the shortfall when the
// pool is too small.
corpus::Bitext assemble_batch(const BatchPlan& plan,
                              const corpus::Bitext& synthetic_pool,
                              std::size_t level, std::uint64_t seed);

// Translates the first `limit` monolingual target-language lines with the
// reverse model and pairs each translation (source side) with the cleaned
// original line (target side). Every output pair is origin=synthetic.
corpus::Bitext backtranslate(const std::string& monolingual_target_path,
                             const infer::ModelArtifacts& reverse_model,
                             std::size_t limit);

enum class SplitSide { source, target, both };
SplitSide parse_split_side(const std::string& s);

struct TestSplit {
  corpus::Bitext set1;  // sentences fully covered by the word vocabulary
  corpus::Bitext set2;  // the complete test set
};

TestSplit split_test_set(const corpus::Bitext& test,
                         const tok::WordVocab& word_vocab,
                         SplitSide side = SplitSide::source);

// ---- experiment grid ---------------------------------------------------

struct ExperimentConfig {
  int model_id = 0;
  infer::TokenMode tokenization = infer::TokenMode::word;
  std::size_t batch_level = 0;
  model::ModelConfig model;  // vocab sizes are filled per row
  train::TrainConfig train;
  std::size_t vocab_max_size = 50000;
  std::size_t bpe_merges = 50000;
  std::uint64_t seed = 1;
};

// The ten-configuration grid: word-level rows 1-5 and subword rows 6-10,
// each over batch levels 0-4.
std::vector<ExperimentConfig> full_grid(const model::ModelConfig& model_tpl,
                                         const train::TrainConfig& train_tpl,
                                         std::size_t vocab_max_size,
                                         std::size_t bpe_merges,
                                         std::uint64_t seed);

struct ExperimentData {
  corpus::Bitext train_base, dev, test;
  corpus::Bitext synthetic_pool;
  std::vector<std::size_t> increments = {500000, 1000000, 1000000, 500000};
  double scale = 1.0;
};

struct ExperimentRow {
  int model_id = 0;
  std::string tokenization;
  std::size_t batch_level = 0;
  std::string status;  // ok | failed
  double bleu_set1 = 0.0, ribes_set1 = 0.0;
  double bleu_set2 = 0.0, ribes_set2 = 0.0;
  std::uint64_t seed = 0;
  std::size_t train_pairs = 0;
  std::string src_vocab_hash, tgt_vocab_hash, checkpoint_fp;
  std::string error;
};

// Append-only CSV with a schema-version header; appends take an exclusive
// advisory lock so parallel grid processes interleave safely.
class ResultsFile {
 public:
  explicit ResultsFile(std::string path) : path_(std::move(path)) {}
  std::vector<ExperimentRow> rows() const;
  void append(const ExperimentRow& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Runs every grid row that has no ok row in the results file yet: assemble
// data, build that row's vocab/merges, train, translate both test splits,
// score, append. A failing row is recorded and the grid continues. Returns
// the complete post-run row set.
std::vector<ExperimentRow> run_experiment(
    const std::vector<ExperimentConfig>& grid, const ExperimentData& data,
    const std::string& workdir, const std::string& results_path);

// Renders the results as the three familiar tables (word/subword on Set-1,
// final batch on Set-2). BLEU is printed x100.
std::string format_tables(const std::vector<ExperimentRow>& rows);

// Config-file bindings (keys documented in the README).
model::ModelConfig model_config_from(const KeyValueConfig& cfg);
train::TrainConfig train_config_from(const KeyValueConfig& cfg);
std::vector<std::size_t> increments_from(const KeyValueConfig& cfg);

// Tokenizes a bitext for training. Pairs whose either side exceeds max_len
// ids are dropped; `dropped` (optional) receives the count.
std::vector<train::TokenizedPair> tokenize_bitext(
    const corpus::Bitext& b, infer::TokenMode mode,
    const tok::WordVocab& src_vocab, const tok::WordVocab& tgt_vocab,
    const tok::MergeTable& src_merges, const tok::MergeTable& tgt_merges,
    std::size_t max_len, std::size_t* dropped = nullptr);

}  // namespace nmt::pipeline
