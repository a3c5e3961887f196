#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "nmt/error.hpp"
#include "nmt/pipeline/pipeline.hpp"

using namespace nmt;
using corpus::Bitext;
using corpus::Origin;
using pipeline::BatchPlan;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
  auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Bitext numbered_pairs(std::size_t count, const std::string& prefix,
                      Origin origin = Origin::original) {
  Bitext b;
  b.name = prefix;
  for (std::size_t i = 0; i < count; ++i) {
    b.pairs.push_back({prefix + " s" + std::to_string(i),
                       prefix + " t" + std::to_string(i), origin});
  }
  return b;
}

std::set<std::string> pair_keys(const Bitext& b) {
  std::set<std::string> keys;
  for (const auto& p : b.pairs) keys.insert(p.source + "\x1f" + p.target);
  return keys;
}

}  // namespace

TEST_CASE("batch plan quotas reproduce the scaled protocol") {
  BatchPlan plan;
  plan.base = numbered_pairs(1200, "base");
  plan.scale = 1e-3;
  CHECK(plan.cumulative_quota(0) == 0);
  CHECK(plan.cumulative_quota(1) == 500);
  CHECK(plan.cumulative_quota(2) == 1500);
  CHECK(plan.cumulative_quota(3) == 2500);
  CHECK(plan.cumulative_quota(4) == 3000);
  CHECK_THROWS_AS(plan.cumulative_quota(5), DataError);
}

TEST_CASE("assemble_batch totals, nesting and determinism at scale 1e-3") {
  BatchPlan plan;
  plan.base = numbered_pairs(1200, "base");
  plan.scale = 1e-3;
  Bitext pool = numbered_pairs(3000, "syn", Origin::synthetic);

  const std::size_t expect_total[5] = {1200, 1700, 2700, 3700, 4200};
  std::vector<std::set<std::string>> keys_at_level;
  for (std::size_t level = 0; level <= 4; ++level) {
    Bitext assembled = pipeline::assemble_batch(plan, pool, level, 7);
    CHECK(assembled.size() == expect_total[level]);
    keys_at_level.push_back(pair_keys(assembled));
  }
  for (std::size_t level = 0; level < 4; ++level) {
    CHECK(std::includes(keys_at_level[level + 1].begin(),
                        keys_at_level[level + 1].end(),
                        keys_at_level[level].begin(),
                        keys_at_level[level].end()));
  }

  // level 0 returns the base unchanged, in order
  Bitext level0 = pipeline::assemble_batch(plan, pool, 0, 7);
  CHECK(level0.pairs == plan.base.pairs);

  // deterministic by seed
  Bitext a = pipeline::assemble_batch(plan, pool, 2, 9);
  Bitext b = pipeline::assemble_batch(plan, pool, 2, 9);
  CHECK(a.pairs == b.pairs);

  // increments are contiguous pool slices: level 1 contains exactly the
  // first 500 synthetic pairs
  std::size_t synthetic_seen = 0;
  auto level1_keys = keys_at_level[1];
  for (std::size_t i = 0; i < 500; ++i) {
    const auto& p = pool.pairs[i];
    synthetic_seen += level1_keys.count(p.source + "\x1f" + p.target);
  }
  CHECK(synthetic_seen == 500);
}

TEST_CASE("assemble_batch names the shortfall when the pool is small") {
  BatchPlan plan;
  plan.base = numbered_pairs(10, "base");
  plan.scale = 1e-3;
  Bitext pool = numbered_pairs(400, "syn", Origin::synthetic);
  CHECK_THROWS_WITH_AS(pipeline::assemble_batch(plan, pool, 1, 1),
                       doctest::Contains("short by 100"), DataError);
}

TEST_CASE("split_test_set by source-side vocabulary coverage") {
  Bitext train;
  train.pairs = {{"ba da", "ad ab", Origin::original},
                 {"da ga", "ag ad", Origin::original}};
  auto vocab = tok::build_word_vocab({"ba da", "da ga"}, 10);

  Bitext test;
  test.pairs = {{"ba ga", "ag ab", Origin::original},     // covered
                {"ba zz", "zz ab", Origin::original},     // zz is OOV
                {"da", "ad", Origin::original}};          // covered
  auto split = pipeline::split_test_set(test, vocab);
  CHECK(split.set2.size() == 3);
  REQUIRE(split.set1.size() == 2);
  CHECK(split.set1.pairs[0].source == "ba ga");
  CHECK(split.set1.pairs[1].source == "da");

  // full coverage: set1 == set2
  auto covering = pipeline::split_test_set(
      Bitext{"", {{"ba da", "x", Origin::original}}}, vocab);
  CHECK(covering.set1.size() == covering.set2.size());

  // specials-only vocabulary: nothing qualifies
  tok::WordVocab empty_vocab;
  auto none = pipeline::split_test_set(test, empty_vocab);
  CHECK(none.set1.empty());

  // target side: second pair's target has OOV zz too
  auto tgt_vocab = tok::build_word_vocab({"ad ab ag"}, 10);
  auto by_target = pipeline::split_test_set(test, tgt_vocab,
                                            pipeline::SplitSide::target);
  CHECK(by_target.set1.size() == 2);
}

TEST_CASE("key-value config parsing") {
  auto cfg = pipeline::KeyValueConfig::from_string(
      "# comment\n"
      "model.d_model = 32\n"
      "train.lr_scale = 0.5  # trailing comment\n"
      "plan.increments = 10,20,30\n"
      "name = toy run\n");
  CHECK(cfg.get_int("model.d_model", 0) == 32);
  CHECK(cfg.get_real("train.lr_scale", 0) == 0.5);
  CHECK(cfg.get("name", "") == "toy run");
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(pipeline::KeyValueConfig::from_string("novalue\n"),
                  DataError);
  CHECK_THROWS_AS(cfg.get_int("name", 0), DataError);

  auto m = pipeline::model_config_from(cfg);
  CHECK(m.d_model == 32);
  CHECK(m.d_ff == 128);  // defaults to 4x d_model
  auto incs = pipeline::increments_from(cfg);
  CHECK(incs == std::vector<std::size_t>{10, 20, 30});
}

TEST_CASE("results file: schema header, round trip, advisory append") {
  auto dir = temp_dir("nmt_results_test");
  pipeline::ResultsFile results((dir / "results.csv").string());
  CHECK(results.rows().empty());

  pipeline::ExperimentRow row;
  row.model_id = 3;
  row.tokenization = "word";
  row.batch_level = 2;
  row.status = "ok";
  row.bleu_set1 = 0.25;
  row.ribes_set1 = 0.5;
  row.bleu_set2 = 0.125;
  row.ribes_set2 = 0.25;
  row.seed = 99;
  row.train_pairs = 1700;
  row.src_vocab_hash = "abc";
  row.tgt_vocab_hash = "def";
  row.checkpoint_fp = "0123";
  results.append(row);

  pipeline::ExperimentRow failed;
  failed.model_id = 4;
  failed.tokenization = "subword";
  failed.batch_level = 3;
  failed.status = "failed";
  failed.error = "boom, with a comma\nand newline";
  results.append(failed);

  auto rows = results.rows();
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model_id == 3);
  CHECK(rows[0].bleu_set1 == 0.25);
  CHECK(rows[0].train_pairs == 1700);
  CHECK(rows[1].status == "failed");
  CHECK(rows[1].error.find(',') == std::string::npos);

  auto lines = corpus::read_lines((dir / "results.csv").string());
  CHECK(lines[0] == "#nmt-results-v1");

  // tables render without throwing and carry the batch labels
  auto tables = pipeline::format_tables(rows);
  CHECK(tables.find("Transformer with Batch 2") != std::string::npos);
  CHECK(tables.find("25.00") != std::string::npos);  // BLEU x100
}

TEST_CASE("backtranslate pairs cleaned monolingual lines with translations") {
  auto dir = temp_dir("nmt_bt_test");
  // Reverse model: target-language text in, source-language text out. A
  // fresh random micro model suffices to exercise the contract.
  auto bitext = fixtures::overfit_corpus();
  auto tgt_side = fixtures::corpus_side(bitext, false);  // english-ish
  auto src_side = fixtures::corpus_side(bitext, true);
  auto rev_src_vocab = tok::build_word_vocab(tgt_side, 50);  // reads targets
  auto rev_tgt_vocab = tok::build_word_vocab(src_side, 50);

  infer::ModelArtifacts reverse;
  reverse.params = model::init_params(
      fixtures::micro_model_config(rev_src_vocab.size(), rev_tgt_vocab.size()),
      5);
  reverse.params.set_requires_grad(false);
  reverse.src_vocab = rev_src_vocab;
  reverse.tgt_vocab = rev_tgt_vocab;
  reverse.mode = infer::TokenMode::word;
  reverse.input_side = corpus::Side::target;

  const std::string mono = (dir / "mono.txt").string();
  corpus::write_lines(mono, {"Ar Ek, Ti!", "om om", "it ar", "ek ti om"});

  Bitext synthetic = pipeline::backtranslate(mono, reverse, 10);
  REQUIRE(synthetic.size() == 4);  // limit >= lines: all of them
  CHECK(synthetic.pairs[0].target == "ar ek ti");  // cleaned verbatim
  CHECK(synthetic.pairs[1].target == "om om");
  for (const auto& p : synthetic.pairs) {
    CHECK(p.origin == Origin::synthetic);
  }

  CHECK(pipeline::backtranslate(mono, reverse, 0).empty());
  CHECK(pipeline::backtranslate(mono, reverse, 2).size() == 2);
}

TEST_CASE("tokenize_bitext drops pairs over max_len") {
  Bitext b;
  b.pairs = {{"ba", "ab", Origin::original},
             {"ba da ga la ma sa", "as am al ag ad ab", Origin::original}};
  auto vocab = tok::build_word_vocab({"ba da ga la ma sa ab as am al ag ad"},
                                     50);
  std::size_t dropped = 0;
  auto data = pipeline::tokenize_bitext(b, infer::TokenMode::word, vocab,
                                        vocab, {}, {}, 5, &dropped);
  CHECK(data.size() == 1);
  CHECK(dropped == 1);
}

TEST_CASE("full grid enumerates the ten configurations") {
  auto grid = pipeline::full_grid(fixtures::micro_model_config(8, 8),
                                   fixtures::overfit_train_config(), 100, 50,
                                   123);
  REQUIRE(grid.size() == 10);
  for (int i = 0; i < 5; ++i) {
    CHECK(grid[static_cast<std::size_t>(i)].model_id == i + 1);
    CHECK(grid[static_cast<std::size_t>(i)].tokenization ==
          infer::TokenMode::word);
    CHECK(grid[static_cast<std::size_t>(i)].batch_level ==
          static_cast<std::size_t>(i));
  }
  for (int i = 5; i < 10; ++i) {
    CHECK(grid[static_cast<std::size_t>(i)].model_id == i + 1);
    CHECK(grid[static_cast<std::size_t>(i)].tokenization ==
          infer::TokenMode::subword);
    CHECK(grid[static_cast<std::size_t>(i)].batch_level ==
          static_cast<std::size_t>(i - 5));
  }
  std::set<std::uint64_t> seeds;
  for (const auto& cfg : grid) seeds.insert(cfg.seed);
  CHECK(seeds.size() == 10);
}

TEST_CASE("run_experiment rejects synthetic leakage into held-out sets") {
  pipeline::ExperimentData data;
  data.train_base = numbered_pairs(20, "base");
  data.dev = numbered_pairs(4, "dev");
  data.test = numbered_pairs(4, "test");
  data.synthetic_pool = numbered_pairs(10, "syn", Origin::synthetic);
  // contaminate: copy a test pair into the pool
  data.synthetic_pool.pairs.push_back(data.test.pairs[0]);
  auto dir = temp_dir("nmt_leak_test");
  CHECK_THROWS_WITH_AS(
      pipeline::run_experiment({}, data, (dir / "w").string(),
                               (dir / "r.csv").string()),
      doctest::Contains("leak"), DataError);
}

TEST_CASE("a failing row is recorded and the grid continues") {
  auto dir = temp_dir("nmt_rowfail_test");
  pipeline::ExperimentData data;
  data.train_base = fixtures::toy_language(40, 321);
  data.dev = fixtures::toy_language(6, 321, 1000);
  data.test = fixtures::toy_language(6, 321, 2000);
  data.synthetic_pool = fixtures::toy_language(10, 321, 3000);
  for (auto& p : data.synthetic_pool.pairs) {
    p.origin = corpus::Origin::synthetic;
  }
  data.increments = {8, 8, 8, 8};
  data.scale = 1.0;

  auto tcfg = fixtures::overfit_train_config(1);
  tcfg.max_steps = 2;
  tcfg.micro_batch_size = 8;
  tcfg.effective_batch_size = 8;
  tcfg.eval_every = 0;
  auto grid = pipeline::full_grid(fixtures::micro_model_config(4, 4), tcfg,
                                   60, 20, 1);
  // keep one healthy row and one that must fail (level 2 wants 16 synthetic
  // pairs from a 10-pair pool)
  std::vector<pipeline::ExperimentConfig> two{grid[0], grid[2]};
  auto rows = pipeline::run_experiment(two, data, (dir / "w").string(),
                                       (dir / "r.csv").string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status == "ok");
  CHECK(rows[1].status == "failed");
  CHECK(rows[1].error.find("short by") != std::string::npos);

  // the failed row is retried on the next invocation
  auto rows2 = pipeline::run_experiment(two, data, (dir / "w").string(),
                                        (dir / "r.csv").string());
  CHECK(rows2.size() == 3);  // ok row skipped, failed row appended again

  // a row rerun from scratch reproduces its scores and artifacts exactly
  auto rows3 = pipeline::run_experiment({grid[0]}, data, (dir / "w2").string(),
                                        (dir / "r3.csv").string());
  REQUIRE(rows3.size() == 1);
  CHECK(rows3[0].bleu_set2 == rows[0].bleu_set2);
  CHECK(rows3[0].ribes_set2 == rows[0].ribes_set2);
  CHECK(rows3[0].src_vocab_hash == rows[0].src_vocab_hash);
  CHECK(rows3[0].checkpoint_fp == rows[0].checkpoint_fp);
}

TEST_CASE("empty grid yields an empty results table") {
  pipeline::ExperimentData data;
  data.train_base = numbered_pairs(20, "base");
  data.dev = numbered_pairs(4, "dev");
  data.test = numbered_pairs(4, "test");
  data.synthetic_pool = numbered_pairs(10, "syn", Origin::synthetic);
  auto dir = temp_dir("nmt_emptygrid_test");
  auto rows = pipeline::run_experiment({}, data, (dir / "w").string(),
                                       (dir / "r.csv").string());
  CHECK(rows.empty());
}
