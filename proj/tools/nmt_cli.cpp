// Command-line front end for the translation toolkit.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "nmt/bpe.hpp"
#include "nmt/corpus.hpp"
#include "nmt/error.hpp"
#include "nmt/infer/translator.hpp"
#include "nmt/metrics/metrics.hpp"
#include "nmt/pipeline/configfile.hpp"
#include "nmt/pipeline/pipeline.hpp"
#include "nmt/tensor/tensor.hpp"
#include "nmt/train/checkpoint.hpp"
#include "nmt/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace nmt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

struct GlobalOpts {
  std::string config_path;
  std::string precision = "f64";
  double scale = -1.0;   // <0: take from config / default
  long seed = -1;        // <0: take from config / default
};

pipeline::KeyValueConfig load_config(const GlobalOpts& g) {
  if (g.config_path.empty()) return {};
  return pipeline::KeyValueConfig::load(g.config_path);
}

std::uint64_t effective_seed(const GlobalOpts& g,
                             const pipeline::KeyValueConfig& cfg) {
  if (g.seed >= 0) return static_cast<std::uint64_t>(g.seed);
  return static_cast<std::uint64_t>(cfg.get_int("experiment.seed", 1));
}

infer::ModelArtifacts load_model_artifacts(const std::string& checkpoint,
                                           const std::string& src_vocab,
                                           const std::string& tgt_vocab,
                                           const std::string& src_merges,
                                           const std::string& tgt_merges,
                                           const std::string& mode,
                                           const std::string& clean_side) {
  auto artifacts = infer::load_artifacts(checkpoint, src_vocab, tgt_vocab,
                                         src_merges, tgt_merges,
                                         infer::parse_token_mode(mode));
  artifacts.input_side =
      clean_side == "target" ? corpus::Side::target : corpus::Side::source;
  return artifacts;
}

void cmd_preprocess(const std::string& src_in, const std::string& tgt_in,
                    const std::string& src_out, const std::string& tgt_out) {
  corpus::Bitext raw = corpus::load_bitext(src_in, tgt_in);
  corpus::Bitext cleaned = corpus::clean_bitext(raw);
  corpus::Bitext unique = corpus::dedup_pairs(cleaned);
  corpus::save_bitext(unique, src_out, tgt_out);
  std::cout << "loaded " << raw.size() << " pairs, " << cleaned.size()
            << " after cleaning, " << unique.size() << " after dedup\n";
}

void cmd_train(const GlobalOpts& g, const std::string& train_src,
               const std::string& train_tgt, const std::string& dev_src,
               const std::string& dev_tgt, const std::string& mode_name,
               const std::string& src_vocab_path,
               const std::string& tgt_vocab_path,
               const std::string& src_merges_path,
               const std::string& tgt_merges_path, const std::string& out_dir,
               bool resume) {
  auto cfg = load_config(g);
  auto mode = infer::parse_token_mode(mode_name);
  auto mcfg = pipeline::model_config_from(cfg);
  auto tcfg = pipeline::train_config_from(cfg);
  if (g.seed >= 0) tcfg.seed = static_cast<std::uint64_t>(g.seed);

  auto src_vocab = tok::WordVocab::load(src_vocab_path);
  auto tgt_vocab = tok::WordVocab::load(tgt_vocab_path);
  tok::MergeTable src_merges, tgt_merges;
  if (mode == infer::TokenMode::subword) {
    if (src_merges_path.empty() || tgt_merges_path.empty()) {
      throw DataError("subword mode requires --src-merges and --tgt-merges");
    }
    src_merges = tok::MergeTable::load(src_merges_path);
    tgt_merges = tok::MergeTable::load(tgt_merges_path);
  }
  mcfg.src_vocab_size = src_vocab.size();
  mcfg.tgt_vocab_size = tgt_vocab.size();
  mcfg.validate();

  corpus::Bitext train_bitext = corpus::load_bitext(train_src, train_tgt);
  corpus::Bitext dev_bitext;
  if (!dev_src.empty()) dev_bitext = corpus::load_bitext(dev_src, dev_tgt);

  std::size_t dropped = 0;
  auto train_data =
      pipeline::tokenize_bitext(train_bitext, mode, src_vocab, tgt_vocab,
                                src_merges, tgt_merges, mcfg.max_len, &dropped);
  std::vector<train::TokenizedPair> dev_data;
  if (!dev_bitext.empty()) {
    dev_data = pipeline::tokenize_bitext(dev_bitext, mode, src_vocab,
                                         tgt_vocab, src_merges, tgt_merges,
                                         mcfg.max_len);
  }
  if (dropped > 0) {
    std::cerr << "dropped " << dropped << " pairs over max_len\n";
  }

  fs::create_directories(out_dir);
  const std::string ckpt_path = out_dir + "/checkpoint.bin";

  train::CheckpointMeta meta;
  meta.config_fingerprint = train::config_fingerprint(mcfg);
  meta.src_vocab_hash = train::fnv1a_file(src_vocab_path);
  meta.tgt_vocab_hash = train::fnv1a_file(tgt_vocab_path);
  if (mode == infer::TokenMode::subword) {
    meta.src_merges_hash = train::fnv1a_file(src_merges_path);
    meta.tgt_merges_hash = train::fnv1a_file(tgt_merges_path);
  }
  meta.seed = tcfg.seed;

  train::TrainState state;
  if (resume && fs::exists(ckpt_path)) {
    state = train::load_checkpoint(ckpt_path, nullptr, &mcfg);
    std::cout << "resuming from step " << state.steps_done << "\n";
  } else {
    state.params = model::init_params(mcfg, tcfg.seed);
    state.opt = train::OptimizerState::for_params(state.params);
  }

  auto save_hook = [&](const train::TrainState& st, const std::string& tag) {
    const std::string path = tag == "diagnostic"
                                 ? out_dir + "/checkpoint.diagnostic.bin"
                                 : ckpt_path;
    train::save_checkpoint(path, st, meta);
  };
  train::TrainResult result =
      train::train(state, train_data, dev_data, tcfg, save_hook);
  train::save_checkpoint(ckpt_path, state, meta);
  train::write_history(out_dir + "/history.csv", result.history);
  std::cout << "trained " << result.steps_done << " steps, final loss "
            << result.final_train_loss
            << (result.early_stopped ? " (early stop)" : "") << "\n";
}

void cmd_backtranslate(const std::string& mono, const std::string& checkpoint,
                       const std::string& src_vocab,
                       const std::string& tgt_vocab,
                       const std::string& src_merges,
                       const std::string& tgt_merges, const std::string& mode,
                       std::size_t limit, const std::string& out_src,
                       const std::string& out_tgt) {
  // The reverse model consumes target-language text.
  auto artifacts = load_model_artifacts(checkpoint, src_vocab, tgt_vocab,
                                        src_merges, tgt_merges, mode, "target");
  corpus::Bitext synthetic = pipeline::backtranslate(mono, artifacts, limit);
  corpus::save_bitext(synthetic, out_src, out_tgt);
  std::cout << "back-translated " << synthetic.size() << " pairs\n";
}

void cmd_assemble(const GlobalOpts& g, const std::string& base_src,
                  const std::string& base_tgt, const std::string& syn_src,
                  const std::string& syn_tgt, std::size_t level,
                  const std::string& increments_csv, const std::string& out_src,
                  const std::string& out_tgt) {
  auto cfg = load_config(g);
  pipeline::BatchPlan plan;
  plan.base = corpus::load_bitext(base_src, base_tgt);
  if (!increments_csv.empty()) {
    pipeline::KeyValueConfig tmp;
    tmp.set("plan.increments", increments_csv);
    plan.increments = pipeline::increments_from(tmp);
  } else {
    plan.increments = pipeline::increments_from(cfg);
  }
  plan.scale = g.scale >= 0 ? g.scale : cfg.get_real("plan.scale", 1.0);
  corpus::Bitext pool = corpus::load_bitext(syn_src, syn_tgt);
  corpus::Bitext out =
      pipeline::assemble_batch(plan, pool, level, effective_seed(g, cfg));
  corpus::save_bitext(out, out_src, out_tgt);
  std::cout << "assembled level " << level << ": " << out.size() << " pairs\n";
}

void cmd_split_test(const std::string& test_src, const std::string& test_tgt,
                    const std::string& vocab_path, const std::string& side,
                    const std::string& out_prefix) {
  corpus::Bitext test = corpus::load_bitext(test_src, test_tgt);
  auto vocab = tok::WordVocab::load(vocab_path);
  auto split =
      pipeline::split_test_set(test, vocab, pipeline::parse_split_side(side));
  corpus::save_bitext(split.set1, out_prefix + ".set1.src",
                      out_prefix + ".set1.tgt");
  corpus::save_bitext(split.set2, out_prefix + ".set2.src",
                      out_prefix + ".set2.tgt");
  std::cout << "set1: " << split.set1.size() << " sentences, set2: "
            << split.set2.size() << "\n";
}

void cmd_experiment(const GlobalOpts& g) {
  auto cfg = load_config(g);
  if (g.config_path.empty()) {
    throw DataError("experiment requires --config");
  }
  auto need = [&](const std::string& key) {
    std::string v = cfg.get(key, "");
    if (v.empty()) throw DataError("config is missing required key " + key);
    return v;
  };
  pipeline::ExperimentData data;
  data.train_base = corpus::load_bitext(need("data.train_src"),
                                        need("data.train_tgt"));
  data.dev = corpus::load_bitext(need("data.dev_src"), need("data.dev_tgt"));
  data.test = corpus::load_bitext(need("data.test_src"), need("data.test_tgt"));
  data.synthetic_pool = corpus::load_bitext(need("data.synthetic_src"),
                                            need("data.synthetic_tgt"));
  data.increments = pipeline::increments_from(cfg);
  data.scale = g.scale >= 0 ? g.scale : cfg.get_real("plan.scale", 1.0);

  auto grid = pipeline::full_grid(
      pipeline::model_config_from(cfg), pipeline::train_config_from(cfg),
      static_cast<std::size_t>(cfg.get_int("vocab.max_size", 50000)),
      static_cast<std::size_t>(cfg.get_int("bpe.num_merges", 50000)),
      effective_seed(g, cfg));
  const std::string workdir = cfg.get("experiment.workdir", "experiment-work");
  const std::string results =
      cfg.get("experiment.results", workdir + "/results.csv");
  auto rows = pipeline::run_experiment(grid, data, workdir, results);
  std::cout << pipeline::format_tables(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hindi-English transformer translation toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key-value configuration file");
  app.add_option("--precision", g.precision, "f32|f64 (default f64)");
  app.add_option("--scale", g.scale, "batch plan scale factor override");
  app.add_option("--seed", g.seed, "seed override for all randomness");

  // preprocess
  std::string src_in, tgt_in, src_out, tgt_out;
  auto* preprocess = app.add_subcommand(
      "preprocess", "clean and deduplicate a parallel corpus");
  preprocess->add_option("--src-in", src_in)->required();
  preprocess->add_option("--tgt-in", tgt_in)->required();
  preprocess->add_option("--src-out", src_out)->required();
  preprocess->add_option("--tgt-out", tgt_out)->required();

  // build-vocab
  std::string bv_input, bv_output;
  std::size_t bv_max = 50000;
  auto* build_vocab =
      app.add_subcommand("build-vocab", "frequency word vocabulary");
  build_vocab->add_option("--input", bv_input)->required();
  build_vocab->add_option("--output", bv_output)->required();
  build_vocab->add_option("--max-size", bv_max);

  // learn-bpe
  std::string lb_input, lb_output;
  std::size_t lb_merges = 50000;
  auto* learn_bpe = app.add_subcommand("learn-bpe", "learn BPE merge rules");
  learn_bpe->add_option("--input", lb_input)->required();
  learn_bpe->add_option("--output", lb_output)->required();
  learn_bpe->add_option("--num-merges", lb_merges);

  // apply-bpe
  std::string ab_input, ab_merges, ab_output;
  auto* apply_bpe =
      app.add_subcommand("apply-bpe", "segment text with learned merges");
  apply_bpe->add_option("--input", ab_input)->required();
  apply_bpe->add_option("--merges", ab_merges)->required();
  apply_bpe->add_option("--output", ab_output)->required();

  // train
  std::string tr_src, tr_tgt, tr_dev_src, tr_dev_tgt, tr_mode = "word";
  std::string tr_src_vocab, tr_tgt_vocab, tr_src_merges, tr_tgt_merges;
  std::string tr_out = "model";
  bool tr_resume = false;
  auto* train_cmd = app.add_subcommand("train", "train a translation model");
  train_cmd->add_option("--train-src", tr_src)->required();
  train_cmd->add_option("--train-tgt", tr_tgt)->required();
  train_cmd->add_option("--dev-src", tr_dev_src);
  train_cmd->add_option("--dev-tgt", tr_dev_tgt);
  train_cmd->add_option("--mode", tr_mode, "word|subword");
  train_cmd->add_option("--src-vocab", tr_src_vocab)->required();
  train_cmd->add_option("--tgt-vocab", tr_tgt_vocab)->required();
  train_cmd->add_option("--src-merges", tr_src_merges);
  train_cmd->add_option("--tgt-merges", tr_tgt_merges);
  train_cmd->add_option("--out", tr_out, "output directory");
  train_cmd->add_flag("--resume", tr_resume, "continue from checkpoint");

  // translate
  std::string x_model, x_src_vocab, x_tgt_vocab, x_src_merges, x_tgt_merges;
  std::string x_mode = "word", x_input, x_output, x_clean_side = "source";
  auto* translate = app.add_subcommand("translate", "translate a text file");
  translate->add_option("--model", x_model)->required();
  translate->add_option("--src-vocab", x_src_vocab)->required();
  translate->add_option("--tgt-vocab", x_tgt_vocab)->required();
  translate->add_option("--src-merges", x_src_merges);
  translate->add_option("--tgt-merges", x_tgt_merges);
  translate->add_option("--mode", x_mode, "word|subword");
  translate->add_option("--input", x_input)->required();
  translate->add_option("--output", x_output)->required();
  translate->add_option("--clean-side", x_clean_side,
                        "cleaning applied to input lines (source|target)");

  // backtranslate
  std::string bt_mono, bt_model, bt_src_vocab, bt_tgt_vocab, bt_src_merges,
      bt_tgt_merges, bt_mode = "subword", bt_out_src, bt_out_tgt;
  std::size_t bt_limit = SIZE_MAX;
  auto* backtranslate = app.add_subcommand(
      "backtranslate", "generate synthetic pairs from monolingual text");
  backtranslate->add_option("--mono", bt_mono)->required();
  backtranslate->add_option("--model", bt_model, "reverse-direction checkpoint")
      ->required();
  backtranslate->add_option("--src-vocab", bt_src_vocab)->required();
  backtranslate->add_option("--tgt-vocab", bt_tgt_vocab)->required();
  backtranslate->add_option("--src-merges", bt_src_merges);
  backtranslate->add_option("--tgt-merges", bt_tgt_merges);
  backtranslate->add_option("--mode", bt_mode, "word|subword");
  backtranslate->add_option("--limit", bt_limit);
  backtranslate->add_option("--out-src", bt_out_src)->required();
  backtranslate->add_option("--out-tgt", bt_out_tgt)->required();

  // assemble
  std::string as_base_src, as_base_tgt, as_syn_src, as_syn_tgt, as_out_src,
      as_out_tgt, as_increments;
  std::size_t as_level = 0;
  auto* assemble = app.add_subcommand(
      "assemble", "base plus cumulative synthetic batches");
  assemble->add_option("--base-src", as_base_src)->required();
  assemble->add_option("--base-tgt", as_base_tgt)->required();
  assemble->add_option("--synthetic-src", as_syn_src)->required();
  assemble->add_option("--synthetic-tgt", as_syn_tgt)->required();
  assemble->add_option("--level", as_level)->required();
  assemble->add_option("--increments", as_increments,
                       "comma-separated pair quotas");
  assemble->add_option("--out-src", as_out_src)->required();
  assemble->add_option("--out-tgt", as_out_tgt)->required();

  // evaluate
  std::string ev_hyp, ev_ref, ev_report;
  double ev_alpha = 0.25, ev_beta = 0.10;
  auto* evaluate = app.add_subcommand("evaluate", "BLEU and RIBES scoring");
  evaluate->add_option("--hyp", ev_hyp)->required();
  evaluate->add_option("--ref", ev_ref)->required();
  evaluate->add_option("--report", ev_report);
  evaluate->add_option("--alpha", ev_alpha);
  evaluate->add_option("--beta", ev_beta);

  // split-test
  std::string st_src, st_tgt, st_vocab, st_side = "source", st_prefix;
  auto* split_test = app.add_subcommand(
      "split-test", "in-vocabulary / complete test split");
  split_test->add_option("--test-src", st_src)->required();
  split_test->add_option("--test-tgt", st_tgt)->required();
  split_test->add_option("--vocab", st_vocab)->required();
  split_test->add_option("--side", st_side, "source|target|both");
  split_test->add_option("--out-prefix", st_prefix)->required();

  // experiment + report
  auto* experiment = app.add_subcommand(
      "experiment", "run the ten-configuration grid from a config file");
  std::string rp_results;
  auto* report = app.add_subcommand("report", "format results as tables");
  report->add_option("--results", rp_results)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (g.precision == "f32") {
      tensor::set_precision(tensor::Precision::f32);
    } else if (g.precision != "f64") {
      throw DataError("unknown precision '" + g.precision + "'");
    }

    if (preprocess->parsed()) {
      cmd_preprocess(src_in, tgt_in, src_out, tgt_out);
    } else if (build_vocab->parsed()) {
      auto vocab = tok::build_word_vocab(corpus::read_lines(bv_input), bv_max);
      vocab.save(bv_output);
      std::cout << "vocabulary of " << vocab.size() << " tokens\n";
    } else if (learn_bpe->parsed()) {
      auto merges = tok::learn_bpe(
          tok::word_frequencies(corpus::read_lines(lb_input)), lb_merges);
      merges.save(lb_output);
      std::cout << "learned " << merges.size() << " merges\n";
    } else if (apply_bpe->parsed()) {
      auto merges = tok::MergeTable::load(ab_merges);
      std::vector<std::string> out;
      for (const auto& line : corpus::read_lines(ab_input)) {
        auto segs = tok::apply_bpe(line, merges);
        std::string joined;
        for (std::size_t i = 0; i < segs.size(); ++i) {
          if (i) joined.push_back(' ');
          joined += segs[i];
        }
        out.push_back(std::move(joined));
      }
      corpus::write_lines(ab_output, out);
    } else if (train_cmd->parsed()) {
      cmd_train(g, tr_src, tr_tgt, tr_dev_src, tr_dev_tgt, tr_mode,
                tr_src_vocab, tr_tgt_vocab, tr_src_merges, tr_tgt_merges,
                tr_out, tr_resume);
    } else if (translate->parsed()) {
      auto artifacts =
          load_model_artifacts(x_model, x_src_vocab, x_tgt_vocab, x_src_merges,
                               x_tgt_merges, x_mode, x_clean_side);
      infer::translate_file(x_input, x_output, artifacts);
    } else if (backtranslate->parsed()) {
      cmd_backtranslate(bt_mono, bt_model, bt_src_vocab, bt_tgt_vocab,
                        bt_src_merges, bt_tgt_merges, bt_mode, bt_limit,
                        bt_out_src, bt_out_tgt);
    } else if (assemble->parsed()) {
      cmd_assemble(g, as_base_src, as_base_tgt, as_syn_src, as_syn_tgt,
                   as_level, as_increments, as_out_src, as_out_tgt);
    } else if (evaluate->parsed()) {
      auto rep = metrics::evaluate_corpus(ev_hyp, ev_ref, ev_report, ev_alpha,
                                          ev_beta);
      std::cout << "sentences=" << rep.sentence_count << "\n"
                << "bleu=" << rep.bleu << " (x100: " << 100.0 * rep.bleu
                << ")\n"
                << "ribes=" << rep.ribes << " (x100: " << 100.0 * rep.ribes
                << ")\n";
    } else if (split_test->parsed()) {
      cmd_split_test(st_src, st_tgt, st_vocab, st_side, st_prefix);
    } else if (experiment->parsed()) {
      cmd_experiment(g);
    } else if (report->parsed()) {
      std::cout << pipeline::format_tables(
          pipeline::ResultsFile(rp_results).rows());
    }
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
