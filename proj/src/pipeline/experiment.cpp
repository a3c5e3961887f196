#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <unordered_set>

#include "nmt/error.hpp"
#include "nmt/metrics/metrics.hpp"
#include "nmt/pipeline/pipeline.hpp"
#include "nmt/train/checkpoint.hpp"

namespace nmt::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSchemaHeader = "#nmt-results-v1";
constexpr const char* kColumnHeader =
    "model_id,tokenization,batch_level,status,bleu_set1,ribes_set1,"
    "bleu_set2,ribes_set2,seed,train_pairs,src_vocab_hash,tgt_vocab_hash,"
    "checkpoint_fp,error";

std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string format_row(const ExperimentRow& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.model_id << ',' << r.tokenization << ',' << r.batch_level << ','
      << r.status << ',' << r.bleu_set1 << ',' << r.ribes_set1 << ','
      << r.bleu_set2 << ',' << r.ribes_set2 << ',' << r.seed << ','
      << r.train_pairs << ',' << r.src_vocab_hash << ',' << r.tgt_vocab_hash
      << ',' << r.checkpoint_fp << ',' << sanitize_field(r.error);
  return out.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (begin <= line.size()) {
    std::size_t comma = line.find(',', begin);
    if (comma == std::string::npos) comma = line.size();
    out.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
  return out;
}

// RAII advisory lock over an append-mode descriptor.
class LockedAppend {
 public:
  explicit LockedAppend(const std::string& path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw IoError("cannot open " + path + " for appending");
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError("cannot lock " + path);
    }
  }
  ~LockedAppend() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  void write_line(const std::string& line) {
    std::string buf = line + "\n";
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      const ssize_t n = ::write(fd_, p, left);
      if (n < 0) throw IoError("write failure on results file");
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }
  bool empty() const {
    const off_t end = ::lseek(fd_, 0, SEEK_END);
    return end == 0;
  }

 private:
  int fd_;
};

}  // namespace

std::vector<ExperimentRow> ResultsFile::rows() const {
  std::vector<ExperimentRow> out;
  if (!fs::exists(path_)) return out;
  auto lines = corpus::read_lines(path_);
  if (lines.empty()) return out;
  if (lines[0] != kSchemaHeader) {
    throw DataError("results file " + path_ + " has an unknown schema header");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    if (lines[i] == kColumnHeader) continue;
    auto f = split_csv(lines[i]);
    if (f.size() != 14) {
      throw DataError("results file " + path_ + " line " +
                      std::to_string(i + 1) + " has " +
                      std::to_string(f.size()) + " fields, expected 14");
    }
    try {
      ExperimentRow r;
      r.model_id = std::stoi(f[0]);
      r.tokenization = f[1];
      r.batch_level = static_cast<std::size_t>(std::stoull(f[2]));
      r.status = f[3];
      r.bleu_set1 = std::stod(f[4]);
      r.ribes_set1 = std::stod(f[5]);
      r.bleu_set2 = std::stod(f[6]);
      r.ribes_set2 = std::stod(f[7]);
      r.seed = std::stoull(f[8]);
      r.train_pairs = static_cast<std::size_t>(std::stoull(f[9]));
      r.src_vocab_hash = f[10];
      r.tgt_vocab_hash = f[11];
      r.checkpoint_fp = f[12];
      r.error = f[13];
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError("results file " + path_ + " line " +
                      std::to_string(i + 1) + " is malformed");
    }
  }
  return out;
}

void ResultsFile::append(const ExperimentRow& row) {
  LockedAppend fd(path_);
  if (fd.empty()) {
    fd.write_line(kSchemaHeader);
    fd.write_line(kColumnHeader);
  }
  fd.write_line(format_row(row));
}

std::vector<ExperimentConfig> full_grid(const model::ModelConfig& model_tpl,
                                         const train::TrainConfig& train_tpl,
                                         std::size_t vocab_max_size,
                                         std::size_t bpe_merges,
                                         std::uint64_t seed) {
  std::vector<ExperimentConfig> grid;
  int id = 1;
  for (infer::TokenMode mode :
       {infer::TokenMode::word, infer::TokenMode::subword}) {
    for (std::size_t level = 0; level <= 4; ++level) {
      ExperimentConfig cfg;
      cfg.model_id = id++;
      cfg.tokenization = mode;
      cfg.batch_level = level;
      cfg.model = model_tpl;
      cfg.train = train_tpl;
      cfg.vocab_max_size = vocab_max_size;
      cfg.bpe_merges = bpe_merges;
      cfg.seed = Rng::mix(seed, static_cast<std::uint64_t>(cfg.model_id));
      cfg.train.seed = cfg.seed;
      grid.push_back(std::move(cfg));
    }
  }
  return grid;
}

namespace {

std::vector<std::string> side_lines(const corpus::Bitext& b, bool source) {
  std::vector<std::string> lines;
  lines.reserve(b.size());
  for (const auto& p : b.pairs) lines.push_back(source ? p.source : p.target);
  return lines;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void check_no_leak(const corpus::Bitext& held_out,
                   const std::unordered_set<std::string>& pool_keys,
                   const char* what) {
  for (const auto& p : held_out.pairs) {
    if (pool_keys.count(p.source + '\x1f' + p.target)) {
      throw DataError(std::string("synthetic pool leaks into ") + what +
                      ": pair '" + p.source + "' / '" + p.target + "'");
    }
  }
}

struct RowArtifacts {
  tok::WordVocab src_vocab, tgt_vocab;
  tok::MergeTable src_merges, tgt_merges;
  std::string src_vocab_path, tgt_vocab_path, src_merges_path, tgt_merges_path;
};

RowArtifacts build_row_vocab(const ExperimentConfig& cfg,
                             const corpus::Bitext& assembled,
                             const std::string& rowdir) {
  RowArtifacts art;
  const auto src_lines = side_lines(assembled, true);
  const auto tgt_lines = side_lines(assembled, false);
  if (cfg.tokenization == infer::TokenMode::word) {
    art.src_vocab = tok::build_word_vocab(src_lines, cfg.vocab_max_size);
    art.tgt_vocab = tok::build_word_vocab(tgt_lines, cfg.vocab_max_size);
  } else {
    art.src_merges = tok::learn_bpe(tok::word_frequencies(src_lines),
                                    cfg.bpe_merges);
    art.tgt_merges = tok::learn_bpe(tok::word_frequencies(tgt_lines),
                                    cfg.bpe_merges);
    art.src_vocab = tok::build_subword_vocab(src_lines, art.src_merges);
    art.tgt_vocab = tok::build_subword_vocab(tgt_lines, art.tgt_merges);
    art.src_merges_path = rowdir + "/src.merges";
    art.tgt_merges_path = rowdir + "/tgt.merges";
    art.src_merges.save(art.src_merges_path);
    art.tgt_merges.save(art.tgt_merges_path);
  }
  art.src_vocab_path = rowdir + "/src.vocab";
  art.tgt_vocab_path = rowdir + "/tgt.vocab";
  art.src_vocab.save(art.src_vocab_path);
  art.tgt_vocab.save(art.tgt_vocab_path);
  return art;
}

metrics::EvaluationReport score_split(const corpus::Bitext& split,
                                      const infer::ModelArtifacts& artifacts) {
  std::vector<metrics::Sentence> hyps, refs;
  hyps.reserve(split.size());
  refs.reserve(split.size());
  for (const auto& pair : split.pairs) {
    hyps.push_back(
        corpus::split_whitespace(infer::translate_line(pair.source, artifacts)));
    refs.push_back(corpus::split_whitespace(pair.target));
  }
  return metrics::score_corpus(hyps, refs);
}

ExperimentRow run_row(const ExperimentConfig& cfg, const ExperimentData& data,
                      const TestSplit& split, const std::string& workdir) {
  ExperimentRow row;
  row.model_id = cfg.model_id;
  row.tokenization = infer::token_mode_name(cfg.tokenization);
  row.batch_level = cfg.batch_level;
  row.seed = cfg.seed;

  BatchPlan plan{data.train_base, data.increments, data.scale};
  corpus::Bitext assembled =
      assemble_batch(plan, data.synthetic_pool, cfg.batch_level, cfg.seed);
  row.train_pairs = assembled.size();

  const std::string rowdir =
      workdir + "/row_" + std::to_string(cfg.model_id);
  fs::create_directories(rowdir);

  RowArtifacts vocab = build_row_vocab(cfg, assembled, rowdir);

  model::ModelConfig mcfg = cfg.model;
  mcfg.src_vocab_size = vocab.src_vocab.size();
  mcfg.tgt_vocab_size = vocab.tgt_vocab.size();
  mcfg.validate();

  std::size_t dropped = 0;
  auto train_data = tokenize_bitext(assembled, cfg.tokenization,
                                    vocab.src_vocab, vocab.tgt_vocab,
                                    vocab.src_merges, vocab.tgt_merges,
                                    mcfg.max_len, &dropped);
  auto dev_data = tokenize_bitext(data.dev, cfg.tokenization, vocab.src_vocab,
                                  vocab.tgt_vocab, vocab.src_merges,
                                  vocab.tgt_merges, mcfg.max_len);
  if (train_data.empty()) {
    throw DataError("row " + std::to_string(cfg.model_id) +
                    ": no trainable pairs after tokenization");
  }

  train::TrainState state;
  state.params = model::init_params(mcfg, cfg.seed);
  state.opt = train::OptimizerState::for_params(state.params);
  train::TrainResult tr =
      train::train(state, train_data, dev_data, cfg.train);
  train::write_history(rowdir + "/history.csv", tr.history);

  train::CheckpointMeta meta;
  meta.config_fingerprint = train::config_fingerprint(mcfg);
  meta.src_vocab_hash = train::fnv1a_file(vocab.src_vocab_path);
  meta.tgt_vocab_hash = train::fnv1a_file(vocab.tgt_vocab_path);
  if (!vocab.src_merges_path.empty()) {
    meta.src_merges_hash = train::fnv1a_file(vocab.src_merges_path);
    meta.tgt_merges_hash = train::fnv1a_file(vocab.tgt_merges_path);
  }
  meta.seed = cfg.seed;
  const std::string ckpt = rowdir + "/checkpoint.bin";
  train::save_checkpoint(ckpt, state, meta);

  infer::ModelArtifacts artifacts;
  artifacts.params = state.params;
  artifacts.params.set_requires_grad(false);
  artifacts.meta = meta;
  artifacts.src_vocab = vocab.src_vocab;
  artifacts.tgt_vocab = vocab.tgt_vocab;
  artifacts.src_merges = vocab.src_merges;
  artifacts.tgt_merges = vocab.tgt_merges;
  artifacts.mode = cfg.tokenization;

  if (!split.set1.empty()) {
    auto r1 = score_split(split.set1, artifacts);
    row.bleu_set1 = r1.bleu;
    row.ribes_set1 = r1.ribes;
  }
  auto r2 = score_split(split.set2, artifacts);
  row.bleu_set2 = r2.bleu;
  row.ribes_set2 = r2.ribes;

  row.src_vocab_hash = hex64(meta.src_vocab_hash);
  row.tgt_vocab_hash = hex64(meta.tgt_vocab_hash);
  row.checkpoint_fp = hex64(train::fnv1a_file(ckpt));
  row.status = "ok";
  return row;
}

}  // namespace

std::vector<ExperimentRow> run_experiment(
    const std::vector<ExperimentConfig>& grid, const ExperimentData& data,
    const std::string& workdir, const std::string& results_path) {
  fs::create_directories(workdir);
  ResultsFile results(results_path);

  // Synthetic data must never contaminate the held-out sets.
  std::unordered_set<std::string> pool_keys;
  pool_keys.reserve(data.synthetic_pool.size());
  for (const auto& p : data.synthetic_pool.pairs) {
    pool_keys.insert(p.source + '\x1f' + p.target);
  }
  check_no_leak(data.dev, pool_keys, "the dev set");
  check_no_leak(data.test, pool_keys, "the test set");

  // The in-vocabulary split is fixed by the word vocabulary of the original
  // (level-0) training data, identically for every row.
  std::size_t vocab_max = grid.empty() ? 50000 : grid[0].vocab_max_size;
  tok::WordVocab split_vocab =
      tok::build_word_vocab(side_lines(data.train_base, true), vocab_max);
  TestSplit split = split_test_set(data.test, split_vocab);

  std::unordered_set<int> done;
  for (const auto& row : results.rows()) {
    if (row.status == "ok") done.insert(row.model_id);
  }
  for (const auto& cfg : grid) {
    if (done.count(cfg.model_id)) continue;
    ExperimentRow row;
    try {
      row = run_row(cfg, data, split, workdir);
    } catch (const std::exception& e) {
      row.model_id = cfg.model_id;
      row.tokenization = infer::token_mode_name(cfg.tokenization);
      row.batch_level = cfg.batch_level;
      row.seed = cfg.seed;
      row.status = "failed";
      row.error = e.what();
    }
    results.append(row);
  }
  return results.rows();
}

namespace {

void format_set1_table(std::ostringstream& out, const char* title,
                       const std::vector<ExperimentRow>& rows,
                       const std::string& tokenization) {
  out << title << "\n";
  out << "Model ID | Model                    | BLEU  | RIBES\n";
  for (const auto& r : rows) {
    if (r.tokenization != tokenization || r.status != "ok") continue;
    std::string label = r.batch_level == 0
                            ? "Transformer"
                            : "Transformer with Batch " +
                                  std::to_string(r.batch_level);
    char line[128];
    std::snprintf(line, sizeof line, "%8d | %-24s | %5.2f | %.6f\n",
                  r.model_id, label.c_str(), 100.0 * r.bleu_set1,
                  r.ribes_set1);
    out << line;
  }
  out << "\n";
}

}  // namespace

std::string format_tables(const std::vector<ExperimentRow>& rows) {
  std::ostringstream out;
  format_set1_table(out, "Word Level Tokenization (Set-1)", rows, "word");
  format_set1_table(out, "Subword Level Tokenization (Set-1)", rows,
                    "subword");
  out << "Final Batch on Set-2\n";
  out << "Model ID | Tokenization | BLEU  | RIBES\n";
  std::size_t max_level = 0;
  for (const auto& r : rows) max_level = std::max(max_level, r.batch_level);
  for (const auto& r : rows) {
    if (r.batch_level != max_level || r.status != "ok") continue;
    char line[128];
    std::snprintf(line, sizeof line, "%8d | %-12s | %5.2f | %.6f\n",
                  r.model_id, r.tokenization.c_str(), 100.0 * r.bleu_set2,
                  r.ribes_set2);
    out << line;
  }
  for (const auto& r : rows) {
    if (r.status != "ok") {
      out << "row " << r.model_id << " failed: " << r.error << "\n";
    }
  }
  return out.str();
}

}  // namespace nmt::pipeline
