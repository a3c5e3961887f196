#pragma once

#include <array>
#include <string>
#include <vector>

namespace nmt::metrics {

using Sentence = std::vector<std::string>;

struct BleuReport {
  double bleu = 0.0;  // in [0, 1]
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

// Corpus-level single-reference BLEU: modified n-gram precision with
// per-hypothesis clipping summed over the corpus, BP = 1 when the
// hypothesis is longer than the reference and exp(1 - ref/hyp) otherwise.
// Any zero precision forces BLEU to 0 (no smoothing); the precisions are
// still reported. Throws DataError on an empty corpus or length mismatch.
BleuReport bleu(const std::vector<Sentence>& hypotheses,
                const std::vector<Sentence>& references);

// Sentence-level RIBES: hypothesis words are aligned to reference positions
// (unique unigrams directly, repeated ones by growing context windows);
// the score is NKT * P1^alpha * BP^beta where NKT is the ascending-pair
// fraction of the aligned rank order. Fewer than two aligned words score 0,
// except the exact single-word match. Throws DataError when the reference
// is empty.
double ribes(const Sentence& hypothesis, const Sentence& reference,
             double alpha = 0.25, double beta = 0.10);

struct EvaluationReport {
  double bleu = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  double ribes = 0.0;  // mean sentence RIBES
  std::size_t sentence_count = 0;

  // Key-value lines in stable order: bleu, precisions, bp, ribes, sentences.
  void save(const std::string& path) const;
  static EvaluationReport load(const std::string& path);
};

// Cleans both files as target-side text, whitespace-tokenizes, and scores.
// Writes the report when report_path is non-empty.
EvaluationReport evaluate_corpus(const std::string& hyp_path,
                                 const std::string& ref_path,
                                 const std::string& report_path = "",
                                 double alpha = 0.25, double beta = 0.10);

EvaluationReport score_corpus(const std::vector<Sentence>& hyps,
                              const std::vector<Sentence>& refs,
                              double alpha = 0.25, double beta = 0.10);

}  // namespace nmt::metrics
