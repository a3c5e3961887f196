#include "nmt/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "nmt/corpus.hpp"
#include "nmt/error.hpp"

namespace nmt::metrics {

namespace {

constexpr std::size_t kMaxN = 4;

// n-grams keyed by tokens joined on an unprintable separator.
std::unordered_map<std::string, long> ngram_counts(const Sentence& s,
                                                   std::size_t n) {
  std::unordered_map<std::string, long> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    std::string key = s[i];
    for (std::size_t j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += s[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuReport bleu(const std::vector<Sentence>& hypotheses,
                const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size()) {
    throw DataError("BLEU needs one reference per hypothesis: got " +
                    std::to_string(hypotheses.size()) + " vs " +
                    std::to_string(references.size()));
  }
  if (hypotheses.empty()) throw DataError("BLEU over an empty corpus");

  std::array<long, kMaxN> matched{};
  std::array<long, kMaxN> total{};
  BleuReport report;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Sentence& hyp = hypotheses[i];
    const Sentence& ref = references[i];
    report.hyp_len += hyp.size();
    report.ref_len += ref.size();
    for (std::size_t n = 1; n <= kMaxN; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      const auto ref_counts = ngram_counts(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) {
          matched[n - 1] += std::min(count, it->second);
        }
      }
    }
  }

  if (report.hyp_len == 0) return report;  // all-empty hypothesis corpus
  report.brevity_penalty =
      report.hyp_len > report.ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(report.ref_len) /
                               static_cast<double>(report.hyp_len));
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxN; ++n) {
    report.precisions[n] =
        total[n] > 0
            ? static_cast<double>(matched[n]) / static_cast<double>(total[n])
            : 0.0;
    if (report.precisions[n] <= 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(report.precisions[n]);
    }
  }
  report.bleu = any_zero ? 0.0
                         : report.brevity_penalty *
                               std::exp(log_sum / static_cast<double>(kMaxN));
  return report;
}

// ---- RIBES -------------------------------------------------------------

namespace {

// Aligns each hypothesis word to a reference position. Unique unigram
// matches align directly; ambiguous ones grow a context window left and
// right until exactly one candidate survives on each side. Unalignable
// words are dropped. Follows the metric's published procedure.
std::vector<std::size_t> align_words(const Sentence& ref, const Sentence& hyp) {
  std::unordered_map<std::string, std::vector<std::size_t>> ref_pos, hyp_pos;
  for (std::size_t i = 0; i < ref.size(); ++i) ref_pos[ref[i]].push_back(i);
  for (std::size_t i = 0; i < hyp.size(); ++i) hyp_pos[hyp[i]].push_back(i);

  std::vector<std::size_t> aligned;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    auto rit = ref_pos.find(hyp[i]);
    if (rit == ref_pos.end()) continue;
    const auto& ref_match = rit->second;
    const auto& hyp_match = hyp_pos[hyp[i]];
    if (ref_match.size() == 1 && hyp_match.size() == 1) {
      aligned.push_back(ref_match[0]);
      continue;
    }
    std::vector<std::size_t> left_ref = ref_match, left_hyp = hyp_match;
    std::vector<std::size_t> right_ref = ref_match, right_hyp = hyp_match;
    const std::size_t span = std::max(i, hyp.size() - i);
    for (std::size_t window = 1; window < span; ++window) {
      if (window <= i) {
        std::vector<std::size_t> nl_ref, nl_hyp;
        for (std::size_t j : left_ref) {
          if (j >= window && ref[j - window] == hyp[i - window]) {
            nl_ref.push_back(j);
          }
        }
        for (std::size_t j : left_hyp) {
          if (j >= window && hyp[j - window] == hyp[i - window]) {
            nl_hyp.push_back(j);
          }
        }
        if (nl_ref.size() == 1 && nl_hyp.size() == 1) {
          aligned.push_back(nl_ref[0]);
          break;
        }
        left_ref = std::move(nl_ref);
        left_hyp = std::move(nl_hyp);
      }
      if (i + window < hyp.size()) {
        std::vector<std::size_t> nr_ref, nr_hyp;
        for (std::size_t j : right_ref) {
          if (j + window < ref.size() && ref[j + window] == hyp[i + window]) {
            nr_ref.push_back(j);
          }
        }
        for (std::size_t j : right_hyp) {
          if (j + window < hyp.size() && hyp[j + window] == hyp[i + window]) {
            nr_hyp.push_back(j);
          }
        }
        if (nr_ref.size() == 1 && nr_hyp.size() == 1) {
          aligned.push_back(nr_ref[0]);
          break;
        }
        right_ref = std::move(nr_ref);
        right_hyp = std::move(nr_hyp);
      }
    }
  }
  return aligned;
}

}  // namespace

double ribes(const Sentence& hypothesis, const Sentence& reference,
             double alpha, double beta) {
  if (reference.empty()) throw DataError("RIBES reference has no words");
  if (hypothesis.empty()) return 0.0;

  const double bp =
      std::min(1.0, std::exp(1.0 - static_cast<double>(reference.size()) /
                                       static_cast<double>(hypothesis.size())));
  const std::vector<std::size_t> aligned = align_words(reference, hypothesis);
  const std::size_t n = aligned.size();

  double nkt, precision;
  if (n == 1 && reference.size() == 1) {
    nkt = 1.0;
    precision = 1.0 / static_cast<double>(hypothesis.size());
  } else if (n < 2) {
    return 0.0;
  } else {
    long ascending = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (aligned[i] < aligned[j]) ++ascending;
      }
    }
    nkt = static_cast<double>(ascending) /
          static_cast<double>(n * (n - 1) / 2);
    precision = static_cast<double>(n) / static_cast<double>(hypothesis.size());
  }
  return nkt * std::pow(precision, alpha) * std::pow(bp, beta);
}

// ---- corpus ------------------------------------------------------------

EvaluationReport score_corpus(const std::vector<Sentence>& hyps,
                              const std::vector<Sentence>& refs,
                              double alpha, double beta) {
  BleuReport b = bleu(hyps, refs);
  EvaluationReport report;
  report.bleu = b.bleu;
  report.precisions = b.precisions;
  report.brevity_penalty = b.brevity_penalty;
  report.sentence_count = hyps.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    acc += ribes(hyps[i], refs[i], alpha, beta);
  }
  report.ribes = acc / static_cast<double>(hyps.size());
  return report;
}

EvaluationReport evaluate_corpus(const std::string& hyp_path,
                                 const std::string& ref_path,
                                 const std::string& report_path, double alpha,
                                 double beta) {
  const auto hyp_lines = corpus::read_lines(hyp_path);
  const auto ref_lines = corpus::read_lines(ref_path);
  if (hyp_lines.size() != ref_lines.size()) {
    throw DataError("evaluation inputs differ in length: " + hyp_path +
                    " has " + std::to_string(hyp_lines.size()) + " lines, " +
                    ref_path + " has " + std::to_string(ref_lines.size()));
  }
  std::vector<Sentence> hyps, refs;
  hyps.reserve(hyp_lines.size());
  refs.reserve(ref_lines.size());
  for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
    hyps.push_back(corpus::split_whitespace(
        corpus::clean_line(hyp_lines[i], corpus::Side::target)));
    refs.push_back(corpus::split_whitespace(
        corpus::clean_line(ref_lines[i], corpus::Side::target)));
  }
  EvaluationReport report = score_corpus(hyps, refs, alpha, beta);
  if (!report_path.empty()) report.save(report_path);
  return report;
}

void EvaluationReport::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.precision(17);
  out << "bleu=" << bleu << '\n';
  out << "precisions=" << precisions[0] << ',' << precisions[1] << ','
      << precisions[2] << ',' << precisions[3] << '\n';
  out << "bp=" << brevity_penalty << '\n';
  out << "ribes=" << ribes << '\n';
  out << "sentences=" << sentence_count << '\n';
  if (!out) throw IoError("write failure on " + path);
}

EvaluationReport EvaluationReport::load(const std::string& path) {
  auto lines = corpus::read_lines(path);
  EvaluationReport r;
  bool saw_bleu = false, saw_prec = false, saw_bp = false, saw_ribes = false,
       saw_sent = false;
  for (const auto& line : lines) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("report " + path + ": malformed line '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "bleu") {
        r.bleu = std::stod(value);
        saw_bleu = true;
      } else if (key == "precisions") {
        std::istringstream ss(value);
        std::string part;
        for (auto& p : r.precisions) {
          if (!std::getline(ss, part, ',')) {
            throw DataError("report " + path + ": expected 4 precisions");
          }
          p = std::stod(part);
        }
        saw_prec = true;
      } else if (key == "bp") {
        r.brevity_penalty = std::stod(value);
        saw_bp = true;
      } else if (key == "ribes") {
        r.ribes = std::stod(value);
        saw_ribes = true;
      } else if (key == "sentences") {
        r.sentence_count = static_cast<std::size_t>(std::stoull(value));
        saw_sent = true;
      } else {
        throw DataError("report " + path + ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw DataError("report " + path + ": bad number in '" + line + "'");
    }
  }
  if (!(saw_bleu && saw_prec && saw_bp && saw_ribes && saw_sent)) {
    throw DataError("report " + path + " is missing keys");
  }
  return r;
}

}  // namespace nmt::metrics
