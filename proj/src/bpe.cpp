#include "nmt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "nmt/corpus.hpp"
#include "nmt/error.hpp"
#include "nmt/unicode.hpp"

namespace nmt::tok {

namespace {

using SymbolPair = std::pair<std::string, std::string>;

// Replaces every non-overlapping left-to-right occurrence of the adjacent
// pair with its concatenation.
void merge_in_place(std::vector<std::string>& symbols, const SymbolPair& rule) {
  std::size_t i = 0;
  while (i + 1 < symbols.size()) {
    if (symbols[i] == rule.first && symbols[i + 1] == rule.second) {
      symbols[i] += symbols[i + 1];
      symbols.erase(symbols.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    } else {
      ++i;
    }
  }
}

struct LearnState {
  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  // Pair statistics kept incrementally; std::map gives the deterministic
  // lexicographic order the tie-break needs.
  std::map<SymbolPair, long> pair_counts;
  std::map<SymbolPair, std::set<std::size_t>> pair_words;

  void add_word_pairs(std::size_t w, long sign) {
    const auto& syms = words[w];
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      SymbolPair p{syms[i], syms[i + 1]};
      long& c = pair_counts[p];
      c += sign * counts[w];
      if (sign > 0) {
        pair_words[p].insert(w);
      } else if (c <= 0) {
        pair_counts.erase(p);
        auto it = pair_words.find(p);
        if (it != pair_words.end()) {
          it->second.erase(w);
          if (it->second.empty()) pair_words.erase(it);
        }
      }
    }
  }
};

}  // namespace

MergeTable learn_bpe(const std::map<std::string, long>& word_freqs,
                     std::size_t num_merges) {
  if (word_freqs.empty()) {
    throw DataError("cannot learn BPE merges from an empty corpus");
  }
  LearnState st;
  st.words.reserve(word_freqs.size());
  for (const auto& [word, count] : word_freqs) {
    st.words.push_back(unicode::split_codepoints(word));
    st.counts.push_back(count);
  }
  for (std::size_t w = 0; w < st.words.size(); ++w) st.add_word_pairs(w, +1);

  MergeTable table;
  for (std::size_t step = 0; step < num_merges; ++step) {
    const SymbolPair* best = nullptr;
    long best_count = 0;
    for (const auto& [pair, count] : st.pair_counts) {
      if (count > best_count) {  // map order makes the first max the smallest
        best = &pair;
        best_count = count;
      }
    }
    if (!best || best_count < 2) break;  // hapax pairs add no generalization
    SymbolPair rule = *best;
    table.merges.push_back(rule);

    auto affected_it = st.pair_words.find(rule);
    std::vector<std::size_t> affected(affected_it->second.begin(),
                                      affected_it->second.end());
    for (std::size_t w : affected) {
      st.add_word_pairs(w, -1);
      merge_in_place(st.words[w], rule);
      st.add_word_pairs(w, +1);
    }
    st.pair_counts.erase(rule);
    st.pair_words.erase(rule);
  }
  return table;
}

std::vector<std::string> apply_bpe_word(const std::string& word,
                                        const MergeTable& m) {
  std::vector<std::string> symbols = unicode::split_codepoints(word);
  if (symbols.empty()) return {};
  for (const auto& rule : m.merges) {
    if (symbols.size() < 2) break;
    merge_in_place(symbols, rule);
  }
  for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += kBpeMarker;
  return symbols;
}

std::vector<std::string> apply_bpe(std::string_view line, const MergeTable& m) {
  std::vector<std::string> out;
  for (const auto& word : corpus::split_whitespace(line)) {
    auto segs = apply_bpe_word(word, m);
    out.insert(out.end(), segs.begin(), segs.end());
  }
  return out;
}

std::string decode_bpe(const std::vector<std::string>& tokens) {
  static const std::size_t marker_len = std::string(kBpeMarker).size();
  std::string out;
  bool continuing = false;
  for (const auto& token : tokens) {
    if (!continuing && !out.empty()) out.push_back(' ');
    if (token.size() >= marker_len &&
        token.compare(token.size() - marker_len, marker_len, kBpeMarker) == 0) {
      out.append(token, 0, token.size() - marker_len);
      continuing = true;
    } else {
      out.append(token);
      continuing = false;
    }
  }
  return out;
}

std::map<std::string, long> word_frequencies(
    const std::vector<std::string>& lines) {
  std::map<std::string, long> freqs;
  for (const auto& line : lines) {
    for (auto& token : corpus::split_whitespace(line)) ++freqs[token];
  }
  return freqs;
}

WordVocab build_subword_vocab(const std::vector<std::string>& lines,
                              const MergeTable& m) {
  auto freqs = word_frequencies(lines);
  if (freqs.empty()) {
    throw DataError("cannot build a vocabulary from an empty corpus");
  }
  std::map<std::string, long> seg_counts;
  for (const auto& [word, count] : freqs) {
    for (const auto& seg : apply_bpe_word(word, m)) seg_counts[seg] += count;
  }
  std::vector<std::pair<std::string, long>> ranked(seg_counts.begin(),
                                                   seg_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  WordVocab v;
  v.assign(ranked);
  return v;
}

TokenSeq tokenize_subwords(std::string_view line, const MergeTable& m,
                           const WordVocab& v) {
  TokenSeq ids;
  ids.push_back(kBos);
  for (const auto& seg : apply_bpe(line, m)) ids.push_back(v.id_of(seg));
  ids.push_back(kEos);
  return ids;
}

void MergeTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "#bpe-v1\n";
  for (const auto& [left, right] : merges) out << left << ' ' << right << '\n';
  if (!out) throw IoError("write failure on " + path);
}

MergeTable MergeTable::load(const std::string& path) {
  auto lines = corpus::read_lines(path);
  if (lines.empty() || lines[0] != "#bpe-v1") {
    throw DataError("merges file " + path + " is missing the #bpe-v1 header");
  }
  MergeTable m;
  std::set<SymbolPair> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto space = lines[i].find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == lines[i].size()) {
      throw DataError("merges file " + path + " line " + std::to_string(i + 1) +
                      ": expected `left right`");
    }
    SymbolPair rule{lines[i].substr(0, space), lines[i].substr(space + 1)};
    if (!seen.insert(rule).second) {
      throw DataError("merges file " + path + " line " + std::to_string(i + 1) +
                      ": duplicate merge pair");
    }
    m.merges.push_back(std::move(rule));
  }
  return m;
}

}  // namespace nmt::tok
