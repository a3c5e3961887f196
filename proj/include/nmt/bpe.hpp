#pragma once

#include <map>
#include <string>
#include <vector>

#include "nmt/vocab.hpp"

namespace nmt::tok {

// Word-internal continuation marker: every segment of a word except the
// last carries this suffix, so decoding is a pure string operation.
inline constexpr const char* kBpeMarker = "@@";

// Learned merge rules in learning order (highest-frequency pair first).
struct MergeTable {
  std::vector<std::pair<std::string, std::string>> merges;

  std::size_t size() const { return merges.size(); }

  // File format: first line `#bpe-v1`, then one `left right` pair per line.
  void save(const std::string& path) const;
  static MergeTable load(const std::string& path);
};

// Learns up to `num_merges` rules from a word-frequency map. At each step
// the globally most frequent adjacent symbol pair is merged, ties broken by
// the lexicographically smallest (left, right). Stops early once no pair
// occurs at least twice. Throws DataError on an empty corpus.
MergeTable learn_bpe(const std::map<std::string, long>& word_freqs,
                     std::size_t num_merges);

// Splits one word (no whitespace) into marked subword segments by applying
// the merges in table order.
std::vector<std::string> apply_bpe_word(const std::string& word,
                                        const MergeTable& m);

// Whole line: whitespace-split, each word segmented.
std::vector<std::string> apply_bpe(std::string_view line, const MergeTable& m);

// Inverse of the marker convention.
std::string decode_bpe(const std::vector<std::string>& tokens);

// Specials plus every distinct segment produced by apply_bpe over the
// corpus, ranked by segment frequency.
WordVocab build_subword_vocab(const std::vector<std::string>& lines,
                              const MergeTable& m);

// Subword ids for a line, wrapped in BOS/EOS.
TokenSeq tokenize_subwords(std::string_view line, const MergeTable& m,
                           const WordVocab& v);

std::map<std::string, long> word_frequencies(
    const std::vector<std::string>& lines);

}  // namespace nmt::tok
