#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace nmt::tok {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Special token ids. Fixed: every vocabulary reserves 0..3.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kNumSpecials = 4;

const std::string& special_token(TokenId id);

// Frequency-ranked token inventory with a bijective token<->id mapping.
// Ids 0..3 are the specials; the rest are assigned in descending frequency
// order, ties broken lexicographically.
class WordVocab {
 public:
  WordVocab();

  // `ranked` must already be (frequency desc, token asc) ordered.
  void assign(const std::vector<std::pair<std::string, long>>& ranked);

  TokenId id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(TokenId id) const;  // throws on out-of-range
  bool contains(const std::string& token) const;
  long frequency(const std::string& token) const;
  std::size_t size() const { return id_to_token_.size(); }

  void save(const std::string& path) const;
  static WordVocab load(const std::string& path);

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<long> counts_;
};

// Counts whitespace tokens over the lines of one corpus side.
std::unordered_map<std::string, long> count_words(
    const std::vector<std::string>& lines);

// The `max_size` most frequent tokens plus the specials. Throws DataError
// on an empty corpus or max_size < 1.
WordVocab build_word_vocab(const std::vector<std::string>& lines,
                           std::size_t max_size);

// Whitespace-split ids wrapped in BOS/EOS; unknown tokens map to UNK.
TokenSeq tokenize_words(std::string_view line, const WordVocab& v);

}  // namespace nmt::tok
