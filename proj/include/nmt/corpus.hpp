#pragma once

#include <string>
#include <vector>

namespace nmt::corpus {

enum class Origin { original, synthetic };
enum class Side { source, target };

struct SentencePair {
  std::string source;
  std::string target;
  Origin origin = Origin::original;

  bool operator==(const SentencePair&) const = default;
};

// Line-aligned parallel text. Pair i's source corresponds to pair i's
// target; order is significant.
struct Bitext {
  std::string name;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// Strips punctuation, symbols and control characters, collapses whitespace
// runs to single spaces and trims. The target (Latin-script) side is also
// lowercased. Idempotent.
std::string clean_line(std::string_view line, Side side);

// clean_line on both sides of every pair; pairs with an empty cleaned side
// are dropped. Order of survivors is preserved.
Bitext clean_bitext(const Bitext& b);

// Keeps the first occurrence of each exact (source, target) pair.
Bitext dedup_pairs(const Bitext& b);

// Reads two line-aligned files (UTF-8, one sentence per line). Applies NFC
// normalization on load. If `src_path + ".manifest"` exists, per-pair
// origins are restored from it; otherwise all pairs are `original`.
// Throws DataError on line-count mismatch, IoError on unreadable files.
Bitext load_bitext(const std::string& src_path, const std::string& tgt_path);

// Writes the two sides plus the origin manifest (one `original|synthetic`
// keyword per line) to `src_path + ".manifest"`.
void save_bitext(const Bitext& b, const std::string& src_path,
                 const std::string& tgt_path);

// Helpers shared across the toolkit.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::vector<std::string> split_whitespace(std::string_view line);

}  // namespace nmt::corpus
