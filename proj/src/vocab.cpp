#include "nmt/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "nmt/corpus.hpp"
#include "nmt/error.hpp"

namespace nmt::tok {

const std::string& special_token(TokenId id) {
  static const std::string names[kNumSpecials] = {"<pad>", "<unk>", "<bos>",
                                                  "<eos>"};
  if (id < 0 || static_cast<std::size_t>(id) >= kNumSpecials) {
    throw DataError("not a special token id: " + std::to_string(id));
  }
  return names[id];
}

WordVocab::WordVocab() {
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    id_to_token_.push_back(special_token(static_cast<TokenId>(i)));
    token_to_id_[id_to_token_.back()] = static_cast<TokenId>(i);
    counts_.push_back(0);
  }
}

void WordVocab::assign(const std::vector<std::pair<std::string, long>>& ranked) {
  for (const auto& [token, count] : ranked) {
    if (token_to_id_.count(token)) {
      throw DataError("duplicate vocabulary token '" + token + "'");
    }
    token_to_id_[token] = static_cast<TokenId>(id_to_token_.size());
    id_to_token_.push_back(token);
    counts_.push_back(count);
  }
}

TokenId WordVocab::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& WordVocab::token_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id " + std::to_string(id) +
                    " out of range for vocabulary of size " +
                    std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool WordVocab::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

long WordVocab::frequency(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? 0 : counts_[static_cast<std::size_t>(it->second)];
}

void WordVocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\t' << counts_[i] << '\n';
  }
  if (!out) throw IoError("write failure on " + path);
}

WordVocab WordVocab::load(const std::string& path) {
  auto lines = corpus::read_lines(path);
  if (lines.size() < kNumSpecials) {
    throw DataError("vocab file " + path + " is missing the special tokens");
  }
  WordVocab v;
  std::vector<std::pair<std::string, long>> ranked;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw DataError("vocab file " + path + " line " + std::to_string(i + 1) +
                      ": expected token<TAB>count");
    }
    std::string token = lines[i].substr(0, tab);
    long count = 0;
    try {
      count = std::stol(lines[i].substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocab file " + path + " line " + std::to_string(i + 1) +
                      ": bad count");
    }
    if (i < kNumSpecials) {
      if (token != special_token(static_cast<TokenId>(i))) {
        throw DataError("vocab file " + path + ": specials must lead, got '" +
                        token + "' at line " + std::to_string(i + 1));
      }
    } else {
      ranked.emplace_back(std::move(token), count);
    }
  }
  v.assign(ranked);
  return v;
}

std::unordered_map<std::string, long> count_words(
    const std::vector<std::string>& lines) {
  std::unordered_map<std::string, long> counts;
  for (const auto& line : lines) {
    for (auto& token : corpus::split_whitespace(line)) ++counts[token];
  }
  return counts;
}

WordVocab build_word_vocab(const std::vector<std::string>& lines,
                           std::size_t max_size) {
  if (max_size < 1) throw DataError("vocabulary max_size must be >= 1");
  auto counts = count_words(lines);
  if (counts.empty()) {
    throw DataError("cannot build a vocabulary from an empty corpus");
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  WordVocab v;
  v.assign(ranked);
  return v;
}

TokenSeq tokenize_words(std::string_view line, const WordVocab& v) {
  TokenSeq ids;
  ids.push_back(kBos);
  for (const auto& token : corpus::split_whitespace(line)) {
    ids.push_back(v.id_of(token));
  }
  ids.push_back(kEos);
  return ids;
}

}  // namespace nmt::tok
