#include "nmt/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "nmt/error.hpp"
#include "nmt/unicode.hpp"

namespace nmt::corpus {

std::string clean_line(std::string_view line, Side side) {
  std::string out;
  out.reserve(line.size());
  bool pending_space = false;
  bool at_start = true;
  std::size_t pos = 0;
  while (pos < line.size()) {
    char32_t cp = unicode::decode_next(line, pos);
    if (unicode::is_space(cp)) {
      pending_space = !at_start;
      continue;
    }
    if (unicode::is_removable(cp)) continue;
    if (side == Side::target) cp = unicode::to_lower(cp);
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unicode::append_utf8(out, cp);
    at_start = false;
  }
  return out;
}

Bitext clean_bitext(const Bitext& b) {
  Bitext out;
  out.name = b.name;
  out.pairs.reserve(b.pairs.size());
  for (const auto& p : b.pairs) {
    SentencePair cleaned{clean_line(p.source, Side::source),
                         clean_line(p.target, Side::target), p.origin};
    if (cleaned.source.empty() || cleaned.target.empty()) continue;
    out.pairs.push_back(std::move(cleaned));
  }
  return out;
}

Bitext dedup_pairs(const Bitext& b) {
  Bitext out;
  out.name = b.name;
  out.pairs.reserve(b.pairs.size());
  std::unordered_set<std::string> seen;
  seen.reserve(b.pairs.size());
  for (const auto& p : b.pairs) {
    // '\x1f' cannot occur in cleaned text; unambiguous pair key.
    std::string key = p.source + '\x1f' + p.target;
    if (seen.insert(std::move(key)).second) out.pairs.push_back(p);
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (in.bad()) throw IoError("read failure on " + path);
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& line : lines) out << line << '\n';
  out.flush();
  if (!out) throw IoError("write failure on " + path);
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.emplace_back(line.substr(start, i - start));
  }
  return tokens;
}

Bitext load_bitext(const std::string& src_path, const std::string& tgt_path) {
  auto src = read_lines(src_path);
  auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw DataError("alignment error: " + src_path + " has " +
                    std::to_string(src.size()) + " lines but " + tgt_path +
                    " has " + std::to_string(tgt.size()));
  }
  Bitext b;
  b.name = std::filesystem::path(src_path).stem().string();
  b.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    b.pairs.push_back({unicode::nfc_normalize(src[i]),
                       unicode::nfc_normalize(tgt[i]), Origin::original});
  }
  const std::string manifest = src_path + ".manifest";
  if (std::filesystem::exists(manifest)) {
    auto origins = read_lines(manifest);
    if (origins.size() != b.pairs.size()) {
      throw DataError("manifest " + manifest + " has " +
                      std::to_string(origins.size()) + " lines, expected " +
                      std::to_string(b.pairs.size()));
    }
    for (std::size_t i = 0; i < origins.size(); ++i) {
      if (origins[i] == "synthetic") {
        b.pairs[i].origin = Origin::synthetic;
      } else if (origins[i] != "original") {
        throw DataError("manifest " + manifest + " line " +
                        std::to_string(i + 1) + ": unknown origin '" +
                        origins[i] + "'");
      }
    }
  }
  return b;
}

void save_bitext(const Bitext& b, const std::string& src_path,
                 const std::string& tgt_path) {
  std::vector<std::string> src, tgt, origins;
  src.reserve(b.size());
  tgt.reserve(b.size());
  origins.reserve(b.size());
  for (const auto& p : b.pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
    origins.push_back(p.origin == Origin::synthetic ? "synthetic" : "original");
  }
  write_lines(src_path, src);
  write_lines(tgt_path, tgt);
  write_lines(src_path + ".manifest", origins);
}

}  // namespace nmt::corpus
