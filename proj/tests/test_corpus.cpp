#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nmt/corpus.hpp"
#include "nmt/error.hpp"
#include "nmt/rng.hpp"
#include "nmt/unicode.hpp"

using namespace nmt;
using corpus::Bitext;
using corpus::Origin;
using corpus::SentencePair;
using corpus::Side;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "nmt_corpus_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("clean_line lowercases and strips punctuation on the target side") {
  CHECK(corpus::clean_line("Hello,  World!", Side::target) == "hello world");
}

TEST_CASE("clean_line collapses whitespace-only input to empty") {
  CHECK(corpus::clean_line("  ", Side::source) == "");
  CHECK(corpus::clean_line("\t \t", Side::target) == "");
}

TEST_CASE("clean_line removes the danda but keeps Devanagari text intact") {
  // "this is a sentence." in Hindi, with danda and digits
  const std::string line = "यह वाक्य १२३ है।";
  const std::string expect = "यह वाक्य १२३ है";
  CHECK(corpus::clean_line(line, Side::source) == expect);
}

TEST_CASE("clean_line against a character-class oracle") {
  // Expected keep/remove classification from the published category data:
  // Po/Sc/Sm/Pi/Pf/Cf remove; letters, marks and digits keep.
  struct Probe {
    const char* text;
    bool keep;
  };
  const Probe probes[] = {
      {"।", false},   // U+0964 danda, Po
      {"॥", false},   // U+0965 double danda, Po
      {"₹", false},   // U+20B9 rupee sign, Sc
      {"—", false},   // U+2014 em dash, Pd
      {"…", false},   // U+2026 ellipsis, Po
      {"«", false},   // U+00AB Pi
      {"»", false},   // U+00BB Pf
      {"™", false},   // U+2122 So
      {"+", false},   // U+002B Sm (symbol)
      {"क", true},    // U+0915 letter
      {"ा", true},    // U+093E vowel sign (Mc)
      {"्", true},    // U+094D virama (Mn)
      {"ं", true},    // U+0902 anusvara (Mn)
      {"9", true},    // Nd
      {"१", true},    // U+0967 Devanagari digit, Nd
      {"q", true},    // letter
  };
  for (const auto& probe : probes) {
    const std::string cleaned = corpus::clean_line(probe.text, Side::source);
    CAPTURE(probe.text);
    CHECK(cleaned.empty() == !probe.keep);
  }
}

TEST_CASE("clean_line is idempotent on random unicode-ish strings") {
  const std::string alphabet[] = {"a", "B",  "1", ",", "!", " ", "  ",
                                  "क", "ा", "।", "é", "ß", "\t"};
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const std::size_t len = rng.below(20);
    for (std::size_t i = 0; i < len; ++i) {
      s += alphabet[rng.below(std::size(alphabet))];
    }
    for (Side side : {Side::source, Side::target}) {
      const std::string once = corpus::clean_line(s, side);
      CHECK(corpus::clean_line(once, side) == once);
    }
  }
}

TEST_CASE("clean_bitext drops pairs with an empty side and keeps order") {
  Bitext b;
  b.pairs = {{"a.", "b!", Origin::original}, {"", "x", Origin::original}};
  Bitext out = corpus::clean_bitext(b);
  REQUIRE(out.size() == 1);
  CHECK(out.pairs[0].source == "a");
  CHECK(out.pairs[0].target == "b");

  Bitext empty;
  CHECK(corpus::clean_bitext(empty).empty());
}

TEST_CASE("clean_bitext six-pair fixture keeps four in order") {
  Bitext b;
  b.pairs = {{"one", "ek", Origin::original},
             {"!!!", "noise only", Origin::original},
             {"two", "do", Origin::original},
             {"three", "...", Origin::original},
             {"four", "char", Origin::original},
             {"five", "paanch", Origin::original}};
  Bitext out = corpus::clean_bitext(b);
  REQUIRE(out.size() == 4);
  CHECK(out.pairs[0].source == "one");
  CHECK(out.pairs[1].source == "two");
  CHECK(out.pairs[2].source == "four");
  CHECK(out.pairs[3].source == "five");
  for (const auto& p : out.pairs) {
    CHECK(!p.source.empty());
    CHECK(!p.target.empty());
  }
}

TEST_CASE("dedup keeps first occurrences in order") {
  Bitext b;
  b.pairs = {{"s1", "t1", Origin::original},
             {"s1", "t1", Origin::original},
             {"s2", "t2", Origin::original}};
  Bitext out = corpus::dedup_pairs(b);
  REQUIRE(out.size() == 2);
  CHECK(out.pairs[0].source == "s1");
  CHECK(out.pairs[1].source == "s2");
}

TEST_CASE("dedup is on the whole pair, not one side") {
  Bitext b;
  b.pairs = {{"s", "t1", Origin::original}, {"s", "t2", Origin::original}};
  CHECK(corpus::dedup_pairs(b).size() == 2);
}

TEST_CASE("dedup ten-pair fixture with three duplicates keeps seven") {
  Bitext b;
  b.pairs = {{"a", "1", Origin::original}, {"b", "2", Origin::original},
             {"a", "1", Origin::original}, {"c", "3", Origin::original},
             {"d", "4", Origin::original}, {"b", "2", Origin::original},
             {"e", "5", Origin::original}, {"f", "6", Origin::original},
             {"c", "3", Origin::original}, {"g", "7", Origin::original}};
  Bitext out = corpus::dedup_pairs(b);
  CHECK(out.size() == 7);
  CHECK(corpus::dedup_pairs(out).size() == 7);  // idempotent
}

TEST_CASE("save/load round trip preserves pairs, order and origin") {
  auto dir = temp_dir();
  Bitext b;
  b.pairs = {{"नमस्ते दुनिया", "hello world", Origin::original},
             {"ऊँट", "camel", Origin::synthetic},
             {"ek do", "one two", Origin::original},
             {"chaar", "four", Origin::synthetic},
             {"paanch", "five", Origin::original}};
  const std::string src = (dir / "rt.src").string();
  const std::string tgt = (dir / "rt.tgt").string();
  corpus::save_bitext(b, src, tgt);
  Bitext loaded = corpus::load_bitext(src, tgt);
  REQUIRE(loaded.size() == b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(loaded.pairs[i].source == b.pairs[i].source);
    CHECK(loaded.pairs[i].target == b.pairs[i].target);
    CHECK(loaded.pairs[i].origin == b.pairs[i].origin);
  }
}

TEST_CASE("empty bitext round trips as two empty files") {
  auto dir = temp_dir();
  Bitext b;
  const std::string src = (dir / "empty.src").string();
  const std::string tgt = (dir / "empty.tgt").string();
  corpus::save_bitext(b, src, tgt);
  CHECK(std::filesystem::file_size(src) == 0);
  CHECK(corpus::load_bitext(src, tgt).empty());
}

TEST_CASE("load_bitext rejects misaligned files naming both counts") {
  auto dir = temp_dir();
  corpus::write_lines((dir / "three.src").string(), {"a", "b", "c"});
  corpus::write_lines((dir / "four.tgt").string(), {"1", "2", "3", "4"});
  CHECK_THROWS_WITH_AS(
      corpus::load_bitext((dir / "three.src").string(),
                          (dir / "four.tgt").string()),
      doctest::Contains("3"), DataError);
}

TEST_CASE("load_bitext reports unreadable files") {
  CHECK_THROWS_AS(corpus::load_bitext("/nonexistent/x.src", "/nonexistent/x.tgt"),
                  IoError);
}

TEST_CASE("NFC normalization applies on load") {
  auto dir = temp_dir();
  // decomposed é (e + U+0301) and decomposed क़ stays decomposed (exclusion),
  // while precomposed U+0958 decomposes.
  corpus::write_lines((dir / "nfc.src").string(), {"क़"});       // U+0958
  corpus::write_lines((dir / "nfc.tgt").string(), {"café"});
  Bitext b = corpus::load_bitext((dir / "nfc.src").string(),
                                 (dir / "nfc.tgt").string());
  CHECK(b.pairs[0].source == "क़");  // क + nukta
  CHECK(b.pairs[0].target == "café");
}

TEST_CASE("nfc_normalize composes Latin and handles nukta exclusions") {
  using unicode::nfc_normalize;
  CHECK(nfc_normalize("é") == "é");
  CHECK(nfc_normalize("é") == "é");
  CHECK(nfc_normalize("ऩ") == "ऩ");  // ऩ composes
  CHECK(nfc_normalize("क़") == "क़");  // क़ stays decomposed
  CHECK(nfc_normalize(nfc_normalize("Åb́")) ==
        nfc_normalize("Åb́"));
}

TEST_CASE("utf8 decode flags malformed bytes without crashing") {
  std::string bad = "a";
  bad.push_back(static_cast<char>(0xC3));  // dangling lead byte
  std::size_t pos = 0;
  CHECK(unicode::decode_next(bad, pos) == U'a');
  CHECK(unicode::decode_next(bad, pos) == 0xFFFD);
  CHECK(pos == bad.size());
}
