#include "nmt/unicode.hpp"

#include <algorithm>
#include <array>

namespace nmt::unicode {

char32_t decode_next(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) -> unsigned {
    return static_cast<unsigned char>(text[i]);
  };
  const unsigned b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  auto cont = [&](std::size_t i) {
    return i < text.size() && (byte(i) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(pos + 1)) {
    char32_t cp = ((b0 & 0x1F) << 6) | (byte(pos + 1) & 0x3F);
    pos += 2;
    return cp >= 0x80 ? cp : 0xFFFD;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(pos + 1) && cont(pos + 2)) {
    char32_t cp = ((b0 & 0x0F) << 12) | ((byte(pos + 1) & 0x3F) << 6) |
                  (byte(pos + 2) & 0x3F);
    pos += 3;
    return cp >= 0x800 && !(cp >= 0xD800 && cp <= 0xDFFF) ? cp : 0xFFFD;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(pos + 1) && cont(pos + 2) && cont(pos + 3)) {
    char32_t cp = ((b0 & 0x07) << 18) | ((byte(pos + 1) & 0x3F) << 12) |
                  ((byte(pos + 2) & 0x3F) << 6) | (byte(pos + 3) & 0x3F);
    pos += 4;
    return cp >= 0x10000 && cp <= 0x10FFFF ? cp : 0xFFFD;
  }
  ++pos;
  return 0xFFFD;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::vector<std::string> split_codepoints(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = decode_next(text, pos);
    std::string s;
    append_utf8(s, cp);
    out.push_back(std::move(s));
  }
  return out;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0xA0:    // no-break space
    case 0x1680:  // ogham space mark
    case 0x2028:  // line separator
    case 0x2029:  // paragraph separator
    case 0x202F:  // narrow no-break space
    case 0x205F:  // medium mathematical space
    case 0x3000:  // ideographic space
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

namespace {

struct Range {
  char32_t lo, hi;
};

// Punctuation, symbol, control and format ranges (P*, S*, Cc, Cf) over the
// blocks this toolkit is expected to see. Whitespace is handled separately
// and takes precedence in the cleaner.
constexpr std::array<Range, 40> kRemovable = {{
    {0x0000, 0x001F},  // C0 controls
    {0x0021, 0x002F},  // ! " # $ % & ' ( ) * + , - . /
    {0x003A, 0x0040},  // : ; < = > ? @
    {0x005B, 0x0060},  // [ \ ] ^ _ `
    {0x007B, 0x007E},  // { | } ~
    {0x007F, 0x009F},  // DEL + C1 controls
    {0x00A1, 0x00A9},  // ¡ ¢ £ ¤ ¥ ¦ § ¨ ©
    {0x00AB, 0x00B1},  // « ¬ SHY ® ¯ ° ±
    {0x00B4, 0x00B4},  // ´
    {0x00B6, 0x00B8},  // ¶ · ¸
    {0x00BB, 0x00BB},  // »
    {0x00BF, 0x00BF},  // ¿
    {0x00D7, 0x00D7},  // ×
    {0x00F7, 0x00F7},  // ÷
    {0x0964, 0x0965},  // devanagari danda, double danda
    {0x0970, 0x0970},  // devanagari abbreviation sign
    {0x180E, 0x180E},  // mongolian vowel separator
    {0x200B, 0x200F},  // zero-width chars and direction marks
    {0x2010, 0x2027},  // hyphens, dashes, quotes, daggers, ellipsis
    {0x202A, 0x202E},  // embedding controls
    {0x2030, 0x205E},  // per-mille .. punctuation
    {0x2060, 0x206F},  // word joiner .. invisible operators
    {0x207A, 0x207E},  // superscript signs and parens
    {0x208A, 0x208E},  // subscript signs and parens
    {0x20A0, 0x20CF},  // currency symbols
    {0x2100, 0x214F},  // letterlike symbols (™ ℃ № ...)
    {0x2190, 0x2BFF},  // arrows, math operators, technical, dingbats
    {0x2E00, 0x2E7F},  // supplemental punctuation
    {0x3001, 0x3004},  // CJK punctuation
    {0x3008, 0x3020},  // CJK brackets
    {0x3030, 0x3030},  // wavy dash
    {0xFE50, 0xFE6F},  // small form variants
    {0xFF01, 0xFF0F},  // fullwidth punctuation
    {0xFF1A, 0xFF20},
    {0xFF3B, 0xFF40},
    {0xFF5B, 0xFF65},
    {0xFFE0, 0xFFE6},  // fullwidth signs
    {0xFFF9, 0xFFFD},  // interlinear annotation, replacement char
    {0x1F300, 0x1FAFF},  // emoji
    {0x1F000, 0x1F2FF},  // mahjong .. enclosed ideographic
}};

}  // namespace

bool is_removable(char32_t cp) {
  for (const auto& r : kRemovable) {
    if (cp >= r.lo && cp <= r.hi) return true;
  }
  return false;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp == 0x0178) return 0xFF;   // Ÿ -> ÿ
  if (cp == 0x0130) return 0x69;   // İ -> i
  // Latin Extended-A upper/lower pairs alternate.
  if ((cp >= 0x0100 && cp <= 0x0137) || (cp >= 0x014A && cp <= 0x0177)) {
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  if ((cp >= 0x0139 && cp <= 0x0148) || (cp >= 0x0179 && cp <= 0x017E)) {
    return (cp % 2 == 1) ? cp + 1 : cp;
  }
  return cp;
}

namespace {

struct Composition {
  char32_t base, mark, composed;
};

// Latin letters with the seven combining marks that have Latin-1 /
// Extended-A precomposed forms, plus the three Devanagari nukta letters
// that are NOT composition exclusions.
constexpr std::array<Composition, 72> kCompose = {{
    {'A', 0x300, 0xC0}, {'A', 0x301, 0xC1}, {'A', 0x302, 0xC2},
    {'A', 0x303, 0xC3}, {'A', 0x308, 0xC4}, {'A', 0x30A, 0xC5},
    {'C', 0x327, 0xC7}, {'E', 0x300, 0xC8}, {'E', 0x301, 0xC9},
    {'E', 0x302, 0xCA}, {'E', 0x308, 0xCB}, {'I', 0x300, 0xCC},
    {'I', 0x301, 0xCD}, {'I', 0x302, 0xCE}, {'I', 0x308, 0xCF},
    {'N', 0x303, 0xD1}, {'O', 0x300, 0xD2}, {'O', 0x301, 0xD3},
    {'O', 0x302, 0xD4}, {'O', 0x303, 0xD5}, {'O', 0x308, 0xD6},
    {'U', 0x300, 0xD9}, {'U', 0x301, 0xDA}, {'U', 0x302, 0xDB},
    {'U', 0x308, 0xDC}, {'Y', 0x301, 0xDD},
    {'a', 0x300, 0xE0}, {'a', 0x301, 0xE1}, {'a', 0x302, 0xE2},
    {'a', 0x303, 0xE3}, {'a', 0x308, 0xE4}, {'a', 0x30A, 0xE5},
    {'c', 0x327, 0xE7}, {'e', 0x300, 0xE8}, {'e', 0x301, 0xE9},
    {'e', 0x302, 0xEA}, {'e', 0x308, 0xEB}, {'i', 0x300, 0xEC},
    {'i', 0x301, 0xED}, {'i', 0x302, 0xEE}, {'i', 0x308, 0xEF},
    {'n', 0x303, 0xF1}, {'o', 0x300, 0xF2}, {'o', 0x301, 0xF3},
    {'o', 0x302, 0xF4}, {'o', 0x303, 0xF5}, {'o', 0x308, 0xF6},
    {'u', 0x300, 0xF9}, {'u', 0x301, 0xFA}, {'u', 0x302, 0xFB},
    {'u', 0x308, 0xFC}, {'y', 0x301, 0xFD}, {'y', 0x308, 0xFF},
    {'C', 0x301, 0x106}, {'c', 0x301, 0x107}, {'S', 0x301, 0x15A},
    {'s', 0x301, 0x15B}, {'S', 0x30C, 0x160}, {'s', 0x30C, 0x161},
    {'Z', 0x301, 0x179}, {'z', 0x301, 0x17A}, {'Z', 0x30C, 0x17D},
    {'z', 0x30C, 0x17E}, {'C', 0x30C, 0x10C}, {'c', 0x30C, 0x10D},
    {'N', 0x301, 0x143}, {'n', 0x301, 0x144}, {'g', 0x306, 0x11F},
    {'G', 0x306, 0x11E},
    {0x0928, 0x093C, 0x0929},  // ऩ
    {0x0930, 0x093C, 0x0931},  // ऱ
    {0x0933, 0x093C, 0x0934},  // ऴ
}};

// Devanagari composition exclusions: NFC keeps these decomposed.
constexpr std::array<Composition, 8> kDecompose = {{
    {0x0915, 0x093C, 0x0958},  // क़
    {0x0916, 0x093C, 0x0959},  // ख़
    {0x0917, 0x093C, 0x095A},  // ग़
    {0x091C, 0x093C, 0x095B},  // ज़
    {0x0921, 0x093C, 0x095C},  // ड़
    {0x0922, 0x093C, 0x095D},  // ढ़
    {0x092B, 0x093C, 0x095E},  // फ़
    {0x092F, 0x093C, 0x095F},  // य़
}};

}  // namespace

std::string nfc_normalize(std::string_view text) {
  std::vector<char32_t> cps;
  cps.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = decode_next(text, pos);
    bool excluded = false;
    for (const auto& d : kDecompose) {
      if (cp == d.composed) {
        cps.push_back(d.base);
        cps.push_back(d.mark);
        excluded = true;
        break;
      }
    }
    if (!excluded) cps.push_back(cp);
  }

  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t cp = cps[i];
    if (i + 1 < cps.size()) {
      for (const auto& c : kCompose) {
        if (cp == c.base && cps[i + 1] == c.mark) {
          cp = c.composed;
          ++i;
          break;
        }
      }
    }
    append_utf8(out, cp);
  }
  return out;
}

}  // namespace nmt::unicode
