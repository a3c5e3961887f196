#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::unicode {

// Decodes one UTF-8 codepoint starting at `pos`, advancing `pos` past it.
// Malformed bytes decode as U+FFFD and advance one byte.
char32_t decode_next(std::string_view text, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

// Splits into codepoints, each re-encoded as a UTF-8 string. Used by the
// BPE learner, whose initial symbols are single characters.
std::vector<std::string> split_codepoints(std::string_view text);

// Whitespace in the cleaning sense: ASCII whitespace plus the Unicode
// space/line/paragraph separators (Zs, Zl, Zp).
bool is_space(char32_t cp);

// Characters the cleaner strips: punctuation (P*), symbols (S*), control
// and format characters (Cc, Cf). Letters, combining marks, and digits are
// kept. Coverage is a curated range table over the blocks that occur in
// Hindi/English text; unlisted codepoints are kept.
bool is_removable(char32_t cp);

// Simple lowercase mapping for ASCII, Latin-1 and Latin Extended-A.
// Everything else (including Devanagari, which has no case) is unchanged.
char32_t to_lower(char32_t cp);

// Canonical composition/decomposition (NFC) restricted to the scripts this
// toolkit targets: recomposes Latin base+combining-mark sequences into
// their precomposed forms and normalizes Devanagari nukta forms per the
// composition exclusion rules. Text already in NFC passes through
// unchanged.
std::string nfc_normalize(std::string_view text);

}  // namespace nmt::unicode
