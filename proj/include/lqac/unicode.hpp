#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace lqac::unicode {

struct Decoded {
  char32_t code_point;
  std::size_t length;  // bytes consumed, always >= 1
};

// Decodes one code point at `pos`. Invalid sequences decode as U+FFFD with
// length 1 so callers can always make progress.
Decoded decode(std::string_view text, std::size_t pos);

// Offset of the code point that ends right before `pos` (pos > 0).
std::size_t previous_boundary(std::string_view text, std::size_t pos);

bool is_space(char32_t cp);
// Ideographs, kana, hangul, CJK punctuation and full-width forms.
bool is_cjk(char32_t cp);
bool is_ascii_lower(char32_t cp);

// Whitespace-insensitive equality: all whitespace code points are ignored.
bool equal_ignoring_space(std::string_view a, std::string_view b);
std::string remove_space(std::string_view text);

std::string_view trim(std::string_view text);

void append_utf8(std::string& out, char32_t cp);

}  // namespace lqac::unicode
