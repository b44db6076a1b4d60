#include "lqac/unicode.hpp"

namespace lqac::unicode {

Decoded decode(std::string_view text, std::size_t pos) {
  constexpr Decoded kInvalid{0xFFFD, 1};
  const auto lead = static_cast<unsigned char>(text[pos]);
  if (lead < 0x80) return {lead, 1};

  std::size_t length;
  char32_t cp;
  if ((lead & 0xE0) == 0xC0) {
    length = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    length = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    length = 4;
    cp = lead & 0x07;
  } else {
    return kInvalid;
  }
  if (pos + length > text.size()) return kInvalid;
  for (std::size_t i = 1; i < length; ++i) {
    const auto c = static_cast<unsigned char>(text[pos + i]);
    if ((c & 0xC0) != 0x80) return kInvalid;
    cp = (cp << 6) | (c & 0x3F);
  }
  // Overlong forms and surrogates.
  if ((length == 2 && cp < 0x80) || (length == 3 && cp < 0x800) ||
      (length == 4 && (cp < 0x10000 || cp > 0x10FFFF)) ||
      (cp >= 0xD800 && cp <= 0xDFFF)) {
    return kInvalid;
  }
  return {cp, length};
}

std::size_t previous_boundary(std::string_view text, std::size_t pos) {
  std::size_t start = pos - 1;
  // Walk back over at most three continuation bytes, then verify the decode
  // actually spans up to `pos`.
  std::size_t candidate = start;
  for (int i = 0; i < 3 && candidate > 0 &&
                  (static_cast<unsigned char>(text[candidate]) & 0xC0) == 0x80;
       ++i) {
    --candidate;
  }
  if (candidate + decode(text, candidate).length == pos) return candidate;
  return start;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case ' ':
    case '\t':
    case '\n':
    case '\r':
    case '\f':
    case '\v':
    case 0x00A0:
    case 0x2028:
    case 0x2029:
    case 0x3000:
      return true;
    default:
      return false;
  }
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
         (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
         (cp >= 0x20000 && cp <= 0x2FA1F) ||  // extensions B.. + compat supp.
         (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
         (cp >= 0x3001 && cp <= 0x303F) ||    // CJK punctuation (minus U+3000)
         (cp >= 0x3040 && cp <= 0x30FF) ||    // kana
         (cp >= 0xAC00 && cp <= 0xD7AF) ||    // hangul syllables
         (cp >= 0xFF01 && cp <= 0xFF60);      // full-width forms
}

bool is_ascii_lower(char32_t cp) { return cp >= 'a' && cp <= 'z'; }

std::string remove_space(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = decode(text, pos);
    if (!is_space(d.code_point)) out.append(text.substr(pos, d.length));
    pos += d.length;
  }
  return out;
}

bool equal_ignoring_space(std::string_view a, std::string_view b) {
  return remove_space(a) == remove_space(b);
}

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  while (begin < text.size()) {
    const auto d = decode(text, begin);
    if (!is_space(d.code_point)) break;
    begin += d.length;
  }
  std::size_t end = text.size();
  while (end > begin) {
    const std::size_t prev = previous_boundary(text, end);
    if (!is_space(decode(text, prev).code_point)) break;
    end = prev;
  }
  return text.substr(begin, end - begin);
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

}  // namespace lqac::unicode
