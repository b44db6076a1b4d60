#include "lqac/textseg.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "lqac/error.hpp"
#include "lqac/unicode.hpp"

namespace lqac {
namespace {

using unicode::decode;

// Abbreviations (lower-case, final period removed) after which a period does
// not end a sentence.
constexpr std::array<std::string_view, 44> kAbbreviations = {
    "mr",   "mrs",  "ms",    "dr",   "prof", "sr",   "jr",   "st",  "vs",
    "etc",  "e.g",  "i.e",   "inc",  "ltd",  "co",   "corp", "jan", "feb",
    "mar",  "apr",  "jun",   "jul",  "aug",  "sep",  "sept", "oct", "nov",
    "dec",  "fig",  "figs",  "al",   "approx", "dept", "est", "gen", "gov",
    "lt",   "col",  "capt",  "rev",  "u.s",  "u.k",  "a.m", "p.m"};

bool is_ascii_terminator(char32_t cp) { return cp == '.' || cp == '!' || cp == '?'; }

// 。！？；
bool is_cjk_terminator(char32_t cp) {
  return cp == 0x3002 || cp == 0xFF01 || cp == 0xFF1F || cp == 0xFF1B;
}

bool is_closer(char32_t cp) {
  switch (cp) {
    case '"':
    case '\'':
    case ')':
    case ']':
    case 0x2019:  // ’
    case 0x201D:  // ”
    case 0x300D:  // 」
    case 0x300F:  // 』
    case 0x300B:  // 》
    case 0xFF09:  // ）
      return true;
    default:
      return false;
  }
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// The word ending right before `dot` (exclusive), without leading brackets
// or quotes.
std::string_view word_before(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0) {
    const std::size_t prev = unicode::previous_boundary(text, begin);
    if (unicode::is_space(decode(text, prev).code_point)) break;
    begin = prev;
  }
  std::string_view word = text.substr(begin, dot - begin);
  while (!word.empty() && (word.front() == '(' || word.front() == '"' ||
                           word.front() == '\'' || word.front() == '[')) {
    word.remove_prefix(1);
  }
  return word;
}

bool is_abbreviation(std::string_view word) {
  const std::string lower = lower_ascii(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) !=
         kAbbreviations.end();
}

// First non-space code point at or after `pos`, or 0 at end of text.
char32_t next_visible(std::string_view text, std::size_t pos) {
  while (pos < text.size()) {
    const auto d = decode(text, pos);
    if (!unicode::is_space(d.code_point)) return d.code_point;
    pos += d.length;
  }
  return 0;
}

std::size_t skip_closers(std::string_view text, std::size_t pos) {
  while (pos < text.size()) {
    const auto d = decode(text, pos);
    if (!is_closer(d.code_point)) break;
    pos += d.length;
  }
  return pos;
}

// True when the newline at `pos` starts a blank line.
bool starts_blank_line(std::string_view text, std::size_t pos) {
  for (std::size_t i = pos + 1; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return false;
}

void push_span(std::vector<SentenceSpan>& out, std::string_view text,
               std::size_t begin, std::size_t end) {
  const std::string_view piece = unicode::trim(text.substr(begin, end - begin));
  if (piece.empty()) return;
  const std::size_t offset = static_cast<std::size_t>(piece.data() - text.data());
  out.push_back(SentenceSpan{out.size(), {offset, offset + piece.size()},
                             std::string(piece)});
}

std::vector<ByteRange> approximate_tokenize(std::string_view text) {
  std::vector<ByteRange> tokens;
  std::optional<std::size_t> word_start;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto d = decode(text, pos);
    if (unicode::is_space(d.code_point) || unicode::is_cjk(d.code_point)) {
      if (word_start) tokens.push_back({*word_start, pos});
      word_start.reset();
      if (unicode::is_cjk(d.code_point)) tokens.push_back({pos, pos + d.length});
    } else if (!word_start) {
      word_start = pos;
    }
    pos += d.length;
  }
  if (word_start) tokens.push_back({*word_start, text.size()});
  return tokens;
}

}  // namespace

std::string_view to_string(Language language) {
  switch (language) {
    case Language::English:
      return "en";
    case Language::Chinese:
      return "zh";
    case Language::Mixed:
      return "mixed";
  }
  return "en";
}

std::optional<Language> parse_language(std::string_view name) {
  const std::string lower = lower_ascii(name);
  if (lower == "en" || lower == "english") return Language::English;
  if (lower == "zh" || lower == "chinese") return Language::Chinese;
  if (lower == "mixed") return Language::Mixed;
  return std::nullopt;
}

Language detect_language(std::string_view text) {
  std::size_t visible = 0;
  std::size_t cjk = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = decode(text, pos);
    if (!unicode::is_space(d.code_point)) {
      ++visible;
      if (unicode::is_cjk(d.code_point)) ++cjk;
    }
    pos += d.length;
  }
  if (visible == 0) return Language::English;
  if (cjk * 2 > visible) return Language::Chinese;
  if (cjk * 20 > visible) return Language::Mixed;
  return Language::English;
}

TokenCounter::TokenCounter(std::string name, Tokenizer tokenize)
    : name_(std::move(name)), tokenize_(std::move(tokenize)) {}

TokenCounter TokenCounter::approximate() {
  return TokenCounter("approx-words+cjk", approximate_tokenize);
}

std::size_t TokenCounter::count(std::string_view text) const {
  return tokenize_(text).size();
}

std::size_t count_tokens(const TokenCounter& counter, std::string_view text) {
  return counter.count(text);
}

std::vector<SentenceSpan> split_sentences(std::string_view text,
                                          Language language) {
  std::vector<SentenceSpan> spans;
  const bool cjk_rules = language != Language::English;
  std::optional<std::size_t> start;
  std::size_t pos = 0;
  char32_t prev_cp = 0;  // code point before `pos` within the current sentence

  while (pos < text.size()) {
    const auto d = decode(text, pos);
    const char32_t cp = d.code_point;
    if (!start) {
      if (unicode::is_space(cp)) {
        pos += d.length;
        continue;
      }
      start = pos;
      prev_cp = 0;
    }

    std::optional<std::size_t> boundary;
    std::size_t next = pos + d.length;

    if (cjk_rules && is_cjk_terminator(cp)) {
      std::size_t end = pos + d.length;
      while (end < text.size()) {
        const auto n = decode(text, end);
        if (!is_cjk_terminator(n.code_point) && !is_ascii_terminator(n.code_point)) break;
        end += n.length;
      }
      boundary = skip_closers(text, end);
    } else if (is_ascii_terminator(cp)) {
      std::size_t end = pos + d.length;
      bool only_period = cp == '.';
      while (end < text.size() && is_ascii_terminator(static_cast<unsigned char>(text[end]))) {
        only_period = only_period && text[end] == '.';
        ++end;
      }
      const std::size_t run_length = end - pos;
      end = skip_closers(text, end);
      if (cjk_rules && unicode::is_cjk(prev_cp)) {
        boundary = end;
      } else if (end == text.size() || unicode::is_space(decode(text, end).code_point)) {
        bool guarded = false;
        if (only_period) {
          if (run_length == 1 && is_abbreviation(word_before(text, pos))) guarded = true;
          if (unicode::is_ascii_lower(next_visible(text, end))) guarded = true;
        }
        if (!guarded) boundary = end;
      }
      // The terminator run and its closers are examined once, as a unit.
      next = end;
    } else if (cp == '\n' && starts_blank_line(text, pos)) {
      boundary = pos;
    }

    if (boundary) {
      push_span(spans, text, *start, *boundary);
      start.reset();
      pos = *boundary == pos ? pos + d.length : *boundary;
      continue;
    }
    prev_cp = decode(text, unicode::previous_boundary(text, next)).code_point;
    pos = next;
  }
  if (start) push_span(spans, text, *start, text.size());
  return spans;
}

std::vector<Chunk> build_chunks(std::string_view text,
                                const TokenCounter& counter,
                                std::size_t chunk_size,
                                std::span<const SentenceSpan> sentences) {
  if (chunk_size == 0) throw InvalidArgument("chunk_size must be >= 1");
  std::vector<Chunk> chunks;
  if (text.empty()) return chunks;

  const std::vector<ByteRange> tokens = counter.tokenize(text);
  if (tokens.empty()) {
    chunks.push_back(Chunk{0, {0, text.size()}, 0, {}});
  } else {
    const std::size_t n_chunks = (tokens.size() + chunk_size - 1) / chunk_size;
    for (std::size_t i = 0; i < n_chunks; ++i) {
      const std::size_t first = i * chunk_size;
      const std::size_t last = std::min(first + chunk_size, tokens.size());
      const std::size_t begin = i == 0 ? 0 : tokens[first].begin;
      const std::size_t end = i + 1 == n_chunks ? text.size() : tokens[last].begin;
      chunks.push_back(Chunk{i, {begin, end}, last - first, {}});
    }
  }

  std::size_t s = 0;
  for (Chunk& chunk : chunks) {
    while (s < sentences.size() && sentences[s].range.end <= chunk.range.begin) ++s;
    for (std::size_t j = s; j < sentences.size() && sentences[j].range.begin < chunk.range.end; ++j) {
      if (sentences[j].range.overlaps(chunk.range)) chunk.covered_sentences.push_back(j);
    }
  }
  return chunks;
}

Context Context::build(std::string raw_text, const TokenCounter& counter,
                       std::size_t chunk_size,
                       std::optional<Language> language) {
  Context context;
  context.raw_text_ = std::move(raw_text);
  context.language_ = language.value_or(detect_language(context.raw_text_));
  context.sentences_ = split_sentences(context.raw_text_, context.language_);
  context.chunks_ = build_chunks(context.raw_text_, counter, chunk_size,
                                 context.sentences_);
  context.chunk_size_ = chunk_size;
  context.counter_name_ = counter.name();
  return context;
}

std::string_view Context::chunk_text(std::size_t chunk_id) const {
  if (chunk_id >= chunks_.size()) {
    throw InvalidArgument("chunk id " + std::to_string(chunk_id) + " out of range");
  }
  return slice(chunks_[chunk_id].range);
}

std::string_view Context::sentence_range_text(std::size_t first,
                                              std::size_t last) const {
  if (first > last || last >= sentences_.size()) {
    throw InvalidArgument("sentence range [" + std::to_string(first) + "-" +
                          std::to_string(last) + "] out of range");
  }
  return slice({sentences_[first].range.begin, sentences_[last].range.end});
}

std::string render_numbered(std::string_view raw_text,
                            std::span<const NumberedUnit> units) {
  std::string out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const ByteRange& range = units[i].range;
    out += "<C";
    out += std::to_string(units[i].label);
    out += '>';
    out.append(raw_text.substr(range.begin, range.size()));
    if (i + 1 < units.size()) {
      const ByteRange& next = units[i + 1].range;
      const std::string_view gap =
          next.begin >= range.end ? raw_text.substr(range.end, next.begin - range.end)
                                  : std::string_view();
      const bool adjacent = !gap.empty() || next.begin == range.end;
      if (adjacent && unicode::trim(gap).empty()) {
        out.append(gap);
      } else if (!unicode::is_space(static_cast<unsigned char>(out.back()))) {
        out += ' ';
      }
    }
  }
  return out;
}

std::string render_numbered_sentences(const Context& context) {
  std::vector<NumberedUnit> units;
  units.reserve(context.sentences().size());
  for (const SentenceSpan& s : context.sentences()) units.push_back({s.id, s.range});
  return render_numbered(context.raw_text(), units);
}

ExpandedChunk expand_chunk(const Context& context, std::size_t chunk_id) {
  const auto& chunks = context.chunks();
  if (chunk_id >= chunks.size()) {
    throw InvalidArgument("chunk id " + std::to_string(chunk_id) +
                          " out of range (" + std::to_string(chunks.size()) +
                          " chunks)");
  }
  const std::size_t first = chunk_id == 0 ? 0 : chunk_id - 1;
  const std::size_t last = std::min(chunk_id + 1, chunks.size() - 1);

  ExpandedChunk expanded;
  expanded.region = {chunks[first].range.begin, chunks[last].range.end};
  std::vector<NumberedUnit> units;
  for (const SentenceSpan& s : context.sentences()) {
    if (!expanded.region.contains(s.range)) continue;
    units.push_back({expanded.local_to_global.size(), s.range});
    expanded.local_to_global.push_back(s.id);
  }
  expanded.numbered_text = render_numbered(context.raw_text(), units);
  return expanded;
}

}  // namespace lqac
