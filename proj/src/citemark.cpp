#include "lqac/citemark.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

#include "lqac/error.hpp"
#include "lqac/unicode.hpp"

namespace lqac {
namespace {

constexpr std::string_view kOpenStatement = "<statement>";
constexpr std::string_view kCloseStatement = "</statement>";
constexpr std::string_view kOpenCite = "<cite>";
constexpr std::string_view kCloseCite = "</cite>";

bool at(std::string_view text, std::size_t pos, std::string_view tag) {
  return text.compare(pos, tag.size(), tag) == 0;
}

std::size_t next_statement_tag(std::string_view text, std::size_t from) {
  return std::min(text.find(kOpenStatement, from), text.find(kCloseStatement, from));
}

bool is_token_char(char c) {
  return (c >= '0' && c <= '9') || c == '[' || c == ']' || c == '-' ||
         c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

// Where a cite block that opens at `body_begin` ends. A block closes at
// `</cite>` unless a statement tag comes first; an unclosed block only
// swallows the run of citation-token characters that follows it.
struct CiteExtent {
  std::size_t body_end;
  std::size_t resume;
  bool closed;
};

CiteExtent cite_extent(std::string_view text, std::size_t body_begin) {
  const std::size_t close = text.find(kCloseCite, body_begin);
  if (close != std::string_view::npos && close <= next_statement_tag(text, body_begin)) {
    return {close, close + kCloseCite.size(), true};
  }
  std::size_t end = body_begin;
  while (end < text.size() && is_token_char(text[end])) ++end;
  return {end, end, false};
}

std::optional<std::size_t> parse_index(std::string_view digits) {
  if (digits.empty()) return std::nullopt;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec == std::errc::result_out_of_range) return std::numeric_limits<std::size_t>::max();
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

std::string_view trim_ascii(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

class Parser {
 public:
  Parser(std::string_view text, Granularity granularity, std::size_t max_index,
         std::size_t min_index)
      : text_(text), max_index_(max_index), min_index_(min_index) {
    result_.response.granularity = granularity;
  }

  ParseResult run() {
    std::size_t pos = 0;
    while (pos < text_.size()) {
      const std::size_t lt = text_.find('<', pos);
      if (lt == std::string_view::npos) {
        append_text(text_.substr(pos), pos);
        break;
      }
      append_text(text_.substr(pos, lt - pos), pos);
      pos = handle_tag(lt);
    }
    if (in_statement_) {
      warn(text_.size(), "unclosed <statement> at end of input");
      close_statement();
    }
    flush_outside();
    return std::move(result_);
  }

 private:
  std::size_t handle_tag(std::size_t lt) {
    if (at(text_, lt, kOpenStatement)) {
      if (in_statement_) {
        warn(lt, "nested <statement> flattened");
      } else {
        flush_outside();
        in_statement_ = true;
        current_ = Statement{};
      }
      return lt + kOpenStatement.size();
    }
    if (at(text_, lt, kCloseStatement)) {
      if (in_statement_) {
        close_statement();
      } else {
        warn(lt, "stray </statement> ignored");
      }
      return lt + kCloseStatement.size();
    }
    if (at(text_, lt, kOpenCite)) {
      const std::size_t body_begin = lt + kOpenCite.size();
      const CiteExtent extent = cite_extent(text_, body_begin);
      if (!extent.closed) warn(lt, "unclosed <cite>");
      if (!in_statement_) {
        warn(lt, "citation outside any statement dropped");
      } else {
        parse_cite_body(body_begin, extent.body_end);
      }
      return extent.resume;
    }
    if (at(text_, lt, kCloseCite)) {
      warn(lt, "stray </cite> ignored");
      return lt + kCloseCite.size();
    }
    append_text(text_.substr(lt, 1), lt);
    return lt + 1;
  }

  void parse_cite_body(std::size_t begin, std::size_t end) {
    const std::string_view body = text_.substr(begin, end - begin);
    bool stray_text = false;
    std::size_t last_token_end = 0;
    for (const CitationToken& token : scan_citation_tokens(body)) {
      stray_text = stray_text || has_stray_text(body.substr(last_token_end, token.offset - last_token_end));
      last_token_end = token.offset + token.raw.size();
      const std::size_t where = begin + token.offset;
      if (!token.start) {
        warn(where, "malformed citation token " + token.raw);
        continue;
      }
      const std::size_t a = *token.start;
      const std::size_t b = *token.end;
      if (a > b) {
        warn(where, "reversed citation span " + token.raw + " dropped");
        continue;
      }
      if (a < min_index_ || b > max_index_) {
        warn(where, "citation " + token.raw + " out of range dropped");
        continue;
      }
      if (result_.response.granularity == Granularity::SentenceLevel) {
        current_.citations.push_back(CitationSpan::sentence(a, b));
      } else {
        for (std::size_t k = a;; ++k) {
          current_.citations.push_back(CitationSpan::chunk(k));
          if (k == b) break;
        }
      }
    }
    stray_text = stray_text || has_stray_text(body.substr(std::min(last_token_end, body.size())));
    if (stray_text) warn(begin, "unexpected text inside <cite> ignored");
  }

  static bool has_stray_text(std::string_view gap) {
    for (char c : gap) {
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != ',') return true;
    }
    return false;
  }

  void append_text(std::string_view piece, std::size_t offset) {
    if (piece.empty()) return;
    if (in_statement_) {
      current_.text.append(piece);
    } else {
      if (outside_.empty()) outside_offset_ = offset;
      outside_.append(piece);
    }
  }

  void close_statement() {
    result_.response.statements.push_back(std::move(current_));
    current_ = Statement{};
    in_statement_ = false;
  }

  void flush_outside() {
    const std::string_view trimmed = unicode::trim(outside_);
    if (!trimmed.empty()) {
      warn(outside_offset_, "text outside <statement> kept as uncited statement");
      result_.response.statements.push_back(Statement{std::string(trimmed), {}});
    }
    outside_.clear();
  }

  void warn(std::size_t offset, std::string message) {
    result_.warnings.push_back(ParseWarning{offset, std::move(message)});
  }

  std::string_view text_;
  std::size_t max_index_;
  std::size_t min_index_;
  ParseResult result_;
  bool in_statement_ = false;
  Statement current_;
  std::string outside_;
  std::size_t outside_offset_ = 0;
};

}  // namespace

std::string_view to_string(Granularity granularity) {
  return granularity == Granularity::ChunkLevel ? "chunk" : "sentence";
}

std::optional<Granularity> parse_granularity(std::string_view name) {
  if (name == "chunk") return Granularity::ChunkLevel;
  if (name == "sentence") return Granularity::SentenceLevel;
  return std::nullopt;
}

std::size_t AnnotatedResponse::cited_statement_count() const {
  return static_cast<std::size_t>(std::count_if(
      statements.begin(), statements.end(),
      [](const Statement& s) { return !s.citations.empty(); }));
}

std::size_t AnnotatedResponse::citation_count() const {
  std::size_t n = 0;
  for (const Statement& s : statements) n += s.citations.size();
  return n;
}

std::vector<CitationToken> scan_citation_tokens(std::string_view text) {
  std::vector<CitationToken> tokens;
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    const std::size_t close = text.find(']', pos + 1);
    const std::size_t reopen = text.find('[', pos + 1);
    if (close == std::string_view::npos) {
      tokens.push_back(CitationToken{pos, std::string(text.substr(pos)), {}, {}});
      break;
    }
    if (reopen < close) {
      tokens.push_back(CitationToken{pos, std::string(text.substr(pos, reopen - pos)), {}, {}});
      pos = reopen;
      continue;
    }
    CitationToken token{pos, std::string(text.substr(pos, close - pos + 1)), {}, {}};
    const std::string_view content = trim_ascii(text.substr(pos + 1, close - pos - 1));
    const std::size_t dash = content.find('-');
    if (dash == std::string_view::npos) {
      token.start = parse_index(content);
      token.end = token.start;
    } else {
      const auto a = parse_index(trim_ascii(content.substr(0, dash)));
      const auto b = parse_index(trim_ascii(content.substr(dash + 1)));
      if (a && b) {
        token.start = a;
        token.end = b;
      }
    }
    tokens.push_back(std::move(token));
    pos = close + 1;
  }
  return tokens;
}

ParseResult parse_annotated(std::string_view text, Granularity granularity,
                            std::size_t max_index, std::size_t min_index) {
  return Parser(text, granularity, max_index, min_index).run();
}

std::string serialize_annotated(const AnnotatedResponse& response) {
  std::string out;
  for (const Statement& statement : response.statements) {
    out += kOpenStatement;
    out += statement.text;
    out += kOpenCite;
    for (const CitationSpan& span : statement.citations) {
      out += '[';
      out += std::to_string(span.start);
      if (response.granularity == Granularity::SentenceLevel) {
        out += '-';
        out += std::to_string(span.end);
      }
      out += ']';
    }
    out += kCloseCite;
    out += kCloseStatement;
  }
  return out;
}

std::string strip_citations(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t lt = text.find('<', pos);
    if (lt == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, lt - pos));
    if (at(text, lt, kOpenStatement)) {
      pos = lt + kOpenStatement.size();
    } else if (at(text, lt, kCloseStatement)) {
      pos = lt + kCloseStatement.size();
    } else if (at(text, lt, kOpenCite)) {
      pos = cite_extent(text, lt + kOpenCite.size()).resume;
    } else if (at(text, lt, kCloseCite)) {
      pos = lt + kCloseCite.size();
    } else {
      out += '<';
      pos = lt + 1;
    }
  }
  return out;
}

std::vector<CitationSpan> merge_spans(std::span<const CitationSpan> spans) {
  std::vector<CitationSpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end(), [](const CitationSpan& a, const CitationSpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  std::vector<CitationSpan> merged;
  for (const CitationSpan& span : sorted) {
    if (!merged.empty() && (span.start == 0 || span.start - 1 <= merged.back().end)) {
      merged.back().end = std::max(merged.back().end, span.end);
    } else {
      merged.push_back(CitationSpan::sentence(span.start, span.end));
    }
  }
  return merged;
}

std::vector<CitationSpan> normalize_spans(
    std::span<const CitationSpan> spans,
    std::span<const std::size_t> local_to_global) {
  std::vector<CitationSpan> mapped;
  for (const CitationSpan& span : spans) {
    if (span.start > span.end || span.end >= local_to_global.size()) {
      throw InvalidArgument("citation span [" + std::to_string(span.start) + "-" +
                            std::to_string(span.end) + "] has no mapping");
    }
    // Local ids map to global ids one by one; non-contiguous images split.
    for (std::size_t local = span.start; local <= span.end; ++local) {
      const std::size_t global = local_to_global[local];
      mapped.push_back(CitationSpan::sentence(global, global));
    }
  }
  return merge_spans(mapped);
}

}  // namespace lqac
