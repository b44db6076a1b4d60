#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lqac {

enum class Granularity { ChunkLevel, SentenceLevel };

std::string_view to_string(Granularity granularity);
std::optional<Granularity> parse_granularity(std::string_view name);

// Inclusive interval of chunk or sentence indices. Chunk-level spans are
// always singletons.
struct CitationSpan {
  Granularity kind = Granularity::SentenceLevel;
  std::size_t start = 0;
  std::size_t end = 0;

  static CitationSpan sentence(std::size_t start, std::size_t end) {
    return {Granularity::SentenceLevel, start, end};
  }
  static CitationSpan chunk(std::size_t id) {
    return {Granularity::ChunkLevel, id, id};
  }
  friend bool operator==(const CitationSpan&, const CitationSpan&) = default;
};

struct Statement {
  std::string text;
  std::vector<CitationSpan> citations;

  friend bool operator==(const Statement&, const Statement&) = default;
};

struct AnnotatedResponse {
  std::vector<Statement> statements;
  Granularity granularity = Granularity::SentenceLevel;

  std::size_t cited_statement_count() const;
  std::size_t citation_count() const;
  friend bool operator==(const AnnotatedResponse&, const AnnotatedResponse&) = default;
};

struct ParseWarning {
  std::size_t offset = 0;  // byte offset into the parsed text
  std::string message;
};

struct ParseResult {
  AnnotatedResponse response;
  std::vector<ParseWarning> warnings;
};

// Total parser for `<statement>..<cite>[a-b][k]</cite></statement>` markup.
// Citation indices must satisfy min_index <= a <= b <= max_index; anything
// else is dropped with a warning. Text outside statement blocks becomes a
// citation-free statement (with a warning). Never throws on any input.
ParseResult parse_annotated(std::string_view text, Granularity granularity,
                            std::size_t max_index, std::size_t min_index = 0);

// Sentence spans render as [a-b] (singletons as [k-k]); chunk spans as [k].
std::string serialize_annotated(const AnnotatedResponse& response);

// Removes statement tags and cite blocks; everything else is kept verbatim.
std::string strip_citations(std::string_view text);

// Sorts, deduplicates and coalesces overlapping or adjacent spans.
std::vector<CitationSpan> merge_spans(std::span<const CitationSpan> spans);

// Maps local sentence ids through `local_to_global`, then merges. Throws
// InvalidArgument when a span references an unmapped local id.
std::vector<CitationSpan> normalize_spans(
    std::span<const CitationSpan> spans,
    std::span<const std::size_t> local_to_global);

// One bracketed token such as "[3]" or "[4-6]" found in free text.
struct CitationToken {
  std::size_t offset = 0;
  std::string raw;
  // Unset when the bracket content is not a well-formed index or range.
  std::optional<std::size_t> start;
  std::optional<std::size_t> end;
};

std::vector<CitationToken> scan_citation_tokens(std::string_view text);

}  // namespace lqac
