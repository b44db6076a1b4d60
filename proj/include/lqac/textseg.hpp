#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lqac {

enum class Language { English, Chinese, Mixed };

std::string_view to_string(Language language);
// Accepts "en"/"english", "zh"/"chinese", "mixed" (case-insensitive).
std::optional<Language> parse_language(std::string_view name);
// Chinese when more than half of the non-space code points are CJK, Mixed when
// any meaningful share is, English otherwise.
Language detect_language(std::string_view text);

// Half-open byte offsets into a document.
struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(const ByteRange& other) const {
    return begin <= other.begin && other.end <= end;
  }
  bool overlaps(const ByteRange& other) const {
    return begin < other.end && other.begin < end;
  }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct SentenceSpan {
  std::size_t id = 0;
  ByteRange range;
  std::string text;

  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

struct Chunk {
  std::size_t id = 0;
  ByteRange range;
  std::size_t token_count = 0;
  // Sentences fully or partially inside `range`.
  std::vector<std::size_t> covered_sentences;
};

// A pluggable tokenizer. Counting is the number of token ranges it yields;
// chunking needs the ranges themselves so boundaries never split a token.
class TokenCounter {
 public:
  using Tokenizer = std::function<std::vector<ByteRange>(std::string_view)>;

  TokenCounter(std::string name, Tokenizer tokenize);

  // Whitespace-delimited words count one token each, every CJK code point
  // counts one token.
  static TokenCounter approximate();

  const std::string& name() const { return name_; }
  std::vector<ByteRange> tokenize(std::string_view text) const {
    return tokenize_(text);
  }
  std::size_t count(std::string_view text) const;

 private:
  std::string name_;
  Tokenizer tokenize_;
};

std::size_t count_tokens(const TokenCounter& counter, std::string_view text);

// Version tag of the frozen abbreviation/terminator tables.
inline constexpr std::string_view kSegmenterVersion = "rules-v1";

std::vector<SentenceSpan> split_sentences(std::string_view text,
                                          Language language);

// Greedy token packing. Every chunk but the last holds exactly `chunk_size`
// tokens and the chunk ranges tile the whole text. `sentences`, when given,
// fills Chunk::covered_sentences.
std::vector<Chunk> build_chunks(std::string_view text,
                                const TokenCounter& counter,
                                std::size_t chunk_size = 128,
                                std::span<const SentenceSpan> sentences = {});

// Immutable document with its sentence and chunk indexes.
class Context {
 public:
  static Context build(std::string raw_text, const TokenCounter& counter,
                       std::size_t chunk_size = 128,
                       std::optional<Language> language = std::nullopt);

  const std::string& raw_text() const { return raw_text_; }
  Language language() const { return language_; }
  const std::vector<SentenceSpan>& sentences() const { return sentences_; }
  const std::vector<Chunk>& chunks() const { return chunks_; }
  std::size_t chunk_size() const { return chunk_size_; }
  const std::string& counter_name() const { return counter_name_; }

  std::string_view slice(const ByteRange& range) const {
    return std::string_view(raw_text_).substr(range.begin, range.size());
  }
  std::string_view chunk_text(std::size_t chunk_id) const;
  // Document text from the start of sentence `first` to the end of `last`,
  // inclusive, with the original inter-sentence whitespace.
  std::string_view sentence_range_text(std::size_t first,
                                       std::size_t last) const;

 private:
  Context() = default;

  std::string raw_text_;
  Language language_ = Language::English;
  std::vector<SentenceSpan> sentences_;
  std::vector<Chunk> chunks_;
  std::size_t chunk_size_ = 128;
  std::string counter_name_;
};

// One unit in a numbered rendering: the printed label and the unit's range.
struct NumberedUnit {
  std::size_t label = 0;
  ByteRange range;
};

// Renders units as `<C{label}>{text}`. Whitespace between two units that are
// adjacent in the document is kept after the earlier unit; units that are not
// adjacent are separated by one space unless the earlier one already ends
// in whitespace.
std::string render_numbered(std::string_view raw_text,
                            std::span<const NumberedUnit> units);

// `<C0>s0 <C1>s1 ...` over the whole sentence index.
std::string render_numbered_sentences(const Context& context);

struct ExpandedChunk {
  std::string numbered_text;
  // local sentence id -> global sentence id; strictly increasing.
  std::vector<std::size_t> local_to_global;
  ByteRange region;
};

// Joins a chunk with its neighbours and keeps only sentences lying wholly in
// the joined region, renumbered from 0. Throws InvalidArgument for a bad id.
ExpandedChunk expand_chunk(const Context& context, std::size_t chunk_id);

}  // namespace lqac
