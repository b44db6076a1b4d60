#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lqac/citemark.hpp"
#include "lqac/modelgate.hpp"
#include "lqac/prompts.hpp"
#include "lqac/retrieval.hpp"
#include "lqac/textseg.hpp"

namespace lqac {

struct PipelineConfig {
  std::size_t chunk_size = 128;
  RetrievalConfig retrieval;
  double min_cited_fraction = 0.2;
  std::size_t question_fanout = 5;
  // Documents outside [min, max] tokens are rejected before any model call.
  std::size_t min_document_tokens = 1;
  std::size_t max_document_tokens = 131072;
  // Concurrent extraction calls within one instance.
  std::size_t extraction_parallelism = 1;
  // Unset: the backend's default sampling for question and answer generation.
  std::optional<double> generation_temperature;
  // Citation insertion and extraction are run greedily.
  double citation_temperature = 0.0;
  std::size_t max_output_tokens = 2048;
  std::string model_name;

  void validate() const;  // throws ConfigError
};

// Everything a pipeline run talks to.
struct ModelSuite {
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<Scorer> scorer;
  PromptSet prompts = PromptSet::defaults();
  TokenCounter counter = TokenCounter::approximate();
};

struct Document {
  std::string id;
  std::string text;
  std::optional<Language> language;
};

struct QAInstance {
  std::string query;
  std::string answer;
  TaskType task_type = TaskType::General;
  Language language = Language::English;
};

// ---- Stage 1 -------------------------------------------------------------

struct QuestionList {
  std::vector<std::string> questions;
  std::vector<std::string> warnings;
};

// Parses "1: ...", "2. ...", "3) ..." style lines, keeping at most `limit`.
// Throws MalformedGeneration when nothing parses.
QuestionList parse_question_list(std::string_view output, std::size_t limit);

QuestionList generate_questions(const Context& context, TaskType type, const ModelSuite& models,
                                const PipelineConfig& config);

// Seed for one named random decision about one document.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view document_id, std::string_view purpose);
// Uniform index in [0, n) from a seeded generator; identical on every platform.
std::size_t seeded_index(std::uint64_t seed, std::size_t n);
const std::string& select_question(std::span<const std::string> questions, std::uint64_t seed);

// Throws MalformedGeneration on an empty answer.
std::string generate_answer(const Context& context, std::string_view query, const ModelSuite& models,
                            const PipelineConfig& config);

// ---- Stage 2 -------------------------------------------------------------

struct CoarseCitations {
  // Chunk-level; citation ids are 1-based snippet numbers.
  AnnotatedResponse response;
  std::string raw_output;
  std::vector<std::string> warnings;
  // Statements whose text does not occur in the original answer.
  std::vector<std::size_t> altered_statements;
  // Statement texts concatenate to the answer up to whitespace.
  bool answer_preserved = true;
};

// Throws MalformedGeneration when the output contains no statements.
CoarseCitations add_chunk_citations(std::string_view query, std::string_view answer,
                                    std::span<const std::string> snippets, const ModelSuite& models,
                                    const PipelineConfig& config);

// ---- Stage 3 -------------------------------------------------------------

struct ExtractionOutput {
  std::vector<CitationSpan> local_spans;
  bool no_relevant_information = false;
  std::vector<std::string> warnings;
};

// Spans take precedence over the sentinel. Spans outside [0, local_count)
// or reversed are dropped with a warning. Throws MalformedGeneration when
// the output has neither spans nor the sentinel.
ExtractionOutput parse_extraction_output(std::string_view output, std::size_t local_count);

struct Extraction {
  std::size_t chunk_id = 0;
  std::vector<std::size_t> local_to_global;
  std::string raw_output;
  std::vector<CitationSpan> spans;  // global, merged
  bool no_relevant_information = false;
  // True when the expanded chunk held no complete sentence; no call was made.
  bool skipped = false;
  std::vector<std::string> warnings;
};

Extraction extract_sentence_citations(const Statement& statement, std::size_t chunk_id,
                                      const Context& context, const ModelSuite& models,
                                      const PipelineConfig& config);

// ---- Stage 4 -------------------------------------------------------------

enum class FilterDecision { Keep, Discard };

double cited_fraction(const AnnotatedResponse& response);
// Keep iff cited/total >= threshold; an empty response is discarded.
FilterDecision filter_instance(const AnnotatedResponse& response, double threshold);

// ---- Composition ---------------------------------------------------------

struct StatementTrace {
  std::vector<std::size_t> cited_snippets;  // 1-based, as emitted in stage 2
  std::vector<std::size_t> cited_chunks;    // global chunk ids
  std::vector<Extraction> extractions;
};

struct CitationTrace {
  std::vector<std::size_t> retrieved_chunks;
  std::string coarse_output;
  bool answer_preserved = true;
  std::vector<std::size_t> altered_statements;
  std::vector<StatementTrace> statements;
  std::vector<std::string> warnings;
};

struct AnnotatedAnswer {
  AnnotatedResponse response;  // sentence-level, global ids
  CitationTrace trace;
};

// Stages 2 and 3 for an existing question and answer.
AnnotatedAnswer annotate_answer(const Context& context, std::string_view query,
                                std::string_view answer, const ModelSuite& models,
                                const PipelineConfig& config);

struct Provenance {
  std::uint64_t seed = 0;
  std::optional<TaskType> task_type;
  std::vector<std::string> candidate_questions;
  std::optional<std::size_t> selected_question;
  std::string vanilla_answer;
  CitationTrace citations;
  double cited_fraction = 0;
  std::string prompt_digest;
  std::map<std::string, std::string> demonstration_hashes;
  std::string counter;
  std::string segmenter;
  std::string scorer;
  std::size_t chunk_size = 0;
  std::size_t sentence_count = 0;
  std::vector<std::string> warnings;
};

struct LqacInstance {
  std::string id;
  std::string instruction;
  std::string context;
  Language language = Language::English;
  std::string query;
  AnnotatedResponse annotated_answer;
  Provenance provenance;
};

enum class CofStatus { Kept, Discarded, Failed };
std::string_view to_string(CofStatus status);

struct CofOutcome {
  CofStatus status = CofStatus::Failed;
  // Populated as far as the pipeline got.
  LqacInstance instance;
  std::string reason;
};

// Stages 1 to 4. Model errors other than MalformedGeneration propagate.
CofOutcome run_cof(const Document& document, const PipelineConfig& config, const ModelSuite& models,
                   std::uint64_t seed);

// Stages 2 to 4 on a question/answer pair that already exists.
CofOutcome run_cof_on_qa(const Document& document, const QAInstance& qa, const PipelineConfig& config,
                         const ModelSuite& models, std::uint64_t seed);

nlohmann::ordered_json to_json(const AnnotatedResponse& response);
nlohmann::ordered_json to_json(const LqacInstance& instance);
nlohmann::ordered_json to_json(const CofOutcome& outcome);

}  // namespace lqac
