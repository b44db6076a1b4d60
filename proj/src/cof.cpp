#include "lqac/cof.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <random>
#include <set>

#include "lqac/digest.hpp"
#include "lqac/error.hpp"
#include "lqac/parallel.hpp"
#include "lqac/unicode.hpp"

namespace lqac {

using nlohmann::ordered_json;

void PipelineConfig::validate() const {
  if (chunk_size == 0) throw ConfigError("chunk_size must be >= 1");
  if (retrieval.l_max == 0 || retrieval.k == 0) throw ConfigError("retrieval l_max and k must be >= 1");
  if (!(min_cited_fraction >= 0.0 && min_cited_fraction <= 1.0)) {
    throw ConfigError("min_cited_fraction must lie in [0, 1]");
  }
  if (question_fanout == 0) throw ConfigError("question_fanout must be >= 1");
  if (min_document_tokens > max_document_tokens) {
    throw ConfigError("min_document_tokens exceeds max_document_tokens");
  }
  if (extraction_parallelism == 0) throw ConfigError("extraction_parallelism must be >= 1");
  if (generation_temperature && *generation_temperature < 0) {
    throw ConfigError("generation_temperature must be >= 0");
  }
  if (citation_temperature < 0) throw ConfigError("citation_temperature must be >= 0");
}

namespace {

ChatRequest make_request(std::string prompt, std::optional<double> temperature,
                         const PipelineConfig& config) {
  ChatRequest request = ChatRequest::user(std::move(prompt), temperature, config.max_output_tokens);
  request.model_name = config.model_name;
  return request;
}

std::string_view strip_prefix(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix ? s.substr(prefix.size()) : s;
}

// "3: text" / "3. text" / "3) text" / "3：text" / "3、text" -> "text".
std::optional<std::string> numbered_item(std::string_view line) {
  line = unicode::trim(line);
  line = strip_prefix(line, "**");
  std::size_t digits = 0;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits == 0) return std::nullopt;
  line.remove_prefix(digits);
  line = strip_prefix(line, "**");
  bool delimited = false;
  for (std::string_view delim : {":", ".", ")", "：", "、", "．"}) {
    if (line.substr(0, delim.size()) == delim) {
      line.remove_prefix(delim.size());
      delimited = true;
      break;
    }
  }
  if (!delimited) return std::nullopt;
  line = strip_prefix(unicode::trim(line), "**");
  if (line.size() >= 2 && line.substr(line.size() - 2) == "**") line.remove_suffix(2);
  line = unicode::trim(line);
  if (line.empty()) return std::nullopt;
  return std::string(line);
}

std::string format_warning(const ParseWarning& w) {
  return "offset " + std::to_string(w.offset) + ": " + w.message;
}

std::vector<std::string> split_answer(std::string_view answer, Language language) {
  std::vector<std::string> out;
  for (auto& s : split_sentences(answer, language)) out.push_back(std::move(s.text));
  return out;
}

}  // namespace

QuestionList parse_question_list(std::string_view output, std::size_t limit) {
  QuestionList list;
  std::size_t pos = 0;
  while (pos <= output.size()) {
    std::size_t end = output.find('\n', pos);
    if (end == std::string_view::npos) end = output.size();
    if (auto item = numbered_item(output.substr(pos, end - pos))) {
      if (list.questions.size() < limit) {
        list.questions.push_back(std::move(*item));
      } else {
        list.warnings.push_back("ignored question beyond the first " + std::to_string(limit));
      }
    }
    pos = end + 1;
  }
  if (list.questions.empty()) throw MalformedGeneration("no numbered questions in model output");
  if (list.questions.size() < limit) {
    list.warnings.push_back("expected " + std::to_string(limit) + " questions, parsed " +
                            std::to_string(list.questions.size()));
  }
  return list;
}

QuestionList generate_questions(const Context& context, TaskType type, const ModelSuite& models,
                                const PipelineConfig& config) {
  const std::string prompt =
      models.prompts.question_generation(type, context.language(), context.raw_text());
  const std::string output =
      models.chat->complete(make_request(prompt, config.generation_temperature, config));
  return parse_question_list(output, config.question_fanout);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view document_id, std::string_view purpose) {
  const std::string hex =
      sha256_hex(std::to_string(seed) + '\x1f' + std::string(document_id) + '\x1f' + std::string(purpose));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::size_t seeded_index(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw InvalidArgument("cannot choose from an empty list");
  // Rejection sampling; std::uniform_int_distribution is not portable.
  std::mt19937_64 engine(seed);
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = engine();
  while (draw >= limit) draw = engine();
  return static_cast<std::size_t>(draw % range);
}

const std::string& select_question(std::span<const std::string> questions, std::uint64_t seed) {
  return questions[seeded_index(seed, questions.size())];
}

std::string generate_answer(const Context& context, std::string_view query, const ModelSuite& models,
                            const PipelineConfig& config) {
  const std::string prompt = models.prompts.vanilla_answer(context.raw_text(), query);
  std::string answer = models.chat->complete(make_request(prompt, config.generation_temperature, config));
  if (unicode::trim(answer).empty()) throw MalformedGeneration("model returned an empty answer");
  return answer;
}

CoarseCitations add_chunk_citations(std::string_view query, std::string_view answer,
                                    std::span<const std::string> snippets, const ModelSuite& models,
                                    const PipelineConfig& config) {
  CoarseCitations result;
  const std::string prompt = models.prompts.coarse_citation(snippets, query, answer);
  result.raw_output = models.chat->complete(make_request(prompt, config.citation_temperature, config));
  ParseResult parsed = parse_annotated(result.raw_output, Granularity::ChunkLevel, snippets.size(), 1);
  for (const auto& w : parsed.warnings) result.warnings.push_back(format_warning(w));
  result.response = std::move(parsed.response);
  if (result.response.statements.empty()) {
    throw MalformedGeneration("citation insertion produced no statements");
  }
  const std::string original = unicode::remove_space(answer);
  std::string joined;
  for (std::size_t i = 0; i < result.response.statements.size(); ++i) {
    const std::string text = unicode::remove_space(result.response.statements[i].text);
    joined += text;
    if (!text.empty() && original.find(text) == std::string::npos) {
      result.altered_statements.push_back(i);
    }
  }
  result.answer_preserved = joined == original;
  if (!result.answer_preserved) {
    result.warnings.push_back("statements do not reproduce the original answer");
  }
  return result;
}

ExtractionOutput parse_extraction_output(std::string_view output, std::size_t local_count) {
  ExtractionOutput result;
  bool saw_span = false;
  for (const CitationToken& token : scan_citation_tokens(output)) {
    if (!token.start) continue;  // e.g. the "[s1-e1]" placeholder echoed back
    saw_span = true;
    if (*token.start > *token.end) {
      result.warnings.push_back("reversed span " + token.raw + " dropped");
    } else if (*token.end >= local_count) {
      result.warnings.push_back("span " + token.raw + " beyond passage dropped");
    } else {
      result.local_spans.push_back(CitationSpan::sentence(*token.start, *token.end));
    }
  }
  if (saw_span) return result;
  std::string lowered(output);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered.find("no relevant information") != std::string::npos) {
    result.no_relevant_information = true;
    return result;
  }
  throw MalformedGeneration("extraction output has neither spans nor the no-information answer");
}

Extraction extract_sentence_citations(const Statement& statement, std::size_t chunk_id,
                                      const Context& context, const ModelSuite& models,
                                      const PipelineConfig& config) {
  Extraction result;
  result.chunk_id = chunk_id;
  const ExpandedChunk expanded = expand_chunk(context, chunk_id);
  result.local_to_global = expanded.local_to_global;
  if (expanded.local_to_global.empty()) {
    result.skipped = true;
    result.warnings.push_back("chunk " + std::to_string(chunk_id) +
                              " has no complete sentence after expansion; extraction skipped");
    return result;
  }
  const std::string prompt = models.prompts.fine_extraction(
      expanded.numbered_text, unicode::trim(statement.text));
  result.raw_output = models.chat->complete(make_request(prompt, config.citation_temperature, config));
  ExtractionOutput parsed = parse_extraction_output(result.raw_output, expanded.local_to_global.size());
  result.no_relevant_information = parsed.no_relevant_information;
  result.warnings = std::move(parsed.warnings);
  result.spans = normalize_spans(parsed.local_spans, expanded.local_to_global);
  return result;
}

double cited_fraction(const AnnotatedResponse& response) {
  if (response.statements.empty()) return 0.0;
  return static_cast<double>(response.cited_statement_count()) /
         static_cast<double>(response.statements.size());
}

FilterDecision filter_instance(const AnnotatedResponse& response, double threshold) {
  if (response.statements.empty()) return FilterDecision::Discard;
  // Tolerance keeps exact boundary cases such as 1 of 5 at 0.2.
  const double needed = threshold * static_cast<double>(response.statements.size());
  return static_cast<double>(response.cited_statement_count()) + 1e-9 >= needed
             ? FilterDecision::Keep
             : FilterDecision::Discard;
}

AnnotatedAnswer annotate_answer(const Context& context, std::string_view query,
                                std::string_view answer, const ModelSuite& models,
                                const PipelineConfig& config) {
  AnnotatedAnswer out;
  CitationTrace& trace = out.trace;
  const std::vector<std::string> sentences = split_answer(answer, context.language());
  if (sentences.empty()) throw MalformedGeneration("answer contains no sentences");
  trace.retrieved_chunks = retrieve_for_answer(sentences, context, config.retrieval, *models.scorer);
  if (trace.retrieved_chunks.empty()) throw InvalidArgument("context has no chunks to cite");

  std::vector<std::string> snippets;
  for (std::size_t id : trace.retrieved_chunks) snippets.emplace_back(context.chunk_text(id));
  CoarseCitations coarse = add_chunk_citations(query, answer, snippets, models, config);
  trace.coarse_output = coarse.raw_output;
  trace.answer_preserved = coarse.answer_preserved;
  trace.altered_statements = coarse.altered_statements;
  trace.warnings = coarse.warnings;

  struct Job {
    std::size_t statement;
    std::size_t chunk;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < coarse.response.statements.size(); ++i) {
    StatementTrace st;
    std::set<std::size_t> chunks;
    for (const CitationSpan& c : coarse.response.statements[i].citations) {
      st.cited_snippets.push_back(c.start);
      chunks.insert(trace.retrieved_chunks[c.start - 1]);
    }
    st.cited_chunks.assign(chunks.begin(), chunks.end());
    for (std::size_t chunk : st.cited_chunks) jobs.push_back({i, chunk});
    trace.statements.push_back(std::move(st));
  }

  std::vector<Extraction> results(jobs.size());
  parallel_for(jobs.size(), config.extraction_parallelism, [&](std::size_t j) {
    results[j] = extract_sentence_citations(coarse.response.statements[jobs[j].statement],
                                            jobs[j].chunk, context, models, config);
  });

  out.response.granularity = Granularity::SentenceLevel;
  for (const Statement& s : coarse.response.statements) out.response.statements.push_back({s.text, {}});
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    Statement& target = out.response.statements[jobs[j].statement];
    target.citations.insert(target.citations.end(), results[j].spans.begin(), results[j].spans.end());
    for (const auto& w : results[j].warnings) {
      trace.warnings.push_back("statement " + std::to_string(jobs[j].statement) + ", chunk " +
                               std::to_string(jobs[j].chunk) + ": " + w);
    }
    trace.statements[jobs[j].statement].extractions.push_back(std::move(results[j]));
  }
  for (Statement& s : out.response.statements) s.citations = merge_spans(s.citations);
  return out;
}

std::string_view to_string(CofStatus status) {
  switch (status) {
    case CofStatus::Kept: return "kept";
    case CofStatus::Discarded: return "discarded";
    case CofStatus::Failed: return "failed";
  }
  return "failed";
}

namespace {

CofOutcome start_outcome(const Document& document, const Context& context,
                         const PipelineConfig& config, const ModelSuite& models, std::uint64_t seed) {
  CofOutcome outcome;
  LqacInstance& inst = outcome.instance;
  inst.id = document.id;
  inst.instruction = models.prompts.lac_instruction();
  inst.context = document.text;
  inst.language = context.language();
  Provenance& p = inst.provenance;
  p.seed = seed;
  p.prompt_digest = models.prompts.digest();
  for (const auto& [name, hash] : models.prompts.hashes()) {
    if (name.find(".example") != std::string::npos) p.demonstration_hashes[name] = hash;
  }
  p.counter = models.counter.name();
  p.segmenter = std::string(kSegmenterVersion);
  p.scorer = models.scorer ? models.scorer->name() : "";
  p.chunk_size = config.chunk_size;
  p.sentence_count = context.sentences().size();
  return outcome;
}

std::optional<std::string> check_bounds(const Context& context, const PipelineConfig& config) {
  std::size_t tokens = 0;
  for (const Chunk& c : context.chunks()) tokens += c.token_count;
  if (tokens < config.min_document_tokens || tokens > config.max_document_tokens) {
    return "document has " + std::to_string(tokens) + " tokens, outside [" +
           std::to_string(config.min_document_tokens) + ", " +
           std::to_string(config.max_document_tokens) + "]";
  }
  return std::nullopt;
}

void finish(CofOutcome& outcome, const Context& context, const QAInstance& qa,
            const PipelineConfig& config, const ModelSuite& models) {
  LqacInstance& inst = outcome.instance;
  inst.query = qa.query;
  inst.provenance.vanilla_answer = qa.answer;
  AnnotatedAnswer annotated = annotate_answer(context, qa.query, qa.answer, models, config);
  inst.annotated_answer = std::move(annotated.response);
  inst.provenance.citations = std::move(annotated.trace);
  inst.provenance.cited_fraction = cited_fraction(inst.annotated_answer);
  if (filter_instance(inst.annotated_answer, config.min_cited_fraction) == FilterDecision::Keep) {
    outcome.status = CofStatus::Kept;
  } else {
    outcome.status = CofStatus::Discarded;
    outcome.reason = std::to_string(inst.annotated_answer.cited_statement_count()) + " of " +
                     std::to_string(inst.annotated_answer.statements.size()) +
                     " statements cited, below threshold";
  }
}

}  // namespace

CofOutcome run_cof_on_qa(const Document& document, const QAInstance& qa, const PipelineConfig& config,
                         const ModelSuite& models, std::uint64_t seed) {
  config.validate();
  const Context context = Context::build(document.text, models.counter, config.chunk_size,
                                         document.language);
  CofOutcome outcome = start_outcome(document, context, config, models, seed);
  if (auto problem = check_bounds(context, config)) {
    outcome.reason = *problem;
    return outcome;
  }
  try {
    finish(outcome, context, qa, config, models);
  } catch (const MalformedGeneration& e) {
    outcome.status = CofStatus::Failed;
    outcome.reason = e.what();
  }
  return outcome;
}

CofOutcome run_cof(const Document& document, const PipelineConfig& config, const ModelSuite& models,
                   std::uint64_t seed) {
  config.validate();
  const Context context = Context::build(document.text, models.counter, config.chunk_size,
                                         document.language);
  CofOutcome outcome = start_outcome(document, context, config, models, seed);
  if (auto problem = check_bounds(context, config)) {
    outcome.reason = *problem;
    return outcome;
  }
  Provenance& p = outcome.instance.provenance;
  try {
    QAInstance qa;
    qa.language = context.language();
    qa.task_type = kAllTaskTypes[seeded_index(derive_seed(seed, document.id, "task"), 4)];
    p.task_type = qa.task_type;
    QuestionList questions = generate_questions(context, qa.task_type, models, config);
    p.candidate_questions = questions.questions;
    p.warnings = questions.warnings;
    p.selected_question = seeded_index(derive_seed(seed, document.id, "question"),
                                       questions.questions.size());
    qa.query = questions.questions[*p.selected_question];
    outcome.instance.query = qa.query;
    qa.answer = generate_answer(context, qa.query, models, config);
    finish(outcome, context, qa, config, models);
  } catch (const MalformedGeneration& e) {
    outcome.status = CofStatus::Failed;
    outcome.reason = e.what();
  }
  return outcome;
}

ordered_json to_json(const AnnotatedResponse& response) {
  ordered_json statements = ordered_json::array();
  for (const Statement& s : response.statements) {
    ordered_json cites = ordered_json::array();
    for (const CitationSpan& c : s.citations) {
      if (response.granularity == Granularity::ChunkLevel) {
        cites.push_back(c.start);
      } else {
        cites.push_back({c.start, c.end});
      }
    }
    statements.push_back({{"text", s.text}, {"citations", std::move(cites)}});
  }
  return {{"granularity", to_string(response.granularity)},
          {"markup", serialize_annotated(response)},
          {"statements", std::move(statements)}};
}

namespace {

ordered_json spans_json(const std::vector<CitationSpan>& spans) {
  ordered_json out = ordered_json::array();
  for (const CitationSpan& c : spans) out.push_back({c.start, c.end});
  return out;
}

ordered_json trace_json(const CitationTrace& t) {
  ordered_json statements = ordered_json::array();
  for (const StatementTrace& st : t.statements) {
    ordered_json extractions = ordered_json::array();
    for (const Extraction& e : st.extractions) {
      extractions.push_back({{"chunk", e.chunk_id},
                             {"local_to_global", e.local_to_global},
                             {"output", e.raw_output},
                             {"spans", spans_json(e.spans)},
                             {"no_relevant_information", e.no_relevant_information},
                             {"skipped", e.skipped}});
    }
    statements.push_back({{"cited_snippets", st.cited_snippets},
                          {"cited_chunks", st.cited_chunks},
                          {"extractions", std::move(extractions)}});
  }
  return {{"retrieved_chunks", t.retrieved_chunks},
          {"coarse_output", t.coarse_output},
          {"answer_preserved", t.answer_preserved},
          {"altered_statements", t.altered_statements},
          {"statements", std::move(statements)},
          {"warnings", t.warnings}};
}

}  // namespace

ordered_json to_json(const LqacInstance& inst) {
  const Provenance& p = inst.provenance;
  ordered_json provenance = {
      {"seed", p.seed},
      {"task_type", p.task_type ? ordered_json(to_string(*p.task_type)) : ordered_json(nullptr)},
      {"candidate_questions", p.candidate_questions},
      {"selected_question", p.selected_question ? ordered_json(*p.selected_question) : ordered_json(nullptr)},
      {"vanilla_answer", p.vanilla_answer},
      {"citations", trace_json(p.citations)},
      {"cited_fraction", p.cited_fraction},
      {"prompt_digest", p.prompt_digest},
      {"demonstration_hashes", p.demonstration_hashes},
      {"counter", p.counter},
      {"segmenter", p.segmenter},
      {"scorer", p.scorer},
      {"chunk_size", p.chunk_size},
      {"sentence_count", p.sentence_count},
      {"warnings", p.warnings},
  };
  return {{"id", inst.id},
          {"instruction", inst.instruction},
          {"context", inst.context},
          {"language", to_string(inst.language)},
          {"query", inst.query},
          {"answer", to_json(inst.annotated_answer)},
          {"provenance", std::move(provenance)}};
}

ordered_json to_json(const CofOutcome& outcome) {
  return {{"status", to_string(outcome.status)},
          {"reason", outcome.reason},
          {"instance", to_json(outcome.instance)}};
}

}  // namespace lqac
