#include "lqac/strategies.hpp"

#include <algorithm>

#include "lqac/error.hpp"
#include "lqac/unicode.hpp"

namespace lqac {

std::string_view to_string(StrategyId id) {
  switch (id) {
    case StrategyId::LacC: return "lac-c";
    case StrategyId::LacS: return "lac-s";
    case StrategyId::RacC: return "rac-c";
    case StrategyId::RacS: return "rac-s";
    case StrategyId::PostLcC: return "post-lc-c";
    case StrategyId::PostLcS: return "post-lc-s";
    case StrategyId::PostRcC: return "post-rc-c";
    case StrategyId::PostRcS: return "post-rc-s";
    case StrategyId::Cof: return "cof";
  }
  return "lac-s";
}

std::optional<StrategyId> parse_strategy(std::string_view name) {
  for (StrategyId id : kAllStrategies) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

Granularity granularity_of(StrategyId id) {
  switch (id) {
    case StrategyId::LacC:
    case StrategyId::RacC:
    case StrategyId::PostLcC:
    case StrategyId::PostRcC:
      return Granularity::ChunkLevel;
    default:
      return Granularity::SentenceLevel;
  }
}

bool is_post_hoc(StrategyId id) {
  return id == StrategyId::PostLcC || id == StrategyId::PostLcS || id == StrategyId::PostRcC ||
         id == StrategyId::PostRcS || id == StrategyId::Cof;
}

namespace {

using Clock = std::chrono::steady_clock;

class Runner {
 public:
  Runner(const Context& context, std::string_view query, const StrategyConfig& config,
         const ModelSuite& models)
      : context_(context), query_(query), config_(config), models_(models) {}

  StrategyOutput run(StrategyId id) {
    switch (id) {
      case StrategyId::LacS: lac(Granularity::SentenceLevel, all_sentences(true)); break;
      case StrategyId::LacC: lac(Granularity::ChunkLevel, all_chunks(true)); break;
      case StrategyId::RacS:
        lac(Granularity::SentenceLevel, sentence_units(retrieve_for_query(
                                            query_, context_, config_.pipeline.retrieval.k,
                                            RetrievalUnit::Sentence, *models_.scorer)));
        break;
      case StrategyId::RacC:
        lac(Granularity::ChunkLevel, chunk_units(retrieve_for_query(query_, context_,
                                                                    config_.pipeline.retrieval.k,
                                                                    RetrievalUnit::Chunk, *models_.scorer)));
        break;
      case StrategyId::PostLcS: post_sentence(all_sentences(true)); break;
      case StrategyId::PostRcS: post_sentence(sentence_units(answer_retrieval(RetrievalUnit::Sentence))); break;
      case StrategyId::PostLcC: post_chunk(all_chunk_ids(true)); break;
      case StrategyId::PostRcC: post_chunk(answer_retrieval(RetrievalUnit::Chunk)); break;
      case StrategyId::Cof: cof(); break;
    }
    return std::move(out_);
  }

 private:
  std::string call(const std::string& stage, std::string prompt, std::optional<double> temperature) {
    ChatRequest request = ChatRequest::user(std::move(prompt), temperature, config_.pipeline.max_output_tokens);
    request.model_name = config_.pipeline.model_name;
    const auto start = Clock::now();
    std::string text = models_.chat->complete(request);
    out_.timings.push_back(
        {stage, std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start)});
    ++out_.chat_calls;
    return text;
  }

  // Prefix of `ids` whose units fit the context budget.
  template <typename TokenOf>
  std::vector<std::size_t> within_budget(std::vector<std::size_t> ids, TokenOf tokens_of) {
    std::size_t used = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      used += tokens_of(ids[i]);
      if (used > config_.max_context_tokens) {
        out_.warnings.push_back("context truncated to " + std::to_string(i) + " of " +
                                std::to_string(ids.size()) + " units (" +
                                std::to_string(config_.max_context_tokens) + " token budget)");
        ids.resize(i);
        break;
      }
    }
    return ids;
  }

  std::vector<std::size_t> all_chunk_ids(bool truncate) {
    std::vector<std::size_t> ids(context_.chunks().size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    if (!truncate) return ids;
    return within_budget(std::move(ids), [&](std::size_t id) { return context_.chunks()[id].token_count; });
  }

  std::vector<NumberedUnit> all_chunks(bool truncate) { return chunk_units(all_chunk_ids(truncate)); }

  std::vector<NumberedUnit> all_sentences(bool truncate) {
    std::vector<std::size_t> ids(context_.sentences().size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    if (truncate) {
      ids = within_budget(std::move(ids), [&](std::size_t id) {
        return models_.counter.count(context_.sentences()[id].text);
      });
    }
    return sentence_units(ids);
  }

  std::vector<NumberedUnit> chunk_units(const std::vector<std::size_t>& ids) const {
    std::vector<NumberedUnit> units;
    for (std::size_t id : ids) units.push_back({id, context_.chunks()[id].range});
    return units;
  }

  std::vector<NumberedUnit> sentence_units(const std::vector<std::size_t>& ids) const {
    std::vector<NumberedUnit> units;
    for (std::size_t id : ids) units.push_back({id, context_.sentences()[id].range});
    return units;
  }

  std::size_t max_index(Granularity g) const {
    const std::size_t n = g == Granularity::ChunkLevel ? context_.chunks().size() : context_.sentences().size();
    return n == 0 ? 0 : n - 1;
  }

  void parse_into_output(const std::string& raw, Granularity g) {
    out_.raw_output = raw;
    ParseResult parsed = parse_annotated(raw, g, max_index(g));
    for (const auto& w : parsed.warnings) {
      out_.warnings.push_back("offset " + std::to_string(w.offset) + ": " + w.message);
    }
    out_.response = std::move(parsed.response);
    if (out_.response.statements.empty()) out_.warnings.push_back("model output contains no statements");
    if (out_.response.citation_count() == 0) out_.warnings.push_back("model output contains no citations");
  }

  std::string plain_text_of(const AnnotatedResponse& r) const {
    std::string out;
    for (const auto& s : r.statements) out += s.text;
    return out;
  }

  void lac(Granularity g, const std::vector<NumberedUnit>& units) {
    const std::string document = render_numbered(context_.raw_text(), units);
    const std::string prompt = g == Granularity::SentenceLevel ? models_.prompts.lac_sentence(document, query_)
                                                               : models_.prompts.lac_chunk(document, query_);
    parse_into_output(call("answer_with_citations", prompt, config_.pipeline.citation_temperature), g);
    out_.plain_answer = strip_citations(out_.raw_output);
  }

  void vanilla_answer() {
    std::string text;
    for (const NumberedUnit& u : all_chunks(true)) text.append(context_.slice(u.range));
    out_.plain_answer = call("answer", models_.prompts.vanilla_answer(text, query_),
                             config_.pipeline.generation_temperature);
    if (unicode::trim(out_.plain_answer).empty()) out_.warnings.push_back("model returned an empty answer");
  }

  std::vector<std::size_t> answer_retrieval(RetrievalUnit unit) {
    vanilla_answer();
    std::vector<std::string> sentences;
    for (auto& s : split_sentences(out_.plain_answer, context_.language())) sentences.push_back(std::move(s.text));
    if (sentences.empty()) return {};
    return retrieve_for_answer(sentences, context_, config_.pipeline.retrieval, *models_.scorer, unit);
  }

  void check_preserved() {
    out_.answer_preserved = unicode::equal_ignoring_space(plain_text_of(out_.response), out_.plain_answer);
    if (!out_.answer_preserved) out_.warnings.push_back("citation pass changed the answer text");
  }

  void post_sentence(const std::vector<NumberedUnit>& units) {
    if (out_.plain_answer.empty()) vanilla_answer();
    const std::string document = render_numbered(context_.raw_text(), units);
    parse_into_output(call("add_citations", models_.prompts.posthoc_sentence(document, query_, out_.plain_answer),
                           config_.pipeline.citation_temperature),
                      Granularity::SentenceLevel);
    check_preserved();
  }

  // Snippets are numbered from 1 in the prompt and mapped back to chunk ids.
  void post_chunk(const std::vector<std::size_t>& chunk_ids) {
    if (out_.plain_answer.empty()) vanilla_answer();
    std::vector<std::string> snippets;
    for (std::size_t id : chunk_ids) snippets.emplace_back(context_.chunk_text(id));
    out_.raw_output = call("add_citations", models_.prompts.coarse_citation(snippets, query_, out_.plain_answer),
                           config_.pipeline.citation_temperature);
    ParseResult parsed = parse_annotated(out_.raw_output, Granularity::ChunkLevel, snippets.size(), 1);
    for (const auto& w : parsed.warnings) {
      out_.warnings.push_back("offset " + std::to_string(w.offset) + ": " + w.message);
    }
    for (Statement& s : parsed.response.statements) {
      for (CitationSpan& c : s.citations) c = CitationSpan::chunk(chunk_ids[c.start - 1]);
    }
    out_.response = std::move(parsed.response);
    if (out_.response.statements.empty()) out_.warnings.push_back("model output contains no statements");
    check_preserved();
  }

  void cof() {
    vanilla_answer();
    if (unicode::trim(out_.plain_answer).empty()) return;
    CountingChatBackend counter(models_.chat);
    ModelSuite counted = models_;
    counted.chat = std::shared_ptr<ChatBackend>(&counter, [](ChatBackend*) {});
    const auto start = Clock::now();
    try {
      AnnotatedAnswer annotated = annotate_answer(context_, query_, out_.plain_answer, counted, config_.pipeline);
      out_.response = std::move(annotated.response);
      out_.raw_output = annotated.trace.coarse_output;
      out_.warnings.insert(out_.warnings.end(), annotated.trace.warnings.begin(), annotated.trace.warnings.end());
    } catch (const MalformedGeneration& e) {
      out_.warnings.push_back(std::string("citation pipeline failed: ") + e.what());
    }
    out_.chat_calls += counter.calls();
    out_.timings.push_back(
        {"coarse_to_fine", std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start)});
    check_preserved();
  }

  const Context& context_;
  std::string query_;
  const StrategyConfig& config_;
  const ModelSuite& models_;
  StrategyOutput out_;
};

}  // namespace

StrategyOutput run_strategy(StrategyId id, const Context& context, std::string_view query,
                            const StrategyConfig& config, const ModelSuite& models) {
  config.pipeline.validate();
  if (!models.chat) throw ConfigError("no chat backend configured");
  if (!models.scorer) throw ConfigError("no retrieval scorer configured");
  return Runner(context, query, config, models).run(id);
}

}  // namespace lqac
