#include "lqac/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "lqac/error.hpp"

namespace lqac {

std::string_view to_string(ScorerKind kind) {
  return kind == ScorerKind::EmbeddingCosine ? "embedding" : "lexical";
}

std::optional<ScorerKind> parse_scorer_kind(std::string_view name) {
  if (name == "embedding") return ScorerKind::EmbeddingCosine;
  if (name == "lexical") return ScorerKind::LexicalOverlap;
  return std::nullopt;
}

void RetrievalConfig::validate() const {
  if (l_max == 0) throw InvalidArgument("retrieval l_max must be >= 1");
  if (k == 0) throw InvalidArgument("retrieval k must be >= 1");
}

namespace {

using TermSet = std::unordered_set<std::string>;

TermSet term_set(std::string_view text) {
  auto terms = lexical_terms(text);
  return TermSet(std::make_move_iterator(terms.begin()), std::make_move_iterator(terms.end()));
}

std::vector<std::string> unit_texts(const Context& context, RetrievalUnit unit) {
  std::vector<std::string> texts;
  if (unit == RetrievalUnit::Chunk) {
    for (const Chunk& chunk : context.chunks()) texts.emplace_back(context.chunk_text(chunk.id));
  } else {
    for (const SentenceSpan& sentence : context.sentences()) texts.push_back(sentence.text);
  }
  return texts;
}

}  // namespace

std::vector<std::vector<double>> LexicalScorer::score(std::span<const std::string> queries,
                                                      std::span<const std::string> units) {
  std::vector<TermSet> unit_terms;
  unit_terms.reserve(units.size());
  for (const auto& u : units) unit_terms.push_back(term_set(u));
  std::vector<std::vector<double>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const TermSet query_terms = term_set(q);
    std::vector<double> row(units.size(), 0.0);
    for (std::size_t i = 0; i < units.size(); ++i) {
      const TermSet& u = unit_terms[i];
      if (query_terms.empty() || u.empty()) continue;
      const TermSet& small = query_terms.size() <= u.size() ? query_terms : u;
      const TermSet& large = query_terms.size() <= u.size() ? u : query_terms;
      std::size_t shared = 0;
      for (const auto& t : small) shared += large.count(t);
      row[i] = static_cast<double>(shared) /
               std::sqrt(static_cast<double>(query_terms.size()) * static_cast<double>(u.size()));
    }
    out.push_back(std::move(row));
  }
  return out;
}

EmbeddingScorer::EmbeddingScorer(std::shared_ptr<EmbeddingBackend> backend)
    : backend_(std::move(backend)) {
  if (!backend_) throw InvalidArgument("embedding scorer needs an embedding backend");
}

std::vector<std::vector<double>> EmbeddingScorer::score(std::span<const std::string> queries,
                                                        std::span<const std::string> units) {
  std::vector<std::vector<double>> out(queries.size(), std::vector<double>(units.size(), 0.0));
  if (queries.empty() || units.empty()) return out;
  std::vector<std::string> all(queries.begin(), queries.end());
  all.insert(all.end(), units.begin(), units.end());
  const auto vectors = backend_->embed(all);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t u = 0; u < units.size(); ++u) {
      const double s = cosine(vectors[q], vectors[queries.size() + u]);
      out[q][u] = std::isfinite(s) ? s : 0.0;
    }
  }
  return out;
}

std::unique_ptr<Scorer> make_scorer(ScorerKind kind, std::shared_ptr<EmbeddingBackend> backend) {
  if (kind == ScorerKind::LexicalOverlap) return std::make_unique<LexicalScorer>();
  return std::make_unique<EmbeddingScorer>(std::move(backend));
}

std::size_t per_sentence_budget(std::size_t l_max, std::size_t k, std::size_t n_sent) {
  if (n_sent == 0) throw InvalidArgument("per_sentence_budget: answer has no sentences");
  if (l_max == 0 || k == 0) throw InvalidArgument("per_sentence_budget: l_max and k must be >= 1");
  return std::min(l_max, (k + n_sent - 1) / n_sent);
}

std::vector<ScoredUnit> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<ScoredUnit> ranked;
  ranked.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) ranked.push_back({i, scores[i]});
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), [](const ScoredUnit& a, const ScoredUnit& b) {
                      return a.score != b.score ? a.score > b.score : a.id < b.id;
                    });
  ranked.resize(keep);
  return ranked;
}

std::vector<std::size_t> retrieve_for_answer(std::span<const std::string> answer_sentences,
                                             const Context& context,
                                             const RetrievalConfig& config, Scorer& scorer,
                                             RetrievalUnit unit) {
  config.validate();
  if (answer_sentences.empty()) throw InvalidArgument("retrieve_for_answer: no answer sentences");
  const std::size_t budget = per_sentence_budget(config.l_max, config.k, answer_sentences.size());
  const auto units = unit_texts(context, unit);
  if (units.empty()) return {};
  const auto scores = scorer.score(answer_sentences, units);
  std::set<std::size_t> kept;
  for (const auto& row : scores) {
    for (const ScoredUnit& hit : top_k(row, budget)) kept.insert(hit.id);
  }
  return {kept.begin(), kept.end()};
}

std::vector<std::size_t> retrieve_for_query(std::string_view query, const Context& context,
                                            std::size_t k, RetrievalUnit unit, Scorer& scorer) {
  if (k == 0) throw InvalidArgument("retrieve_for_query: k must be >= 1");
  const auto units = unit_texts(context, unit);
  if (units.empty()) return {};
  const std::string q(query);
  const auto scores = scorer.score(std::span<const std::string>(&q, 1), units);
  std::vector<std::size_t> ids;
  for (const ScoredUnit& hit : top_k(scores.front(), k)) ids.push_back(hit.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace lqac
