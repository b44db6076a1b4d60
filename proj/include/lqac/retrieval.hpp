#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lqac/modelgate.hpp"
#include "lqac/textseg.hpp"

namespace lqac {

enum class ScorerKind { EmbeddingCosine, LexicalOverlap };

std::string_view to_string(ScorerKind kind);
std::optional<ScorerKind> parse_scorer_kind(std::string_view name);

struct RetrievalConfig {
  std::size_t l_max = 10;
  std::size_t k = 40;
  ScorerKind scorer = ScorerKind::LexicalOverlap;

  void validate() const;  // InvalidArgument unless l_max >= 1 and k >= 1
};

struct ScoredUnit {
  std::size_t id = 0;
  double score = 0;
};

// Relevance of each unit text to each query text: result[q][u].
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<std::vector<double>> score(std::span<const std::string> queries,
                                                 std::span<const std::string> units) = 0;
  virtual std::string name() const = 0;
};

// Cosine between binary term-presence vectors: |Q & U| / sqrt(|Q| |U|),
// 0 when either side has no terms.
class LexicalScorer : public Scorer {
 public:
  std::vector<std::vector<double>> score(std::span<const std::string> queries,
                                         std::span<const std::string> units) override;
  std::string name() const override { return "lexical-overlap"; }
};

class EmbeddingScorer : public Scorer {
 public:
  explicit EmbeddingScorer(std::shared_ptr<EmbeddingBackend> backend);
  std::vector<std::vector<double>> score(std::span<const std::string> queries,
                                         std::span<const std::string> units) override;
  std::string name() const override { return "embedding-cosine:" + backend_->name(); }

 private:
  std::shared_ptr<EmbeddingBackend> backend_;
};

// Throws InvalidArgument when an embedding scorer is requested without a backend.
std::unique_ptr<Scorer> make_scorer(ScorerKind kind, std::shared_ptr<EmbeddingBackend> backend);

// min(l_max, ceil(k / n_sent)). Throws InvalidArgument if any argument is 0.
std::size_t per_sentence_budget(std::size_t l_max, std::size_t k, std::size_t n_sent);

// The `k` best units, best first; equal scores go to the lower id.
std::vector<ScoredUnit> top_k(std::span<const double> scores, std::size_t k);

enum class RetrievalUnit { Chunk, Sentence };

// Union of each answer sentence's top-l units, ascending by id.
std::vector<std::size_t> retrieve_for_answer(std::span<const std::string> answer_sentences,
                                             const Context& context,
                                             const RetrievalConfig& config, Scorer& scorer,
                                             RetrievalUnit unit = RetrievalUnit::Chunk);

// Top-k chunks or sentences for `query`, ascending by id.
std::vector<std::size_t> retrieve_for_query(std::string_view query, const Context& context,
                                            std::size_t k, RetrievalUnit unit, Scorer& scorer);

}  // namespace lqac
