#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lqac/citemark.hpp"
#include "lqac/modelgate.hpp"
#include "lqac/prompts.hpp"
#include "lqac/textseg.hpp"

namespace lqac {

enum class SupportVerdict { None, Partial, Full };
enum class RelevanceVerdict { Irrelevant, Relevant };

// Full = 1, Partial = 0.5, None = 0.
double support_points(SupportVerdict verdict);
std::string_view to_string(SupportVerdict verdict);

// Each parser looks at the `[[...]]` tokens in order and returns the first
// recognized label, case-insensitively. Unset when none is recognized.
std::optional<SupportVerdict> parse_support_verdict(std::string_view output);
std::optional<RelevanceVerdict> parse_relevance_verdict(std::string_view output);
std::optional<bool> parse_need_citation(std::string_view output);
std::optional<int> parse_rating(std::string_view output);

struct JudgeOptions {
  // Attempts per judgement before JudgeParseError. Each retry changes the
  // request's attempt number so a cache does not replay the bad answer.
  int max_attempts = 3;
  std::string model_name;
  std::size_t max_output_tokens = 512;
  // Concurrent judge calls while scoring one response.
  std::size_t parallelism = 1;
};

class Judge {
 public:
  Judge(std::shared_ptr<ChatBackend> backend, PromptSet prompts = PromptSet::defaults(),
        JudgeOptions options = {});

  SupportVerdict support(std::string_view question, std::string_view statement,
                         std::string_view snippets) const;
  // True when the statement is a factual claim that should carry a citation.
  bool needs_citation(std::string_view question, std::string_view response,
                      std::string_view statement) const;
  RelevanceVerdict relevance(std::string_view question, std::string_view statement,
                             std::string_view snippet) const;
  // Citation markup is stripped from `response` before it is shown to the
  // judge. Throws OutOfScaleRating without retrying.
  int correctness(CorrectnessScale scale, std::string_view question,
                  std::span<const std::string> groundtruths, std::string_view response,
                  std::span<const RatedAnswer> examples = {}) const;

  const JudgeOptions& options() const { return options_; }
  std::string backend_name() const { return backend_->name(); }

 private:
  template <typename T, typename Parse>
  T ask(const std::string& prompt, std::string_view what, Parse parse) const;

  std::shared_ptr<ChatBackend> backend_;
  PromptSet prompts_;
  JudgeOptions options_;
};

// Text of a cited span: the sentences a..b, or chunk k.
std::string snippet_text(const Context& context, const CitationSpan& span);

struct StatementScore {
  double recall = 0;
  std::vector<int> relevance;  // one 0/1 entry per citation
  std::optional<bool> needs_citation;  // set for uncited statements
  bool judge_failed = false;
};

struct CitationScores {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
  double citation_length = 0;  // mean tokens per cited snippet, 0 without citations
  std::size_t statements = 0;
  std::size_t citations = 0;
  std::size_t judge_failures = 0;
  std::vector<StatementScore> per_statement;
};

// 2PR/(P+R), 0 when P+R is 0.
double citation_f1(double precision, double recall);

// Judge answers that cannot be parsed after all attempts score 0 and are
// counted in judge_failures; every other error propagates. A response
// without citations gets precision 0; one without statements scores 0.
// Throws InvalidArgument for spans outside the context.
CitationScores score_citations(const AnnotatedResponse& response, const Context& context,
                               std::string_view question, const Judge& judge,
                               const TokenCounter& counter);

// Rating as a percentage of the scale maximum.
double normalized_correctness(int rating, CorrectnessScale scale);

// C / C_LQA x 100. Throws DivisionByZero when C_LQA is 0.
double correctness_ratio(double correctness, double vanilla_correctness);

struct ResponseMetrics {
  std::string id;
  std::string dataset;
  std::optional<CitationScores> citation;
  std::optional<double> correctness;  // 0..100
  std::vector<std::string> flags;
};

struct MetricSummary {
  std::string dataset;  // "Avg" for the macro average
  std::size_t responses = 0;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> f1;
  std::optional<double> citation_length;
  std::optional<double> correctness;
  std::size_t flagged = 0;
};

struct CorpusReport {
  std::vector<MetricSummary> datasets;  // sorted by name
  MetricSummary average;                // unweighted mean of the dataset rows
};

// Per-dataset means of per-response values; F1 is averaged per response,
// never recomputed from mean P and mean R. Throws InvalidArgument when empty.
CorpusReport aggregate(std::span<const ResponseMetrics> responses);

struct RatioRow {
  std::string dataset;
  double correctness = 0;
  double vanilla_correctness = 0;
  double ratio = 0;
};

// CR per dataset present in both reports, plus an "Avg" row whose ratio is
// the mean of the dataset ratios.
std::vector<RatioRow> correctness_ratios(const CorpusReport& with_citations, const CorpusReport& vanilla);

nlohmann::ordered_json to_json(const CitationScores& scores);
nlohmann::ordered_json to_json(const ResponseMetrics& metrics);
nlohmann::ordered_json to_json(const MetricSummary& summary);
nlohmann::ordered_json to_json(const CorpusReport& report);

// Markdown with one decimal: R, P, F1 per dataset, then Avg F1, CL and C.
std::string citation_table(const CorpusReport& report, std::string_view label);
std::string ratio_table(std::span<const RatioRow> rows, std::string_view label);

}  // namespace lqac
