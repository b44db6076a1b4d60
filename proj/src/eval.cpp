#include "lqac/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "lqac/error.hpp"
#include "lqac/parallel.hpp"
#include "lqac/unicode.hpp"

namespace lqac {
namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Contents of every `[[...]]`, trimmed and lowercased.
std::vector<std::string> bracket_labels(std::string_view output) {
  std::vector<std::string> labels;
  std::size_t pos = 0;
  while ((pos = output.find("[[", pos)) != std::string_view::npos) {
    const std::size_t close = output.find("]]", pos + 2);
    if (close == std::string_view::npos) break;
    labels.push_back(lower_ascii(unicode::trim(output.substr(pos + 2, close - pos - 2))));
    pos = close + 2;
  }
  return labels;
}

template <typename T>
std::optional<T> first_label(std::string_view output, const std::map<std::string, T>& known) {
  for (const std::string& label : bracket_labels(output)) {
    if (const auto it = known.find(label); it != known.end()) return it->second;
  }
  return std::nullopt;
}

std::string format1(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", value);
  return buf;
}

std::string cell(const std::optional<double>& value, double scale = 1.0) {
  return value ? format1(*value * scale) : "-";
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

double support_points(SupportVerdict verdict) {
  switch (verdict) {
    case SupportVerdict::Full: return 1.0;
    case SupportVerdict::Partial: return 0.5;
    case SupportVerdict::None: return 0.0;
  }
  return 0.0;
}

std::string_view to_string(SupportVerdict verdict) {
  switch (verdict) {
    case SupportVerdict::Full: return "Fully supported";
    case SupportVerdict::Partial: return "Partially supported";
    case SupportVerdict::None: return "No support";
  }
  return "No support";
}

std::optional<SupportVerdict> parse_support_verdict(std::string_view output) {
  static const std::map<std::string, SupportVerdict> kLabels = {
      {"fully supported", SupportVerdict::Full},
      {"partially supported", SupportVerdict::Partial},
      {"no support", SupportVerdict::None},
  };
  return first_label(output, kLabels);
}

std::optional<RelevanceVerdict> parse_relevance_verdict(std::string_view output) {
  static const std::map<std::string, RelevanceVerdict> kLabels = {
      {"relevant", RelevanceVerdict::Relevant},
      {"unrelevant", RelevanceVerdict::Irrelevant},
      {"irrelevant", RelevanceVerdict::Irrelevant},
  };
  return first_label(output, kLabels);
}

std::optional<bool> parse_need_citation(std::string_view output) {
  static const std::map<std::string, bool> kLabels = {{"yes", true}, {"no", false}};
  return first_label(output, kLabels);
}

std::optional<int> parse_rating(std::string_view output) {
  for (const std::string& label : bracket_labels(output)) {
    if (label.empty() || label.size() > 4) continue;
    if (!std::all_of(label.begin(), label.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    return std::stoi(label);
  }
  return std::nullopt;
}

Judge::Judge(std::shared_ptr<ChatBackend> backend, PromptSet prompts, JudgeOptions options)
    : backend_(std::move(backend)), prompts_(std::move(prompts)), options_(std::move(options)) {
  if (!backend_) throw ConfigError("judge needs a chat backend");
  if (options_.max_attempts < 1) throw ConfigError("judge max_attempts must be at least 1");
}

template <typename T, typename Parse>
T Judge::ask(const std::string& prompt, std::string_view what, Parse parse) const {
  std::string last;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    ChatRequest request = ChatRequest::user(prompt, 0.0, options_.max_output_tokens);
    request.model_name = options_.model_name;
    request.attempt = attempt;
    last = backend_->complete(request);
    if (auto parsed = parse(last)) return *parsed;
  }
  throw JudgeParseError("no " + std::string(what) + " verdict in judge output after " +
                        std::to_string(options_.max_attempts) + " attempts: " + last.substr(0, 200));
}

SupportVerdict Judge::support(std::string_view question, std::string_view statement,
                              std::string_view snippets) const {
  return ask<SupportVerdict>(prompts_.support_judge(question, statement, snippets), "support",
                             parse_support_verdict);
}

bool Judge::needs_citation(std::string_view question, std::string_view response,
                           std::string_view statement) const {
  return ask<bool>(prompts_.need_citation_judge(question, response, statement), "need-citation",
                   parse_need_citation);
}

RelevanceVerdict Judge::relevance(std::string_view question, std::string_view statement,
                                  std::string_view snippet) const {
  return ask<RelevanceVerdict>(prompts_.relevance_judge(question, statement, snippet), "relevance",
                               parse_relevance_verdict);
}

int Judge::correctness(CorrectnessScale scale, std::string_view question,
                       std::span<const std::string> groundtruths, std::string_view response,
                       std::span<const RatedAnswer> examples) const {
  const std::string stripped = strip_citations(response);
  const int rating = ask<int>(prompts_.correctness_judge(scale, question, groundtruths, stripped, examples),
                              "correctness", parse_rating);
  if (rating < 1 || rating > scale_max(scale)) throw OutOfScaleRating(rating, scale_max(scale));
  return rating;
}

std::string snippet_text(const Context& context, const CitationSpan& span) {
  if (span.kind == Granularity::ChunkLevel) {
    if (span.start >= context.chunks().size()) {
      throw InvalidArgument("chunk citation [" + std::to_string(span.start) + "] outside the context");
    }
    return std::string(context.chunk_text(span.start));
  }
  if (span.start > span.end || span.end >= context.sentences().size()) {
    throw InvalidArgument("sentence citation [" + std::to_string(span.start) + "-" + std::to_string(span.end) +
                          "] outside the context");
  }
  return std::string(context.sentence_range_text(span.start, span.end));
}

double citation_f1(double precision, double recall) {
  const double sum = precision + recall;
  return sum == 0 ? 0.0 : 2 * precision * recall / sum;
}

CitationScores score_citations(const AnnotatedResponse& response, const Context& context,
                               std::string_view question, const Judge& judge, const TokenCounter& counter) {
  // Resolve everything up front so a bad span fails before any judge call.
  struct Job {
    enum Kind { Support, NeedCitation, Relevance } kind;
    std::size_t statement;
    std::size_t citation;
    std::string snippet;
  };
  std::vector<Job> jobs;
  CitationScores scores;
  scores.statements = response.statements.size();
  scores.per_statement.resize(response.statements.size());
  std::size_t snippet_tokens = 0;
  std::string full_response;
  for (const Statement& s : response.statements) full_response += s.text;

  for (std::size_t i = 0; i < response.statements.size(); ++i) {
    const Statement& s = response.statements[i];
    if (s.citations.empty()) {
      jobs.push_back({Job::NeedCitation, i, 0, {}});
      continue;
    }
    std::string joined;
    for (std::size_t j = 0; j < s.citations.size(); ++j) {
      std::string text = snippet_text(context, s.citations[j]);
      snippet_tokens += counter.count(text);
      if (j) joined += '\n';
      joined += text;
      jobs.push_back({Job::Relevance, i, j, std::move(text)});
    }
    jobs.push_back({Job::Support, i, 0, std::move(joined)});
    scores.per_statement[i].relevance.assign(s.citations.size(), 0);
    scores.citations += s.citations.size();
  }

  // 1 / 0 per job, or -1 when the judge output never parsed.
  std::vector<double> results(jobs.size(), 0);
  parallel_for(jobs.size(), judge.options().parallelism, [&](std::size_t k) {
    const Job& job = jobs[k];
    const std::string& text = response.statements[job.statement].text;
    try {
      switch (job.kind) {
        case Job::Support:
          results[k] = support_points(judge.support(question, text, job.snippet));
          break;
        case Job::NeedCitation:
          results[k] = judge.needs_citation(question, full_response, text) ? 0.0 : 1.0;
          break;
        case Job::Relevance:
          results[k] = judge.relevance(question, text, job.snippet) == RelevanceVerdict::Relevant ? 1.0 : 0.0;
          break;
      }
    } catch (const JudgeParseError&) {
      results[k] = -1;
    }
  });

  double recall_sum = 0;
  double relevant = 0;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    StatementScore& st = scores.per_statement[job.statement];
    const bool failed = results[k] < 0;
    const double value = failed ? 0.0 : results[k];
    if (failed) {
      st.judge_failed = true;
      ++scores.judge_failures;
    }
    switch (job.kind) {
      case Job::Support:
        st.recall = value;
        break;
      case Job::NeedCitation:
        st.recall = value;
        if (!failed) st.needs_citation = value == 0.0;
        break;
      case Job::Relevance:
        st.relevance[job.citation] = static_cast<int>(value);
        relevant += value;
        break;
    }
  }
  for (const StatementScore& st : scores.per_statement) recall_sum += st.recall;

  if (scores.statements > 0) scores.recall = recall_sum / static_cast<double>(scores.statements);
  if (scores.citations > 0) {
    scores.precision = relevant / static_cast<double>(scores.citations);
    scores.citation_length = static_cast<double>(snippet_tokens) / static_cast<double>(scores.citations);
  }
  scores.f1 = citation_f1(scores.precision, scores.recall);
  return scores;
}

double normalized_correctness(int rating, CorrectnessScale scale) {
  return 100.0 * rating / scale_max(scale);
}

double correctness_ratio(double correctness, double vanilla_correctness) {
  if (vanilla_correctness == 0) throw DivisionByZero("correctness ratio with zero vanilla correctness");
  return correctness / vanilla_correctness * 100.0;
}

CorpusReport aggregate(std::span<const ResponseMetrics> responses) {
  if (responses.empty()) throw InvalidArgument("cannot aggregate an empty set of responses");
  struct Columns {
    std::size_t count = 0;
    std::size_t flagged = 0;
    std::vector<double> r, p, f1, cl, c;
  };
  std::map<std::string, Columns> by_dataset;
  for (const ResponseMetrics& m : responses) {
    Columns& col = by_dataset[m.dataset];
    ++col.count;
    if (!m.flags.empty()) ++col.flagged;
    if (m.citation) {
      col.r.push_back(m.citation->recall);
      col.p.push_back(m.citation->precision);
      col.f1.push_back(m.citation->f1);
      col.cl.push_back(m.citation->citation_length);
    }
    if (m.correctness) col.c.push_back(*m.correctness);
  }

  CorpusReport report;
  report.average.dataset = "Avg";
  Columns macro;
  for (const auto& [name, col] : by_dataset) {
    MetricSummary row;
    row.dataset = name;
    row.responses = col.count;
    row.flagged = col.flagged;
    row.recall = mean_of(col.r);
    row.precision = mean_of(col.p);
    row.f1 = mean_of(col.f1);
    row.citation_length = mean_of(col.cl);
    row.correctness = mean_of(col.c);
    report.average.responses += col.count;
    report.average.flagged += col.flagged;
    if (row.recall) {
      macro.r.push_back(*row.recall);
      macro.p.push_back(*row.precision);
      macro.f1.push_back(*row.f1);
      macro.cl.push_back(*row.citation_length);
    }
    if (row.correctness) macro.c.push_back(*row.correctness);
    report.datasets.push_back(std::move(row));
  }
  report.average.recall = mean_of(macro.r);
  report.average.precision = mean_of(macro.p);
  report.average.f1 = mean_of(macro.f1);
  report.average.citation_length = mean_of(macro.cl);
  report.average.correctness = mean_of(macro.c);
  return report;
}

std::vector<RatioRow> correctness_ratios(const CorpusReport& with_citations, const CorpusReport& vanilla) {
  std::map<std::string, double> base;
  for (const MetricSummary& row : vanilla.datasets) {
    if (row.correctness) base[row.dataset] = *row.correctness;
  }
  std::vector<RatioRow> rows;
  std::vector<double> c, c_lqa, ratios;
  for (const MetricSummary& row : with_citations.datasets) {
    const auto it = base.find(row.dataset);
    if (!row.correctness || it == base.end()) continue;
    RatioRow r{row.dataset, *row.correctness, it->second, correctness_ratio(*row.correctness, it->second)};
    c.push_back(r.correctness);
    c_lqa.push_back(r.vanilla_correctness);
    ratios.push_back(r.ratio);
    rows.push_back(std::move(r));
  }
  if (!rows.empty()) rows.push_back({"Avg", *mean_of(c), *mean_of(c_lqa), *mean_of(ratios)});
  return rows;
}

nlohmann::ordered_json to_json(const CitationScores& scores) {
  nlohmann::ordered_json statements = nlohmann::ordered_json::array();
  for (const StatementScore& st : scores.per_statement) {
    nlohmann::ordered_json j;
    j["recall"] = st.recall;
    j["relevance"] = st.relevance;
    j["needs_citation"] = st.needs_citation ? nlohmann::ordered_json(*st.needs_citation) : nullptr;
    j["judge_failed"] = st.judge_failed;
    statements.push_back(std::move(j));
  }
  nlohmann::ordered_json j;
  j["recall"] = scores.recall;
  j["precision"] = scores.precision;
  j["f1"] = scores.f1;
  j["citation_length"] = scores.citation_length;
  j["statements"] = scores.statements;
  j["citations"] = scores.citations;
  j["judge_failures"] = scores.judge_failures;
  j["per_statement"] = std::move(statements);
  return j;
}

nlohmann::ordered_json to_json(const ResponseMetrics& metrics) {
  nlohmann::ordered_json j;
  j["id"] = metrics.id;
  j["dataset"] = metrics.dataset;
  j["citation"] = metrics.citation ? to_json(*metrics.citation) : nlohmann::ordered_json(nullptr);
  j["correctness"] = metrics.correctness ? nlohmann::ordered_json(*metrics.correctness) : nullptr;
  j["flags"] = metrics.flags;
  return j;
}

nlohmann::ordered_json to_json(const MetricSummary& summary) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nullptr; };
  nlohmann::ordered_json j;
  j["dataset"] = summary.dataset;
  j["responses"] = summary.responses;
  j["recall"] = opt(summary.recall);
  j["precision"] = opt(summary.precision);
  j["f1"] = opt(summary.f1);
  j["citation_length"] = opt(summary.citation_length);
  j["correctness"] = opt(summary.correctness);
  j["flagged"] = summary.flagged;
  return j;
}

nlohmann::ordered_json to_json(const CorpusReport& report) {
  nlohmann::ordered_json j;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const MetricSummary& row : report.datasets) j["datasets"].push_back(to_json(row));
  j["average"] = to_json(report.average);
  return j;
}

std::string citation_table(const CorpusReport& report, std::string_view label) {
  std::string header = "| Model |";
  std::string rule = "|---|";
  std::string line = "| " + std::string(label) + " |";
  for (const MetricSummary& row : report.datasets) {
    for (const char* metric : {"R", "P", "F1"}) {
      header += " " + row.dataset + " " + metric + " |";
      rule += "---|";
    }
    line += " " + cell(row.recall, 100) + " | " + cell(row.precision, 100) + " | " + cell(row.f1, 100) + " |";
  }
  header += " Avg F1 | Avg CL | Avg C |";
  rule += "---|---|---|";
  line += " " + cell(report.average.f1, 100) + " | " + cell(report.average.citation_length) + " | " +
          cell(report.average.correctness) + " |";
  return header + "\n" + rule + "\n" + line + "\n";
}

std::string ratio_table(std::span<const RatioRow> rows, std::string_view label) {
  std::string header = "| Model |";
  std::string rule = "|---|";
  std::string line = "| " + std::string(label) + " |";
  for (const RatioRow& row : rows) {
    header += " " + row.dataset + " C | " + row.dataset + " C_LQA | " + row.dataset + " CR |";
    rule += "---|---|---|";
    line += " " + format1(row.correctness) + " | " + format1(row.vanilla_correctness) + " | " +
            format1(row.ratio) + "% |";
  }
  return header + "\n" + rule + "\n" + line + "\n";
}

}  // namespace lqac
