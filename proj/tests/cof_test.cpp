#include "lqac/cof.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lqac/error.hpp"
#include "support/fake_llm.hpp"
#include "support/generators.hpp"

namespace lqac {
namespace {

using testing::FakeLlm;
using testing::PromptKind;
using Spans = std::vector<CitationSpan>;

ModelSuite suite_for(FakeLlm& llm) {
  ModelSuite models;
  models.chat = llm.backend();
  models.scorer = std::make_shared<LexicalScorer>();
  return models;
}

TEST(ParseQuestionList, FiveNumberedLines) {
  const auto list = parse_question_list("1: Q1\n2: Q2\n3: Q3\n4: Q4\n5: Q5", 5);
  EXPECT_EQ(list.questions, (std::vector<std::string>{"Q1", "Q2", "Q3", "Q4", "Q5"}));
  EXPECT_TRUE(list.warnings.empty());
}

TEST(ParseQuestionList, ShortListWarns) {
  const auto list = parse_question_list("Here you go:\n1. Q1\n2) Q2\n3：问题三", 5);
  EXPECT_EQ(list.questions, (std::vector<std::string>{"Q1", "Q2", "问题三"}));
  EXPECT_EQ(list.warnings.size(), 1u);
}

TEST(ParseQuestionList, ExtraItemsAndMarkdown) {
  const auto list = parse_question_list("**1:** A?\n**2:** B?\n3: C?", 2);
  EXPECT_EQ(list.questions, (std::vector<std::string>{"A?", "B?"}));
  EXPECT_EQ(list.warnings.size(), 1u);
}

TEST(ParseQuestionList, ProseIsMalformed) {
  EXPECT_THROW(parse_question_list("I cannot think of any questions.", 5), MalformedGeneration);
  EXPECT_THROW(parse_question_list("2024 was a year", 5), MalformedGeneration);
}

TEST(SelectQuestion, SingleAndDeterministic) {
  const std::vector<std::string> one = {"only"};
  EXPECT_EQ(select_question(one, 123), "only");
  const std::vector<std::string> five = {"a", "b", "c", "d", "e"};
  EXPECT_EQ(select_question(five, 77), select_question(five, 77));
  EXPECT_EQ(derive_seed(1, "doc", "task"), derive_seed(1, "doc", "task"));
  EXPECT_NE(derive_seed(1, "doc", "task"), derive_seed(1, "doc", "question"));
  EXPECT_THROW(seeded_index(1, 0), InvalidArgument);
}

TEST(SelectQuestion, UniformWithinThreeSigma) {
  constexpr int kDraws = 10000;
  std::vector<int> counts(5, 0);
  for (int seed = 0; seed < kDraws; ++seed) ++counts[seeded_index(static_cast<std::uint64_t>(seed), 5)];
  const double sigma = std::sqrt(0.2 * 0.8 / kDraws);
  double chi2 = 0;
  for (int c : counts) {
    EXPECT_NEAR(c / double(kDraws), 0.2, 3 * sigma);
    chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  }
  EXPECT_LT(chi2, 18.47);  // chi-square, 4 dof, p = 0.001
}

TEST(GenerateAnswer, PassesMarkupThroughAndRejectsEmpty) {
  FakeLlm llm;
  const Context ctx = Context::build("One fact here. Another fact there.", TokenCounter::approximate());
  llm.on(PromptKind::Vanilla, [](const std::string&) { return "See <cite>[3]</cite> and [4-5]."; });
  ModelSuite models = suite_for(llm);
  EXPECT_EQ(generate_answer(ctx, "Q?", models, PipelineConfig{}), "See <cite>[3]</cite> and [4-5].");
  llm.on(PromptKind::Vanilla, [](const std::string&) { return "  \n"; });
  EXPECT_THROW(generate_answer(ctx, "Q?", models, PipelineConfig{}), MalformedGeneration);
}

TEST(AddChunkCitations, KeepsLocalSnippetNumbers) {
  FakeLlm llm;
  llm.on(PromptKind::CoarseCitation, [](const std::string&) {
    return "<statement>A.<cite>[2]</cite></statement><statement> B.<cite></cite></statement>";
  });
  const std::vector<std::string> snippets = {"s1", "s2", "s3"};
  const auto coarse = add_chunk_citations("Q?", "A. B.", snippets, suite_for(llm), PipelineConfig{});
  ASSERT_EQ(coarse.response.statements.size(), 2u);
  EXPECT_EQ(coarse.response.statements[0].citations, (Spans{CitationSpan::chunk(2)}));
  EXPECT_TRUE(coarse.response.statements[1].citations.empty());
  EXPECT_TRUE(coarse.answer_preserved);
  EXPECT_TRUE(coarse.warnings.empty());
}

TEST(AddChunkCitations, DropsOutOfRangeAndFlagsRewrites) {
  FakeLlm llm;
  llm.on(PromptKind::CoarseCitation, [](const std::string&) {
    return "<statement>A.<cite>[7][0][5]</cite></statement><statement>B, reworded.<cite></cite></statement>";
  });
  const std::vector<std::string> snippets(5, "text");
  const auto coarse = add_chunk_citations("Q?", "A. B.", snippets, suite_for(llm), PipelineConfig{});
  EXPECT_EQ(coarse.response.statements[0].citations, (Spans{CitationSpan::chunk(5)}));
  EXPECT_FALSE(coarse.answer_preserved);
  EXPECT_EQ(coarse.altered_statements, (std::vector<std::size_t>{1}));
  EXPECT_EQ(coarse.warnings.size(), 3u);  // [7], [0], not preserved
}

TEST(AddChunkCitations, EmptyOutputIsMalformed) {
  FakeLlm llm;
  llm.on(PromptKind::CoarseCitation, [](const std::string&) { return "   "; });
  const std::vector<std::string> snippets = {"s"};
  EXPECT_THROW(add_chunk_citations("Q?", "A.", snippets, suite_for(llm), PipelineConfig{}),
               MalformedGeneration);
}

TEST(ParseExtractionOutput, Examples) {
  EXPECT_EQ(parse_extraction_output("[0-1]", 2).local_spans, (Spans{CitationSpan::sentence(0, 1)}));
  const auto none = parse_extraction_output("No relevant information", 4);
  EXPECT_TRUE(none.local_spans.empty());
  EXPECT_TRUE(none.no_relevant_information);
  const auto irregular = parse_extraction_output("[2-0]\n[1-1]", 3);
  EXPECT_EQ(irregular.local_spans, (Spans{CitationSpan::sentence(1, 1)}));
  EXPECT_EQ(irregular.warnings.size(), 1u);
  const auto fenced = parse_extraction_output("```\n[1-2]\n[4-9]\n```", 5);
  EXPECT_EQ(fenced.local_spans, (Spans{CitationSpan::sentence(1, 2)}));
  EXPECT_EQ(fenced.warnings.size(), 1u);
  // Spans win over a stray sentinel phrase.
  EXPECT_FALSE(parse_extraction_output("[0-0] (no relevant information elsewhere)", 1).no_relevant_information);
  EXPECT_THROW(parse_extraction_output("The passage talks about boats.", 3), MalformedGeneration);
  EXPECT_THROW(parse_extraction_output("[s1-e1]", 3), MalformedGeneration);
}

TEST(ExtractSentenceCitations, MapsLocalSpansToGlobalIds) {
  std::string text;
  for (int i = 0; i < 60; ++i) text += "Sentence number " + std::to_string(i) + " here. ";
  const Context ctx = Context::build(text, TokenCounter::approximate(), 16, Language::English);
  FakeLlm llm;
  llm.on(PromptKind::FineExtraction, [](const std::string&) { return "[0-1]"; });
  const std::size_t chunk = 10;
  const auto expanded = expand_chunk(ctx, chunk);
  ASSERT_GE(expanded.local_to_global.size(), 2u);
  ASSERT_GT(expanded.local_to_global[0], 30u);
  const auto result = extract_sentence_citations(Statement{"Sentence number 40.", {}}, chunk, ctx,
                                                 suite_for(llm), PipelineConfig{});
  EXPECT_EQ(result.spans, (Spans{CitationSpan::sentence(expanded.local_to_global[0],
                                                        expanded.local_to_global[1])}));
  EXPECT_EQ(result.local_to_global, expanded.local_to_global);
}

TEST(ExtractSentenceCitations, SkipsChunksWithoutCompleteSentences) {
  // One run-on sentence spread over many chunks: middle chunks have nothing complete.
  std::string text = "Start";
  for (int i = 0; i < 100; ++i) text += " word";
  text += ".";
  const Context ctx = Context::build(text, TokenCounter::approximate(), 8, Language::English);
  FakeLlm llm;
  const auto result = extract_sentence_citations(Statement{"x", {}}, 5, ctx, suite_for(llm), PipelineConfig{});
  EXPECT_TRUE(result.skipped);
  EXPECT_EQ(llm.calls(PromptKind::FineExtraction), 0u);
}

AnnotatedResponse with_cited(std::size_t cited, std::size_t total) {
  AnnotatedResponse r;
  for (std::size_t i = 0; i < total; ++i) {
    Statement s{"s", {}};
    if (i < cited) s.citations.push_back(CitationSpan::sentence(i, i));
    r.statements.push_back(s);
  }
  return r;
}

TEST(FilterInstance, BoundaryAndArithmetic) {
  EXPECT_EQ(filter_instance(with_cited(1, 5), 0.2), FilterDecision::Keep);
  EXPECT_EQ(filter_instance(with_cited(1, 6), 0.2), FilterDecision::Discard);
  EXPECT_EQ(filter_instance(with_cited(0, 3), 0.2), FilterDecision::Discard);
  EXPECT_EQ(filter_instance(with_cited(0, 0), 0.0), FilterDecision::Discard);
  EXPECT_EQ(filter_instance(with_cited(3, 10), 0.3), FilterDecision::Keep);
  EXPECT_EQ(filter_instance(with_cited(7, 10), 0.7), FilterDecision::Keep);
}

TEST(FilterInstance, AddingACitationNeverFlipsKeepToDiscard) {
  testing::TextGen gen(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t total = gen.uniform(1, 12);
    const std::size_t cited = gen.uniform(0, total - 1);
    const double threshold = gen.uniform(0, 100) / 100.0;
    if (filter_instance(with_cited(cited, total), threshold) == FilterDecision::Keep) {
      ASSERT_EQ(filter_instance(with_cited(cited + 1, total), threshold), FilterDecision::Keep);
    }
  }
}

std::string long_document() {
  std::string text;
  const char* topics[] = {"harbor", "railway", "festival", "library", "orchard", "observatory"};
  for (int i = 0; i < 40; ++i) {
    text += "The " + std::string(topics[i % 6]) + " record " + std::to_string(i) +
            " mentions event " + std::to_string(i * 7) + " in detail. ";
  }
  return text;
}

TEST(RunCof, EndToEndWithFakeModelKeepsInstance) {
  FakeLlm llm;
  const Document doc{"doc-1", long_document(), std::nullopt};
  PipelineConfig cfg;
  cfg.chunk_size = 32;
  const auto outcome = run_cof(doc, cfg, suite_for(llm), 9);
  ASSERT_EQ(outcome.status, CofStatus::Kept) << outcome.reason;
  const auto& inst = outcome.instance;
  EXPECT_FALSE(inst.query.empty());
  EXPECT_EQ(inst.instruction, PromptSet::defaults().lac_instruction());
  EXPECT_EQ(inst.annotated_answer.statements.size(), 3u);
  for (const auto& s : inst.annotated_answer.statements) {
    for (const auto& c : s.citations) {
      ASSERT_LT(c.end, inst.provenance.sentence_count);
      Context ctx = Context::build(doc.text, TokenCounter::approximate(), cfg.chunk_size);
      EXPECT_FALSE(ctx.sentence_range_text(c.start, c.end).empty());
    }
  }
  EXPECT_EQ(llm.calls(PromptKind::QuestionGeneration), 1u);
  EXPECT_EQ(llm.calls(PromptKind::Vanilla), 1u);
  EXPECT_EQ(llm.calls(PromptKind::CoarseCitation), 1u);
  EXPECT_EQ(llm.calls(PromptKind::FineExtraction), 3u);  // one cited chunk per statement
  EXPECT_TRUE(inst.provenance.citations.answer_preserved);

  FakeLlm again;
  const auto repeat = run_cof(doc, cfg, suite_for(again), 9);
  EXPECT_EQ(to_json(repeat).dump(), to_json(outcome).dump());
}

TEST(RunCof, NoRelevantInformationEverywhereIsDiscarded) {
  FakeLlm llm;
  llm.on(PromptKind::FineExtraction, [](const std::string&) { return "No relevant information"; });
  PipelineConfig cfg;
  cfg.chunk_size = 32;
  const auto outcome = run_cof({"d", long_document(), std::nullopt}, cfg, suite_for(llm), 1);
  EXPECT_EQ(outcome.status, CofStatus::Discarded);
  EXPECT_FALSE(outcome.reason.empty());
}

TEST(RunCof, SingleChunkDocumentCompletes) {
  FakeLlm llm;
  testing::TextGen gen(8);
  std::string text = "Opening line here. " + gen.words(90) + ". Closing line.";
  const auto outcome = run_cof({"small", text, Language::English}, PipelineConfig{}, suite_for(llm), 4);
  EXPECT_EQ(outcome.status, CofStatus::Kept) << outcome.reason;
  EXPECT_EQ(outcome.instance.provenance.citations.retrieved_chunks, (std::vector<std::size_t>{0}));
}

TEST(RunCof, MalformedStageFailsInstanceWithDiagnostic) {
  FakeLlm llm;
  llm.on(PromptKind::FineExtraction, [](const std::string&) { return "I am not sure."; });
  PipelineConfig cfg;
  cfg.chunk_size = 32;
  const auto outcome = run_cof({"d", long_document(), std::nullopt}, cfg, suite_for(llm), 1);
  EXPECT_EQ(outcome.status, CofStatus::Failed);
  EXPECT_NE(outcome.reason.find("neither spans"), std::string::npos);
}

TEST(RunCof, DocumentOutsideTokenBoundsFailsWithoutModelCalls) {
  FakeLlm llm;
  PipelineConfig cfg;
  cfg.min_document_tokens = 256;
  const auto outcome = run_cof({"tiny", "Too short.", std::nullopt}, cfg, suite_for(llm), 1);
  EXPECT_EQ(outcome.status, CofStatus::Failed);
  EXPECT_EQ(llm.calls(PromptKind::QuestionGeneration), 0u);
}

TEST(PipelineConfig, Validation) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.min_cited_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace lqac
