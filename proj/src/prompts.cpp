#include "lqac/prompts.hpp"

#include <fstream>
#include <sstream>

#include "lqac/digest.hpp"
#include "lqac/error.hpp"

namespace lqac {

std::string_view to_string(TaskType type) {
  switch (type) {
    case TaskType::General: return "general";
    case TaskType::Summary: return "summary";
    case TaskType::MultiHop: return "multi-hop";
    case TaskType::InfoExtract: return "info-extract";
  }
  return "general";
}

std::optional<TaskType> parse_task_type(std::string_view name) {
  for (TaskType t : kAllTaskTypes) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view to_string(CorrectnessScale scale) {
  switch (scale) {
    case CorrectnessScale::Chat10: return "chat10";
    case CorrectnessScale::QA3: return "qa3";
    case CorrectnessScale::Summ5: return "summ5";
  }
  return "qa3";
}

std::optional<CorrectnessScale> parse_correctness_scale(std::string_view name) {
  if (name == "chat10") return CorrectnessScale::Chat10;
  if (name == "qa3") return CorrectnessScale::QA3;
  if (name == "summ5") return CorrectnessScale::Summ5;
  return std::nullopt;
}

int scale_max(CorrectnessScale scale) {
  switch (scale) {
    case CorrectnessScale::Chat10: return 10;
    case CorrectnessScale::QA3: return 3;
    case CorrectnessScale::Summ5: return 5;
  }
  return 3;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    const auto it = vars.find(name);
    if (it == vars.end()) throw InvalidArgument("template placeholder {{" + name + "}} has no value");
    out.append(tmpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

namespace {

// ---- Task prompts -------------------------------------------------------

constexpr const char* kQaGenEnglishGeneral =
    "{{material}}\n"
    "Given the above text, please propose 5 English questions that are diverse and cover all "
    "parts of the text, in the following format: \"1: \", \"2: \", ...";
constexpr const char* kQaGenEnglishSummary =
    "{{material}}\n"
    "Given the above text, please propose 5 English questions that require summarization or "
    "integration from multiple parts, make sure they are diverse and cover all parts of the "
    "text, in the following format: \"1: \", \"2: \", ...";
constexpr const char* kQaGenEnglishMultiHop =
    "{{material}}\n"
    "Given the above text, please propose 5 English questions that require multi-hop "
    "reasoning, make sure they are diverse and cover all parts of the text, in the following "
    "format: \"1: \", \"2: \", ...";
constexpr const char* kQaGenEnglishInfoExtract =
    "{{material}}\n"
    "Given the above text, please propose 5 English information-seeking questions, make sure "
    "they are diversed and cover all parts of the text, in the following format: \"1: \", "
    "\"2: \", ...";

constexpr const char* kQaGenChineseGeneral =
    "{{material}}\n"
    "根据以上文本，请提出5个中文问题，要求问题多样且覆盖文本的各个部分，格式如下：\"1: \"，\"2: \"，...";
constexpr const char* kQaGenChineseSummary =
    "{{material}}\n"
    "根据以上文本，请提出5个需要对多个部分进行总结或整合的中文问题，确保问题多样且覆盖文本的各个部分，"
    "格式如下：\"1: \"，\"2: \"，...";
constexpr const char* kQaGenChineseMultiHop =
    "{{material}}\n"
    "根据以上文本，请提出5个需要多跳推理的中文问题，确保问题多样且覆盖文本的各个部分，格式如下："
    "\"1: \"，\"2: \"，...";
constexpr const char* kQaGenChineseInfoExtract =
    "{{material}}\n"
    "根据以上文本，请提出5个信息查找类的中文问题，确保问题多样且覆盖文本的各个部分，格式如下："
    "\"1: \"，\"2: \"，...";

constexpr const char* kVanillaAnswer = "{{context}}\n\n{{question}}";

constexpr const char* kLacSentenceInstruction =
    "Please answer the user's question based on the given document. When a factual statement S "
    "in your response uses information from some chunks in the document (i.e., <C{s1}>-<C{e1}>, "
    "<C{s2}>-<C{e2}>, ...), please append these chunk numbers to S in the format "
    "\"<statement>{S}<cite>[{s1}-{e1}][{s2}-{e2}]...</cite></statement>\". For other sentences "
    "such as introductory sentences, summarization sentences, reasoning, and inference, you "
    "still need to append \"<cite></cite>\" to them to indicate they need no citations. You must "
    "answer in the same language as the user's question.";

constexpr const char* kLacSentence =
    "{{instruction}}\n\n"
    "Here is an example:\n\n"
    "{{example}}\n\n"
    "Now get ready to handle the following test case.\n\n"
    "[Document Start]\n"
    "{{document}}\n\n"
    "[Document End]\n\n"
    "[Question]\n"
    "{{question}}\n\n"
    "[Remind]\n"
    "{{instruction}}\n\n"
    "[Answer with Citations]\n";

constexpr const char* kLacChunkInstruction =
    "Please answer the user's question based on the given document. When a factual statement S "
    "in your response uses information from some chunks in the document (i.e., <C{k1}>, <C{k2}>, "
    "...), please append these chunk numbers to S in the format "
    "\"<statement>{S}<cite>[{k1}][{k2}]...</cite></statement>\". For other sentences such as "
    "introductory sentences, summarization sentences, reasoning, and inference, you still need "
    "to append \"<cite></cite>\" to them to indicate they need no citations. You must answer in "
    "the same language as the user's question.";

constexpr const char* kCoarseCitation =
    "Your task is to add citations to the existing answer. Specifically, when a factual "
    "statement S in the answer uses information from context snippets l1, l2, ..., ln, please "
    "add citations by appending these snippet numbers to S in the format "
    "\"<statement>{S}<cite>[{l1}][{l2}]...[{ln}]</cite></statement>\". For other sentences such "
    "as introductory sentences, summarization sentences, reasoning, and inference, you still "
    "need to append \"<cite></cite>\" to them to indicate they need no citations.  Except for "
    "adding citations, do not change the original content and format of the existing answer.\n\n"
    "Here is an example:\n\n"
    "{{example}}\n\n"
    "Now get ready to add citations for the following test case.\n\n"
    "[Contexts Start]\n"
    "{{snippets}}\n\n"
    "[Context End]\n\n"
    "[Question]\n"
    "{{question}}\n\n"
    "[Existing Answer Start]\n"
    "{{answer}}\n\n"
    "[Existing Answer End]\n\n"
    "[Answer with Citations]\n";

constexpr const char* kPosthocSentence =
    "Your task is to add citations to the existing answer. Specifically, when a factual "
    "statement S in the answer uses information from some sentences in the document (i.e., "
    "<C{s1}>-<C{e1}>, <C{s2}>-<C{e2}>, ...), please add citations by appending these sentence "
    "numbers to S in the format \"<statement>{S}<cite>[{s1}-{e1}][{s2}-{e2}]...</cite>"
    "</statement>\". For other sentences such as introductory sentences, summarization "
    "sentences, reasoning, and inference, you still need to append \"<cite></cite>\" to them to "
    "indicate they need no citations.  Except for adding citations, do not change the original "
    "content and format of the existing answer.\n\n"
    "Here is an example:\n\n"
    "{{example}}\n\n"
    "Now get ready to add citations for the following test case.\n\n"
    "[Document Start]\n"
    "{{document}}\n\n"
    "[Document End]\n\n"
    "[Question]\n"
    "{{question}}\n\n"
    "[Existing Answer Start]\n"
    "{{answer}}\n\n"
    "[Existing Answer End]\n\n"
    "[Answer with Citations]\n";

constexpr const char* kFineExtraction =
    "You will receive a passage and a factual statement. Your task is to identify the parts in "
    "the passage (i.e., chunks <C{s1}>-<C{e1}>, <C{s2}>-<C{e2}>, ...) that support some key "
    "points of the statement, and output the chunk number in the format:\n"
    "```\n"
    "[s1-e1]\n"
    "[s2-e2]\n"
    "...\n"
    "```\n"
    "If the passage contains no key information relevant to the statement, you must output "
    "\"No relevant information\".\n\n"
    "Here are some examples:\n\n"
    "{{example_1}}\n\n"
    "{{example_2}}\n\n"
    "{{example_3}}\n\n"
    "Now get ready to process the following test case.\n\n"
    "[Passage Start]\n"
    "{{passage}}\n\n"
    "[Passage End]\n\n"
    "[Statment]\n"
    "{{statement}}\n\n"
    "[output]\n";

// ---- Demonstrations -----------------------------------------------------

constexpr const char* kExampleLacSentence =
    "[Document Start]\n"
    "<C0>The Harlow Point lighthouse was completed in 1871 after four years of construction. "
    "<C1>Its tower rises 38 metres above the rocky headland. <C2>The original lamp burned "
    "colza oil and could be seen from 19 nautical miles away. <C3>In 1923 the oil lamp was "
    "replaced by an electric lantern. <C4>The last resident keeper, Margaret Ives, left in 1964 "
    "when the light was automated. <C5>Today the keeper's cottage houses a small maritime "
    "museum.\n\n"
    "[Document End]\n\n"
    "[Question]\n"
    "How did the lighting at Harlow Point change over time?\n\n"
    "[Answer with Citations]\n"
    "<statement>The lighting at Harlow Point went through several stages.<cite></cite>"
    "</statement><statement>When the lighthouse opened in 1871, its lamp burned colza oil and "
    "was visible from 19 nautical miles.<cite>[0-0][2-2]</cite></statement><statement>The oil "
    "lamp gave way to an electric lantern in 1923, and the light was fully automated in 1964, "
    "ending the era of resident keepers.<cite>[3-4]</cite></statement>";

constexpr const char* kExampleLacChunk =
    "[Document Start]\n"
    "<C0>The Harlow Point lighthouse was completed in 1871 after four years of construction. "
    "Its tower rises 38 metres above the rocky headland. <C1>The original lamp burned colza oil "
    "and could be seen from 19 nautical miles away. In 1923 the oil lamp was replaced by an "
    "electric lantern. <C2>The last resident keeper, Margaret Ives, left in 1964 when the light "
    "was automated. Today the keeper's cottage houses a small maritime museum.\n\n"
    "[Document End]\n\n"
    "[Question]\n"
    "How did the lighting at Harlow Point change over time?\n\n"
    "[Answer with Citations]\n"
    "<statement>The lighting at Harlow Point went through several stages.<cite></cite>"
    "</statement><statement>When the lighthouse opened in 1871, its lamp burned colza oil and "
    "was visible from 19 nautical miles.<cite>[0][1]</cite></statement><statement>The oil lamp "
    "gave way to an electric lantern in 1923, and the light was fully automated in 1964, ending "
    "the era of resident keepers.<cite>[1][2]</cite></statement>";

constexpr const char* kExampleCoarse =
    "[Contexts Start]\n"
    "Snippet [1]\n"
    "The Harlow Point lighthouse was completed in 1871 after four years of construction. Its "
    "tower rises 38 metres above the rocky headland.\n\n"
    "Snippet [2]\n"
    "The original lamp burned colza oil and could be seen from 19 nautical miles away. In 1923 "
    "the oil lamp was replaced by an electric lantern.\n\n"
    "Snippet [3]\n"
    "The last resident keeper, Margaret Ives, left in 1964 when the light was automated. Today "
    "the keeper's cottage houses a small maritime museum.\n\n"
    "[Context End]\n\n"
    "[Question]\n"
    "How did the lighting at Harlow Point change over time?\n\n"
    "[Existing Answer Start]\n"
    "The lighting at Harlow Point went through several stages. When the lighthouse opened in "
    "1871, its lamp burned colza oil and was visible from 19 nautical miles. The oil lamp gave "
    "way to an electric lantern in 1923, and the light was fully automated in 1964.\n\n"
    "[Existing Answer End]\n\n"
    "[Answer with Citations]\n"
    "<statement>The lighting at Harlow Point went through several stages.<cite></cite>"
    "</statement><statement> When the lighthouse opened in 1871, its lamp burned colza oil and "
    "was visible from 19 nautical miles.<cite>[1][2]</cite></statement><statement> The oil lamp "
    "gave way to an electric lantern in 1923, and the light was fully automated in 1964."
    "<cite>[2][3]</cite></statement>";

constexpr const char* kExamplePosthocSentence =
    "[Document Start]\n"
    "<C0>The Harlow Point lighthouse was completed in 1871 after four years of construction. "
    "<C1>Its tower rises 38 metres above the rocky headland. <C2>The original lamp burned "
    "colza oil and could be seen from 19 nautical miles away. <C3>In 1923 the oil lamp was "
    "replaced by an electric lantern. <C4>The last resident keeper, Margaret Ives, left in 1964 "
    "when the light was automated. <C5>Today the keeper's cottage houses a small maritime "
    "museum.\n\n"
    "[Document End]\n\n"
    "[Question]\n"
    "How did the lighting at Harlow Point change over time?\n\n"
    "[Existing Answer Start]\n"
    "The lighting at Harlow Point went through several stages. When the lighthouse opened in "
    "1871, its lamp burned colza oil and was visible from 19 nautical miles. The oil lamp gave "
    "way to an electric lantern in 1923, and the light was fully automated in 1964.\n\n"
    "[Existing Answer End]\n\n"
    "[Answer with Citations]\n"
    "<statement>The lighting at Harlow Point went through several stages.<cite></cite>"
    "</statement><statement> When the lighthouse opened in 1871, its lamp burned colza oil and "
    "was visible from 19 nautical miles.<cite>[0-0][2-2]</cite></statement><statement> The oil "
    "lamp gave way to an electric lantern in 1923, and the light was fully automated in 1964."
    "<cite>[3-4]</cite></statement>";

constexpr const char* kExampleFine1 =
    "[Passage Start]\n"
    "<C0>Coastal wetlands cover roughly 6 percent of the county. <C1>Most of them lie along the "
    "southern estuary. <C2>Between 1990 and 2010 about a fifth of this area was drained for "
    "farmland. <C3>Drainage also lowered the water table in nearby villages. <C4>A restoration "
    "programme began in 2012.\n\n"
    "[Passage End]\n\n"
    "[Statment]\n"
    "Around 20 percent of the county's coastal wetlands were drained for agriculture in the two "
    "decades before 2010.\n\n"
    "[output]\n"
    "[0-0]\n"
    "[2-2]";

constexpr const char* kExampleFine2 =
    "[Passage Start]\n"
    "<C0>The committee met on 3 March. <C1>It reviewed the draft budget line by line. <C2>Three "
    "members objected to the cut in library funding. <C3>After a long debate the cut was "
    "halved. <C4>The revised budget passed by seven votes to two. <C5>The next meeting was "
    "scheduled for April.\n\n"
    "[Passage End]\n\n"
    "[Statment]\n"
    "Objections from committee members led to the library funding cut being reduced by half "
    "before the budget was approved.\n\n"
    "[output]\n"
    "[2-4]";

constexpr const char* kExampleFine3 =
    "[Passage Start]\n"
    "<C0>The bridge opened to traffic in 1932. <C1>Its steel arch spans 503 metres. "
    "<C2>Painting the structure takes a crew of twelve about ten years.\n\n"
    "[Passage End]\n\n"
    "[Statment]\n"
    "The city's tram network was extended to the northern suburbs in 1958.\n\n"
    "[output]\n"
    "No relevant information";

// ---- Judge prompts ------------------------------------------------------

constexpr const char* kCorrectnessChat =
    "[Instructions] You are asked to evaluate the quality of the AI assistant’s answers to user "
    "questions as an impartial judge, and your evaluation should take into account factors "
    "including correctness (high priority), helpfulness, accuracy, and relevance. The scoring "
    "principles are as follows: 1. Read the AI assistant’s answer and compare the assistant’s "
    "answer with the reference answer. 2. Identify all errors in the AI Assistant’s answers and "
    "consider how much they affect the answer to the question. 3. Evaluate how helpful the AI "
    "assistant’s answers are in directly answering the user’s questions and providing the "
    "information the user needs. 4. Examine any additional information in the AI assistant’s "
    "answer to ensure that it is correct and closely related to the question. If this "
    "information is incorrect or not relevant to the question, points should be deducted from "
    "the overall score. Please give an overall integer rating from 1 to 10 based on the above "
    "principles, strictly in the following format: \"[[rating]]\", e.g. \"[[5]]\".\n\n"
    "[Question] {{question}}\n\n"
    "[Reference answer begins] {{reference}} [Reference answer ends]\n\n"
    "Below are several assistants’ answers and their ratings:\n\n"
    "{{examples}}"
    "Please rate the following assistant answers based on the scoring principles and examples "
    "above:\n\n"
    "[Assistant’s answer begins] {{response}} [Assistant’s answer ends]\n\n"
    "Rating:";

constexpr const char* kCorrectnessChatExample =
    "[Assistant’s answer begins] {{answer}} [Assistant’s answer ends]\n\n"
    "Rating: [[{{rating}}]]\n\n";

constexpr const char* kCorrectnessQa =
    "You are asked to evaluate the quality of the AI assistant’s answers to user question as an "
    "impartial judge, and your evaluation should take into account factors including "
    "correctness (high priority), and comprehensiveness (whether the assistant’s answer covers "
    "all points). Read the AI assistant’s answer and compare against the reference answer, and "
    "give an overall integer rating in 1, 2, 3 (1 = wrong or irrelevant, 2 = partially correct, "
    "3 = correct and comprehensive) based on the above principles, strictly in the following "
    "format:\"[[rating]]\", e.g. \"[[2]]\".\n\n"
    "Question:\n\n"
    "{{question}}\n\n"
    "Reference answer:\n\n"
    "{{reference}}\n\n"
    "Assistant’s answer:\n\n"
    "{{response}}\n\n"
    "Rating:";

constexpr const char* kCorrectnessSummary =
    "You are asked to evaluate the quality of the AI assistant’s generated summary as an "
    "impartial judge, and your evaluation should take into account factors including "
    "correctness (high priority), comprehensiveness (whether the assistant’s summary covers all "
    "points), and coherence. Read the AI assistant’s summary and compare against the reference "
    "summary, and give an overall integer rating in on a scale of 1 to 5, where 1 is the lowest "
    "and 5 is the highest based on the evaluation criteria, strictly in the following "
    "format:\"[[rating]]\", e.g. \"[[3]]\".\n\n"
    "Question:\n\n"
    "{{question}}\n\n"
    "Reference answer:\n\n"
    "{{reference}}\n\n"
    "Assistant’s answer:\n\n"
    "{{response}}\n\n"
    "Rating:";

constexpr const char* kSupportJudge =
    "You are an expert in evaluating text quality. You will receive a user's question about an "
    "uploaded document, a factual statement from an AI assistant's response based on that "
    "document, and a snippet from the document (since the document is too long to display in "
    "full). Your task is to carefully assess whether this statement is supported by the "
    "snippet. Please use the following scale to generate your rating:\n\n"
    "- [[Fully supported]] - Most information in the statement is supported by or extracted "
    "from the snippet. This applies only to cases where the statement and parts of the snippet "
    "are almost identical.\n\n"
    "- [[Partially supported]] - More than half of the content in the statement is supported by "
    "the snippet, but a small portion is either not mentioned or contradicts the snippet. For "
    "example, if the statement has two key points and the snippet supports only one of them, it "
    "should be considered [Partially supported].\n\n"
    "- [[No support]] - The statement is largely unrelated to the snippet, or most key points in "
    "the statement do not align with the content of the snippet.\n\n"
    "Ensure that you do not use any information or knowledge outside of the snippet when "
    "evaluating.\n\n"
    "Please provide the rating first, followed by the analysis, in the format \"Rating: [[...]] "
    "Analysis: ...\".\n\n"
    "<question>\n"
    "{{question}}\n"
    "</question>\n\n"
    "<statement>\n"
    "{{statement}}\n"
    "</statement>\n\n"
    "<snippet>\n"
    "{{snippet}}\n"
    "</statement>\n";

constexpr const char* kNeedCitationJudge =
    "You are an expert in evaluating text quality. You will receive a user's question regarding "
    "their uploaded document (due to the length of the document, it is not shown to you), an AI "
    "assistant's response based on the document, and a sentence from the response. Your task is "
    "to determine whether this sentence is a factual statement made based on the information in "
    "the document that requires citation, rather than an introductory sentence, transition "
    "sentence, or a summary, reasoning, or inference based on the previous response.\n"
    "Ensure that you do not use any other external information during your evaluation.\n"
    "Please first provide your judgment (answer with [[Yes]] or [[No]]), then provide your "
    "analysis in the format \"Need Citation: [[Yes/No]] Analysis: ...\".\n\n"
    "<question>\n"
    "{{question}}\n"
    "</question>\n\n"
    "<response>\n"
    "{{response}}\n"
    "</response>\n\n"
    "<statement>\n"
    "{{statement}}\n"
    "</statement>\n";

constexpr const char* kRelevanceJudge =
    "You are an expert in evaluating text quality. You will receive a user's question about an "
    "uploaded document, a factual statement from an AI assistant's response based on that "
    "document, and a snippet from the document (since the document is too long to display in "
    "full). Your task is to carefully assess whether the snippet contains some key information "
    "of the statement. Please use the following grades to generate the rating:\n"
    "- [[Relevant]] - Some key points of the statement are supported by the snippet or "
    "extracted from it.\n"
    "- [[Unrelevant]] - The statement is almost unrelated to the snippet, or all key points of "
    "the statement are inconsistent with the snippet content.\n"
    "Ensure that you do not use any information or knowledge outside of the snippet when "
    "evaluating.\n"
    "Please provide the rating first, followed by the analysis, in the format \"Rating: [[...]] "
    "Analysis: ...\".\n\n"
    "<question>\n"
    "{{question}}\n"
    "</question>\n\n"
    "<statement>\n"
    "{{statement}}\n"
    "</statement>\n\n"
    "<snippet>\n"
    "{{snippet}}\n"
    "</statement>\n";

std::string qa_gen_name(TaskType type, bool chinese) {
  return std::string("qa_gen.") + (chinese ? "zh." : "en.") + std::string(to_string(type));
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace

PromptSet PromptSet::defaults() {
  PromptSet set;
  auto& t = set.templates_;
  t[qa_gen_name(TaskType::General, false)] = kQaGenEnglishGeneral;
  t[qa_gen_name(TaskType::Summary, false)] = kQaGenEnglishSummary;
  t[qa_gen_name(TaskType::MultiHop, false)] = kQaGenEnglishMultiHop;
  t[qa_gen_name(TaskType::InfoExtract, false)] = kQaGenEnglishInfoExtract;
  t[qa_gen_name(TaskType::General, true)] = kQaGenChineseGeneral;
  t[qa_gen_name(TaskType::Summary, true)] = kQaGenChineseSummary;
  t[qa_gen_name(TaskType::MultiHop, true)] = kQaGenChineseMultiHop;
  t[qa_gen_name(TaskType::InfoExtract, true)] = kQaGenChineseInfoExtract;
  t["vanilla_answer"] = kVanillaAnswer;
  t["lac_s.instruction"] = kLacSentenceInstruction;
  t["lac_s.example"] = kExampleLacSentence;
  t["lac_c.instruction"] = kLacChunkInstruction;
  t["lac_c.example"] = kExampleLacChunk;
  t["lac"] = kLacSentence;
  t["coarse_citation"] = kCoarseCitation;
  t["coarse_citation.example"] = kExampleCoarse;
  t["posthoc_sentence"] = kPosthocSentence;
  t["posthoc_sentence.example"] = kExamplePosthocSentence;
  t["fine_extraction"] = kFineExtraction;
  t["fine_extraction.example_1"] = kExampleFine1;
  t["fine_extraction.example_2"] = kExampleFine2;
  t["fine_extraction.example_3"] = kExampleFine3;
  t["judge.correctness.chat"] = kCorrectnessChat;
  t["judge.correctness.chat.example"] = kCorrectnessChatExample;
  t["judge.correctness.qa"] = kCorrectnessQa;
  t["judge.correctness.summary"] = kCorrectnessSummary;
  t["judge.support"] = kSupportJudge;
  t["judge.need_citation"] = kNeedCitationJudge;
  t["judge.relevance"] = kRelevanceJudge;
  return set;
}

std::vector<std::string> PromptSet::load_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
  std::vector<std::string> replaced;
  for (auto& [name, text] : templates_) {
    const auto file = dir / (name + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Unreadable("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    replaced.push_back(name);
  }
  return replaced;
}

const std::string& PromptSet::get(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) throw InvalidArgument("unknown prompt template " + name);
  return it->second;
}

void PromptSet::set(const std::string& name, std::string text) {
  get(name);  // only known names
  templates_[name] = std::move(text);
}

std::map<std::string, std::string> PromptSet::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, text] : templates_) out[name] = sha256_hex(text);
  return out;
}

std::string PromptSet::digest() const {
  std::string lines;
  for (const auto& [name, hash] : hashes()) lines += name + "=" + hash + "\n";
  return sha256_hex(lines);
}

std::string PromptSet::question_generation(TaskType type, Language language,
                                           std::string_view material) const {
  return render_template(get(qa_gen_name(type, language == Language::Chinese)),
                         {{"material", std::string(material)}});
}

std::string PromptSet::vanilla_answer(std::string_view context, std::string_view query) const {
  return render_template(get("vanilla_answer"),
                         {{"context", std::string(context)}, {"question", std::string(query)}});
}

std::string PromptSet::lac_sentence(std::string_view numbered_document, std::string_view query) const {
  return render_template(get("lac"), {{"instruction", get("lac_s.instruction")},
                                      {"example", get("lac_s.example")},
                                      {"document", std::string(numbered_document)},
                                      {"question", std::string(query)}});
}

std::string PromptSet::lac_chunk(std::string_view numbered_document, std::string_view query) const {
  return render_template(get("lac"), {{"instruction", get("lac_c.instruction")},
                                      {"example", get("lac_c.example")},
                                      {"document", std::string(numbered_document)},
                                      {"question", std::string(query)}});
}

std::string PromptSet::coarse_citation(std::span<const std::string> snippets,
                                       std::string_view query, std::string_view answer) const {
  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    blocks.push_back("Snippet [" + std::to_string(i + 1) + "]\n" + snippets[i]);
  }
  return render_template(get("coarse_citation"), {{"example", get("coarse_citation.example")},
                                                  {"snippets", join(blocks, "\n\n")},
                                                  {"question", std::string(query)},
                                                  {"answer", std::string(answer)}});
}

std::string PromptSet::fine_extraction(std::string_view numbered_passage,
                                       std::string_view statement) const {
  return render_template(get("fine_extraction"),
                         {{"example_1", get("fine_extraction.example_1")},
                          {"example_2", get("fine_extraction.example_2")},
                          {"example_3", get("fine_extraction.example_3")},
                          {"passage", std::string(numbered_passage)},
                          {"statement", std::string(statement)}});
}

std::string PromptSet::posthoc_sentence(std::string_view numbered_document, std::string_view query,
                                        std::string_view answer) const {
  return render_template(get("posthoc_sentence"), {{"example", get("posthoc_sentence.example")},
                                                   {"document", std::string(numbered_document)},
                                                   {"question", std::string(query)},
                                                   {"answer", std::string(answer)}});
}

std::string PromptSet::support_judge(std::string_view question, std::string_view statement,
                                     std::string_view snippets) const {
  return render_template(get("judge.support"), {{"question", std::string(question)},
                                                {"statement", std::string(statement)},
                                                {"snippet", std::string(snippets)}});
}

std::string PromptSet::need_citation_judge(std::string_view question, std::string_view response,
                                           std::string_view statement) const {
  return render_template(get("judge.need_citation"), {{"question", std::string(question)},
                                                      {"response", std::string(response)},
                                                      {"statement", std::string(statement)}});
}

std::string PromptSet::relevance_judge(std::string_view question, std::string_view statement,
                                       std::string_view snippet) const {
  return render_template(get("judge.relevance"), {{"question", std::string(question)},
                                                  {"statement", std::string(statement)},
                                                  {"snippet", std::string(snippet)}});
}

std::string PromptSet::correctness_judge(CorrectnessScale scale, std::string_view question,
                                         std::span<const std::string> groundtruths,
                                         std::string_view response,
                                         std::span<const RatedAnswer> examples) const {
  std::map<std::string, std::string> vars = {{"question", std::string(question)},
                                             {"reference", join(groundtruths, "\n")},
                                             {"response", std::string(response)}};
  switch (scale) {
    case CorrectnessScale::Chat10: {
      std::string shots;
      for (const RatedAnswer& ex : examples) {
        shots += render_template(get("judge.correctness.chat.example"),
                                 {{"answer", ex.answer}, {"rating", std::to_string(ex.rating)}});
      }
      vars["examples"] = std::move(shots);
      return render_template(get("judge.correctness.chat"), vars);
    }
    case CorrectnessScale::QA3:
      return render_template(get("judge.correctness.qa"), vars);
    case CorrectnessScale::Summ5:
      return render_template(get("judge.correctness.summary"), vars);
  }
  throw InvalidArgument("unknown correctness scale");
}

std::string PromptSet::lac_instruction() const { return get("lac_s.instruction"); }

}  // namespace lqac
