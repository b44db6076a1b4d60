// Regenerates the scripted CoF fixture: runs the pipeline against a scripted
// model, records every call, and writes the resulting instance.
//
//   make_cof_golden <fixture-dir>
//
// Reads <dir>/document.txt and writes <dir>/transcript.jsonl and
// <dir>/instance.json. Aborts if the document no longer has the chunk
// layout the script relies on.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "lqac/cof.hpp"
#include "support/corpus.hpp"
#include "support/fake_llm.hpp"

using namespace lqac;
using testing::FakeLlm;
using testing::PromptKind;

namespace {

constexpr std::uint64_t kSeed = 7;

const char* const kAnswer[] = {
    "The canal was built between 1794 and 1801 to carry coal from Hensby.",
    "Traffic peaked in 1838 at more than forty thousand tons.",
    "After the railway bought it in 1852 the canal declined, carrying its last cargo in 1921 before silting up.",
    "In short, the canal rose and fell with the coal trade.",
};
const char* const kCoarseCites[] = {"[1]", "[2][3]", "[1][3]", ""};

// Local label of the sentence with global id `global` in a numbered passage.
std::optional<std::size_t> label_of(const std::string& passage, const Context& ctx, std::size_t global) {
  const std::string& text = ctx.sentences()[global].text;
  const auto at = passage.find(">" + text);
  if (at == std::string::npos) return std::nullopt;
  const auto open = passage.rfind("<C", at);
  return std::stoul(passage.substr(open + 2, at - open - 2));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_cof_golden <fixture-dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  const std::string text = testing::read_all((dir / "document.txt").string());
  const PipelineConfig config;
  const Context ctx = Context::build(text, TokenCounter::approximate(), config.chunk_size, Language::English);
  if (ctx.chunks().size() != 3 || ctx.sentences().size() != 17) {
    std::cerr << "document layout changed: " << ctx.chunks().size() << " chunks, " << ctx.sentences().size()
              << " sentences\n";
    return 1;
  }

  FakeLlm llm;
  llm.on(PromptKind::QuestionGeneration, [](const std::string&) {
    return std::string(
        "1: When was the Alder Canal built and why?\n2: Who engineered the canal?\n"
        "3: How did the railway affect the canal?\n4: What happened to the canal after closure?\n"
        "5: What cargoes did the canal carry?");
  });
  llm.on(PromptKind::Vanilla, [](const std::string&) {
    std::string out;
    for (const char* s : kAnswer) out += std::string(out.empty() ? "" : " ") + s;
    return out;
  });
  llm.on(PromptKind::CoarseCitation, [](const std::string&) {
    std::string out;
    for (int i = 0; i < 4; ++i) {
      out += std::string("<statement>") + kAnswer[i] + "<cite>" + kCoarseCites[i] + "</cite></statement>";
      if (i < 3) out += "\n";
    }
    return out;
  });
  llm.on(PromptKind::FineExtraction, [&](const std::string& prompt) -> std::string {
    const std::string passage = testing::last_between(prompt, "[Passage Start]\n", "\n\n[Passage End]");
    const std::string statement = testing::last_between(prompt, "[Statment]\n", "\n\n[output]");
    const bool has_first = label_of(passage, ctx, 0).has_value();
    const bool has_last = label_of(passage, ctx, 16).has_value();
    const int chunk = has_first && !has_last ? 0 : has_first ? 1 : 2;
    auto span = [&](std::size_t a, std::size_t b) {
      return "[" + std::to_string(*label_of(passage, ctx, a)) + "-" + std::to_string(*label_of(passage, ctx, b)) + "]";
    };
    if (statement == kAnswer[0]) return span(0, 0);
    if (statement == kAnswer[1]) return chunk == 1 ? "```\n" + span(7, 7) + "\n```" : "No relevant information";
    if (statement == kAnswer[2]) return chunk == 0 ? span(10, 11) : span(11, 13);
    return "No relevant information";
  });

  const std::filesystem::path transcript_path = dir / "transcript.jsonl";
  std::filesystem::remove(transcript_path);
  auto transcript = Transcript::open(transcript_path);
  ModelSuite models;
  models.chat = std::make_shared<CachingChatBackend>(llm.backend(), transcript);
  models.scorer = std::make_shared<LexicalScorer>();

  const CofOutcome outcome = run_cof(Document{"alder-canal", text, Language::English}, config, models, kSeed);
  if (outcome.status != CofStatus::Kept) {
    std::cerr << "scripted run was not kept: " << outcome.reason << "\n";
    return 1;
  }
  std::ofstream(dir / "instance.json", std::ios::binary | std::ios::trunc) << to_json(outcome).dump(2) << "\n";
  std::cout << "recorded " << transcript->size() << " calls\n";
  return 0;
}
