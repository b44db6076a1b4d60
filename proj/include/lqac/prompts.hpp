#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lqac/textseg.hpp"

namespace lqac {

enum class TaskType { General, Summary, MultiHop, InfoExtract };

std::string_view to_string(TaskType type);
std::optional<TaskType> parse_task_type(std::string_view name);
inline constexpr TaskType kAllTaskTypes[] = {TaskType::General, TaskType::Summary,
                                             TaskType::MultiHop, TaskType::InfoExtract};

enum class CorrectnessScale { Chat10, QA3, Summ5 };

std::string_view to_string(CorrectnessScale scale);
std::optional<CorrectnessScale> parse_correctness_scale(std::string_view name);
int scale_max(CorrectnessScale scale);

// A graded reference answer shown to the correctness judge.
struct RatedAnswer {
  std::string answer;
  int rating = 0;
};

// Substitutes `{{name}}` placeholders in one pass; inserted values are never
// rescanned. Throws InvalidArgument for a placeholder without a value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

// Every prompt template and demonstration, addressable by name so a run can
// override individual entries from a directory of `<name>.txt` files.
class PromptSet {
 public:
  static PromptSet defaults();

  // Replaces entries for which `<dir>/<name>.txt` exists. Unknown files are
  // ignored; returns the names that were overridden.
  std::vector<std::string> load_overrides(const std::filesystem::path& dir);

  const std::string& get(const std::string& name) const;
  void set(const std::string& name, std::string text);

  // name -> SHA-256 of the template text.
  std::map<std::string, std::string> hashes() const;
  // Single digest over all entries.
  std::string digest() const;

  // Builders for each model call.
  std::string question_generation(TaskType type, Language language, std::string_view material) const;
  std::string vanilla_answer(std::string_view context, std::string_view query) const;
  std::string lac_sentence(std::string_view numbered_document, std::string_view query) const;
  std::string lac_chunk(std::string_view numbered_document, std::string_view query) const;
  // Snippets are presented as "Snippet [1]", "Snippet [2]", ... in order.
  std::string coarse_citation(std::span<const std::string> snippets, std::string_view query,
                              std::string_view answer) const;
  std::string fine_extraction(std::string_view numbered_passage, std::string_view statement) const;
  std::string posthoc_sentence(std::string_view numbered_document, std::string_view query,
                               std::string_view answer) const;
  std::string support_judge(std::string_view question, std::string_view statement,
                            std::string_view snippets) const;
  std::string need_citation_judge(std::string_view question, std::string_view response,
                                  std::string_view statement) const;
  std::string relevance_judge(std::string_view question, std::string_view statement,
                              std::string_view snippet) const;
  // Multiple groundtruths are joined with newlines. Chat10 shows `examples`
  // as graded demonstrations.
  std::string correctness_judge(CorrectnessScale scale, std::string_view question,
                                std::span<const std::string> groundtruths,
                                std::string_view response,
                                std::span<const RatedAnswer> examples = {}) const;

  // The task instruction stored with every synthesized training instance.
  std::string lac_instruction() const;

 private:
  std::map<std::string, std::string> templates_;
};

}  // namespace lqac
