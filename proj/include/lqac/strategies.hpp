#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqac/citemark.hpp"
#include "lqac/cof.hpp"
#include "lqac/textseg.hpp"

namespace lqac {

enum class StrategyId { LacC, LacS, RacC, RacS, PostLcC, PostLcS, PostRcC, PostRcS, Cof };

inline constexpr StrategyId kAllStrategies[] = {
    StrategyId::LacC,    StrategyId::LacS,    StrategyId::RacC,    StrategyId::RacS, StrategyId::PostLcC,
    StrategyId::PostLcS, StrategyId::PostRcC, StrategyId::PostRcS, StrategyId::Cof};

// "lac-c", "lac-s", "rac-c", "rac-s", "post-lc-c", "post-lc-s", "post-rc-c", "post-rc-s", "cof".
std::string_view to_string(StrategyId id);
std::optional<StrategyId> parse_strategy(std::string_view name);
Granularity granularity_of(StrategyId id);
bool is_post_hoc(StrategyId id);

struct StrategyConfig {
  PipelineConfig pipeline;
  // Upper bound on the document tokens shown in full-context prompts. Longer
  // documents are cut at a unit boundary and a warning is recorded.
  std::size_t max_context_tokens = 128000;
};

struct CallTiming {
  std::string stage;
  std::chrono::milliseconds elapsed{0};
};

struct StrategyOutput {
  AnnotatedResponse response;
  std::string raw_output;    // the final citation-bearing model output
  std::string plain_answer;  // strategy answer without markup
  std::vector<CallTiming> timings;
  std::size_t chat_calls = 0;
  bool answer_preserved = true;
  std::vector<std::string> warnings;
};

// Chunk-level responses use 0-based global chunk ids and sentence-level
// responses use global sentence ids, whatever the strategy presented.
StrategyOutput run_strategy(StrategyId id, const Context& context, std::string_view query,
                            const StrategyConfig& config, const ModelSuite& models);

}  // namespace lqac
