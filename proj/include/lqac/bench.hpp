#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lqac/cof.hpp"
#include "lqac/eval.hpp"
#include "lqac/prompts.hpp"
#include "lqac/strategies.hpp"

namespace lqac::bench {

// One benchmark question over one long document.
struct DatasetRecord {
  std::string id;
  std::string dataset;
  std::string context;
  std::string query;
  std::vector<std::string> groundtruths;
  CorrectnessScale scale = CorrectnessScale::QA3;
  std::optional<Language> language;
  // Graded demonstrations for the Chat10 correctness judge.
  std::vector<RatedAnswer> rated_examples;
};

// An existing question/answer pair to annotate with citations.
struct QaRecord {
  std::string id;
  std::string context;
  std::string query;
  std::string answer;
  TaskType task_type = TaskType::General;
  std::optional<Language> language;
};

// Scale implied by a dataset name: longbench-chat -> chat10, gov_report ->
// summ5, the single- and multi-document QA sets -> qa3.
std::optional<CorrectnessScale> scale_for_dataset(std::string_view dataset);

struct Diagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct Ingested {
  std::vector<T> records;
  std::vector<Diagnostic> diagnostics;  // lines that were skipped
};

// JSON Lines readers. Malformed lines are skipped and reported. Throw
// Unreadable when the file cannot be opened and EmptyDataset when no line
// yields a record.
Ingested<DatasetRecord> ingest(const std::filesystem::path& path);
Ingested<Document> ingest_documents(const std::filesystem::path& path);
Ingested<QaRecord> ingest_qa(const std::filesystem::path& path);

DatasetRecord dataset_record_from_json(const nlohmann::json& j);  // throws InvalidArgument

struct EndpointSettings {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t timeout_seconds = 120;
  std::size_t parallelism = 4;
};

struct BenchConfig {
  int version = 1;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;  // records in flight
  StrategyConfig strategy;      // includes the pipeline and retrieval settings
  EndpointSettings chat;
  EndpointSettings judge_endpoint;  // model defaults to the chat model
  JudgeOptions judge;
  std::string embedding_backend = "hash";  // "hash" or "remote"
  std::string embedding_model;
  std::size_t embedding_dimension = 256;
  std::optional<std::string> prompts_dir;

  void validate() const;  // throws ConfigError
};

// Missing keys keep their defaults; unknown keys and a wrong version throw
// ConfigError.
BenchConfig config_from_json(const nlohmann::json& j);
BenchConfig load_config(const std::filesystem::path& path);
// Complete snapshot, without credentials.
nlohmann::ordered_json to_json(const BenchConfig& config);

// Append-only JSON Lines output that can be resumed. Every line carries
// the run id; lines from another run make the file unusable for this run.
class ResumableOutput {
 public:
  // Reads what a previous attempt of the same run left behind and drops a
  // torn final line. Throws ConfigError for a different run id and
  // Unreadable for a malformed line before the last one.
  ResumableOutput(std::filesystem::path path, std::string run_id);

  bool done(const std::string& id) const;
  std::size_t completed() const;
  // Adds run_id, writes one line and flushes.
  void append(nlohmann::ordered_json line);
  // Rewrites the file with lines ordered as in `order`; ids not in `order`
  // go last in their current order.
  void reorder(const std::vector<std::string>& order);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string run_id_;
  std::set<std::string> done_;
  mutable std::mutex mutex_;
};

std::string file_digest(const std::filesystem::path& path);

// Backends used in place of the configured remote endpoints. A mock
// transcript still takes precedence.
struct BackendOverrides {
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<ChatBackend> judge;
};

// Runs the command line and returns the exit status: 0 success, 1 some
// records failed, 2 configuration or I/O error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const BackendOverrides& overrides = {});

}  // namespace lqac::bench
