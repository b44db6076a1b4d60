#include "lqac/bench.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "lqac/digest.hpp"
#include "lqac/error.hpp"
#include "lqac/parallel.hpp"
#include "lqac/remote.hpp"
#include "lqac/unicode.hpp"

namespace lqac::bench {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Unreadable("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw InvalidArgument(std::string("field '") + key + "' must be a string");
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw InvalidArgument(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<Language> optional_language(const json& j) {
  const auto name = optional_string(j, "language");
  if (!name) return std::nullopt;
  const auto language = parse_language(*name);
  if (!language) throw InvalidArgument("unknown language '" + *name + "'");
  return language;
}

// Reads a JSON Lines file, turning each non-blank line into a record.
template <typename T>
Ingested<T> read_jsonl(const fs::path& path, const std::function<T(const json&)>& convert) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Unreadable("cannot open " + path.string());
  Ingested<T> result;
  std::string line;
  std::size_t number = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++number;
    if (unicode::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw InvalidArgument("expected a JSON object");
      T record = convert(j);
      if (!seen.insert(record.id).second) throw InvalidArgument("duplicate id '" + record.id + "'");
      result.records.push_back(std::move(record));
    } catch (const json::exception& e) {
      result.diagnostics.push_back({number, std::string("invalid JSON: ") + e.what()});
    } catch (const InvalidArgument& e) {
      result.diagnostics.push_back({number, e.what()});
    }
  }
  if (result.records.empty()) {
    throw EmptyDataset(path.string() + " contains no usable records (" +
                       std::to_string(result.diagnostics.size()) + " malformed lines)");
  }
  return result;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

}  // namespace

std::optional<CorrectnessScale> scale_for_dataset(std::string_view dataset) {
  std::string name(dataset);
  for (char& c : name) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c == '-') c = '_';
  }
  if (name == "longbench_chat") return CorrectnessScale::Chat10;
  if (name == "gov_report" || name == "govreport") return CorrectnessScale::Summ5;
  if (name == "multifieldqa_en" || name == "multifieldqa_zh" || name == "hotpotqa" || name == "dureader" ||
      name == "multifieldqa" || name == "2wikimultihopqa" || name == "musique") {
    return CorrectnessScale::QA3;
  }
  return std::nullopt;
}

DatasetRecord dataset_record_from_json(const json& j) {
  DatasetRecord r;
  r.id = string_field(j, "id");
  r.dataset = optional_string(j, "dataset").value_or("default");
  r.context = string_field(j, "context");
  r.query = string_field(j, "query");
  if (const auto it = j.find("groundtruths"); it != j.end() && !it->is_null()) {
    if (it->is_string()) {
      r.groundtruths.push_back(it->get<std::string>());
    } else if (it->is_array() && std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_string(); })) {
      r.groundtruths = it->get<std::vector<std::string>>();
    } else {
      throw InvalidArgument("field 'groundtruths' must be a string or a list of strings");
    }
  }
  const auto inferred = scale_for_dataset(r.dataset);
  if (const auto scale = optional_string(j, "scale")) {
    const auto parsed = parse_correctness_scale(*scale);
    if (!parsed) throw InvalidArgument("unknown scale '" + *scale + "'");
    if (inferred && *inferred != *parsed) {
      throw InvalidArgument("scale '" + *scale + "' does not match dataset '" + r.dataset + "'");
    }
    r.scale = *parsed;
  } else if (inferred) {
    r.scale = *inferred;
  } else {
    throw InvalidArgument("no scale given and none implied by dataset '" + r.dataset + "'");
  }
  r.language = optional_language(j);
  if (const auto it = j.find("rated_examples"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw InvalidArgument("field 'rated_examples' must be a list");
    for (const json& e : *it) {
      if (!e.is_object() || !e.contains("answer") || !e.contains("rating") || !e["answer"].is_string() ||
          !e["rating"].is_number_integer()) {
        throw InvalidArgument("rated example needs a string 'answer' and an integer 'rating'");
      }
      r.rated_examples.push_back({e["answer"].get<std::string>(), e["rating"].get<int>()});
    }
  }
  if (r.id.empty()) throw InvalidArgument("empty id");
  return r;
}

Ingested<DatasetRecord> ingest(const fs::path& path) {
  return read_jsonl<DatasetRecord>(path, dataset_record_from_json);
}

Ingested<Document> ingest_documents(const fs::path& path) {
  return read_jsonl<Document>(path, [](const json& j) {
    Document d;
    d.id = string_field(j, "id");
    d.text = j.contains("text") ? string_field(j, "text") : string_field(j, "context");
    d.language = optional_language(j);
    if (d.id.empty()) throw InvalidArgument("empty id");
    return d;
  });
}

Ingested<QaRecord> ingest_qa(const fs::path& path) {
  return read_jsonl<QaRecord>(path, [](const json& j) {
    QaRecord r;
    r.id = string_field(j, "id");
    r.context = string_field(j, "context");
    r.query = string_field(j, "query");
    r.answer = string_field(j, "answer");
    if (const auto type = optional_string(j, "task_type")) {
      const auto parsed = parse_task_type(*type);
      if (!parsed) throw InvalidArgument("unknown task_type '" + *type + "'");
      r.task_type = *parsed;
    }
    r.language = optional_language(j);
    if (r.id.empty()) throw InvalidArgument("empty id");
    return r;
  });
}

// ---- Configuration -------------------------------------------------------

namespace {

// Strict reader over one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      target = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  void read_optional(const char* key, std::optional<double>& target) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      target.reset();
    } else if (it->is_number()) {
      target = it->get<double>();
    } else {
      throw ConfigError(path_ + "." + key + " must be a number or null");
    }
  }

  void read_optional(const char* key, std::optional<std::string>& target) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      target.reset();
    } else if (it->is_string()) {
      target = it->get<std::string>();
    } else {
      throw ConfigError(path_ + "." + key + " must be a string or null");
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown configuration key " + path_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_endpoint(Section& s, EndpointSettings& e) {
  s.read("base_url", e.base_url);
  s.read("model", e.model);
  s.read("api_key_env", e.api_key_env);
  s.read("timeout_seconds", e.timeout_seconds);
  s.read("parallelism", e.parallelism);
}

ordered_json endpoint_json(const EndpointSettings& e) {
  return {{"base_url", e.base_url},
          {"model", e.model},
          {"api_key_env", e.api_key_env},
          {"timeout_seconds", e.timeout_seconds},
          {"parallelism", e.parallelism}};
}

}  // namespace

void BenchConfig::validate() const {
  if (version != 1) throw ConfigError("unsupported configuration version " + std::to_string(version));
  if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
  strategy.pipeline.validate();
  if (strategy.max_context_tokens == 0) throw ConfigError("strategy.max_context_tokens must be positive");
  if (judge.max_attempts < 1) throw ConfigError("judge.max_attempts must be at least 1");
  if (judge.parallelism == 0) throw ConfigError("judge.parallelism must be at least 1");
  if (embedding_backend != "hash" && embedding_backend != "remote") {
    throw ConfigError("embedding.backend must be 'hash' or 'remote'");
  }
  if (embedding_dimension == 0) throw ConfigError("embedding.dimension must be positive");
}

BenchConfig config_from_json(const json& j) {
  BenchConfig c;
  Section root(j, "config");
  root.read("version", c.version);
  if (c.version != 1) throw ConfigError("unsupported configuration version " + std::to_string(c.version));
  root.read("seed", c.seed);
  root.read("parallelism", c.parallelism);
  root.read_optional("prompts_dir", c.prompts_dir);
  PipelineConfig& p = c.strategy.pipeline;
  if (auto s = root.child("pipeline")) {
    s->read("chunk_size", p.chunk_size);
    s->read("min_cited_fraction", p.min_cited_fraction);
    s->read("question_fanout", p.question_fanout);
    s->read("min_document_tokens", p.min_document_tokens);
    s->read("max_document_tokens", p.max_document_tokens);
    s->read("extraction_parallelism", p.extraction_parallelism);
    s->read_optional("generation_temperature", p.generation_temperature);
    s->read("citation_temperature", p.citation_temperature);
    s->read("max_output_tokens", p.max_output_tokens);
    s->finish();
  }
  if (auto s = root.child("retrieval")) {
    s->read("l_max", p.retrieval.l_max);
    s->read("k", p.retrieval.k);
    std::string scorer(to_string(p.retrieval.scorer));
    s->read("scorer", scorer);
    const auto kind = parse_scorer_kind(scorer);
    if (!kind) throw ConfigError("retrieval.scorer must be 'lexical' or 'embedding'");
    p.retrieval.scorer = *kind;
    s->finish();
  }
  if (auto s = root.child("strategy")) {
    s->read("max_context_tokens", c.strategy.max_context_tokens);
    s->finish();
  }
  if (auto s = root.child("chat")) {
    read_endpoint(*s, c.chat);
    s->finish();
  }
  if (auto s = root.child("judge")) {
    read_endpoint(*s, c.judge_endpoint);
    s->read("max_attempts", c.judge.max_attempts);
    s->read("max_output_tokens", c.judge.max_output_tokens);
    s->read("judge_parallelism", c.judge.parallelism);
    s->finish();
  }
  if (auto s = root.child("embedding")) {
    s->read("backend", c.embedding_backend);
    s->read("model", c.embedding_model);
    s->read("dimension", c.embedding_dimension);
    s->finish();
  }
  root.finish();
  c.validate();
  return c;
}

BenchConfig load_config(const fs::path& path) {
  try {
    return config_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ordered_json to_json(const BenchConfig& c) {
  const PipelineConfig& p = c.strategy.pipeline;
  ordered_json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  j["prompts_dir"] = c.prompts_dir ? ordered_json(*c.prompts_dir) : nullptr;
  j["pipeline"] = {{"chunk_size", p.chunk_size},
                   {"min_cited_fraction", p.min_cited_fraction},
                   {"question_fanout", p.question_fanout},
                   {"min_document_tokens", p.min_document_tokens},
                   {"max_document_tokens", p.max_document_tokens},
                   {"extraction_parallelism", p.extraction_parallelism},
                   {"generation_temperature",
                    p.generation_temperature ? ordered_json(*p.generation_temperature) : ordered_json(nullptr)},
                   {"citation_temperature", p.citation_temperature},
                   {"max_output_tokens", p.max_output_tokens}};
  j["retrieval"] = {{"l_max", p.retrieval.l_max}, {"k", p.retrieval.k}, {"scorer", to_string(p.retrieval.scorer)}};
  j["strategy"] = {{"max_context_tokens", c.strategy.max_context_tokens}};
  j["chat"] = endpoint_json(c.chat);
  ordered_json judge = endpoint_json(c.judge_endpoint);
  judge["max_attempts"] = c.judge.max_attempts;
  judge["max_output_tokens"] = c.judge.max_output_tokens;
  judge["judge_parallelism"] = c.judge.parallelism;
  j["judge"] = std::move(judge);
  j["embedding"] = {{"backend", c.embedding_backend},
                    {"model", c.embedding_model},
                    {"dimension", c.embedding_dimension}};
  return j;
}

// ---- Resumable output ----------------------------------------------------

ResumableOutput::ResumableOutput(fs::path path, std::string run_id)
    : path_(std::move(path)), run_id_(std::move(run_id)) {
  if (!fs::exists(path_)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::ofstream create(path_, std::ios::binary);
    if (!create) throw Unreadable("cannot create " + path_.string());
    return;
  }
  const std::string content = read_file(path_);
  std::string kept;
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const bool last = nl == std::string::npos || nl + 1 == content.size();
    const std::string line = content.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    ++number;
    pos = nl == std::string::npos ? content.size() : nl + 1;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      if (last) break;  // interrupted write
      throw Unreadable(path_.string() + ":" + std::to_string(number) + ": malformed line");
    }
    if (nl == std::string::npos) break;  // complete JSON but no newline: still torn
    if (!j.is_object() || !j.contains("run_id") || !j.contains("id")) {
      throw Unreadable(path_.string() + ":" + std::to_string(number) + ": line lacks run_id or id");
    }
    if (j["run_id"] != run_id_) {
      throw ConfigError(path_.string() + " belongs to run " + j["run_id"].get<std::string>() +
                        "; choose another output path");
    }
    done_.insert(j["id"].get<std::string>());
    kept += line;
    kept += '\n';
  }
  if (kept.size() != content.size()) {
    std::ofstream rewrite(path_, std::ios::binary | std::ios::trunc);
    rewrite << kept;
  }
}

bool ResumableOutput::done(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return done_.count(id) > 0;
}

std::size_t ResumableOutput::completed() const {
  std::lock_guard lock(mutex_);
  return done_.size();
}

void ResumableOutput::append(ordered_json line) {
  ordered_json full;
  full["run_id"] = run_id_;
  for (auto& [key, value] : line.items()) full[key] = std::move(value);
  const std::string text = full.dump() + "\n";
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out << text;
  out.flush();
  if (!out) throw Unreadable("cannot write " + path_.string());
  done_.insert(full["id"].get<std::string>());
}

void ResumableOutput::reorder(const std::vector<std::string>& order) {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i], i);
  std::istringstream in(read_file(path_));
  std::vector<std::pair<std::size_t, std::string>> lines;
  for (std::string line; std::getline(in, line);) {
    const auto id = json::parse(line)["id"].get<std::string>();
    const auto it = rank.find(id);
    lines.emplace_back(it == rank.end() ? order.size() : it->second, std::move(line));
  }
  std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const fs::path tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    for (const auto& [r, line] : lines) out << line << '\n';
    if (!out) throw Unreadable("cannot write " + tmp.string());
  }
  fs::rename(tmp, path_);
}

std::string file_digest(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---- Command line --------------------------------------------------------

namespace {

struct Options {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<std::size_t> chunk_size;
  std::optional<std::size_t> k;
  std::optional<std::size_t> l_max;
  std::optional<std::string> scorer;
  std::optional<std::string> model;
  std::optional<std::string> judge_model;
  std::optional<std::string> mock_transcript;
  std::optional<std::string> record_transcript;
  std::optional<std::string> judge_cache;
  std::optional<std::size_t> limit;
  std::string input;
  std::string output;
  // verb specific
  std::string strategy;
  std::string dataset;
  std::string responses;
  std::optional<std::string> report;
  std::string metrics;
  std::optional<std::string> vanilla_metrics;
  std::string label = "model";
  bool skip_citations = false;
  bool skip_correctness = false;
  bool timings = false;
  BackendOverrides overrides;
};

BenchConfig resolve_config(const Options& o) {
  BenchConfig c = o.config_path ? load_config(*o.config_path) : BenchConfig{};
  if (o.seed) c.seed = *o.seed;
  if (o.parallelism) c.parallelism = *o.parallelism;
  if (o.chunk_size) c.strategy.pipeline.chunk_size = *o.chunk_size;
  if (o.k) c.strategy.pipeline.retrieval.k = *o.k;
  if (o.l_max) c.strategy.pipeline.retrieval.l_max = *o.l_max;
  if (o.scorer) {
    const auto kind = parse_scorer_kind(*o.scorer);
    if (!kind) throw ConfigError("--scorer must be 'lexical' or 'embedding'");
    c.strategy.pipeline.retrieval.scorer = *kind;
  }
  if (o.model) c.chat.model = *o.model;
  if (o.judge_model) c.judge_endpoint.model = *o.judge_model;
  if (c.judge_endpoint.model.empty()) c.judge_endpoint.model = c.chat.model;
  c.strategy.pipeline.model_name = c.chat.model;
  c.judge.model_name = c.judge_endpoint.model;
  c.validate();
  return c;
}

RemoteConfig remote_config(const EndpointSettings& e) {
  RemoteConfig r;
  r.base_url = e.base_url;
  r.model = e.model;
  r.api_key_env = e.api_key_env;
  r.timeout = std::chrono::seconds(e.timeout_seconds);
  r.parallelism = e.parallelism;
  return r;
}

// Backends for one invocation.
class Services {
 public:
  Services(const BenchConfig& config, const Options& o, bool needs_chat, bool needs_judge)
      : overrides_(o.overrides) {
    if (o.mock_transcript) replay_ = std::make_shared<ReplayChatBackend>(Transcript::load(*o.mock_transcript));
    if (o.record_transcript) recording_ = Transcript::open(*o.record_transcript);
    models.prompts = PromptSet::defaults();
    if (config.prompts_dir) models.prompts.load_overrides(*config.prompts_dir);
    if (needs_chat) models.chat = wrap(base(config.chat, overrides_.chat), recording_);
    if (needs_judge) {
      std::shared_ptr<ChatBackend> judge_backend = wrap(base(config.judge_endpoint, overrides_.judge), recording_);
      if (o.judge_cache) {
        judge_cache_ = std::make_shared<CachingChatBackend>(judge_backend, Transcript::open(*o.judge_cache));
        judge_backend = judge_cache_;
      }
      judge_counter_ = std::make_shared<CountingChatBackend>(judge_backend);
      judge.emplace(judge_counter_, models.prompts, config.judge);
    }
    std::shared_ptr<EmbeddingBackend> embedder;
    if (config.strategy.pipeline.retrieval.scorer == ScorerKind::EmbeddingCosine) {
      if (config.embedding_backend == "remote") {
        RemoteConfig r = remote_config(config.chat);
        r.model = config.embedding_model;
        embedder = std::make_shared<RemoteEmbeddingBackend>(r, config.embedding_dimension);
      } else {
        embedder = std::make_shared<HashEmbeddingBackend>(config.embedding_dimension);
      }
    }
    models.scorer = make_scorer(config.strategy.pipeline.retrieval.scorer, embedder);
  }

  ModelSuite models;
  std::optional<Judge> judge;

  std::size_t judge_calls() const { return judge_counter_ ? judge_counter_->calls() : 0; }
  std::size_t judge_cache_hits() const { return judge_cache_ ? judge_cache_->hits() : 0; }
  std::size_t judge_backend_calls() const {
    return judge_cache_ ? judge_cache_->misses() : judge_calls();
  }

 private:
  std::shared_ptr<ChatBackend> base(const EndpointSettings& e, const std::shared_ptr<ChatBackend>& injected) {
    if (replay_) return replay_;
    if (injected) return injected;
    return std::make_shared<RemoteChatBackend>(remote_config(e));
  }

  static std::shared_ptr<ChatBackend> wrap(std::shared_ptr<ChatBackend> inner,
                                           const std::shared_ptr<Transcript>& recording) {
    if (!recording) return inner;
    return std::make_shared<CachingChatBackend>(std::move(inner), recording);
  }

  BackendOverrides overrides_;
  std::shared_ptr<ChatBackend> replay_;
  std::shared_ptr<Transcript> recording_;
  std::shared_ptr<CachingChatBackend> judge_cache_;
  std::shared_ptr<CountingChatBackend> judge_counter_;
};

struct InputFile {
  std::string role;
  std::string path;
};

// Run identity and the manifest written next to every output.
class Manifest {
 public:
  Manifest(std::string verb, const BenchConfig& config, const ModelSuite& models, std::vector<InputFile> inputs,
           ordered_json extra)
      : path_() {
    body_["verb"] = std::move(verb);
    body_["config"] = to_json(config);
    body_["prompt_digest"] = models.prompts.digest();
    body_["prompt_hashes"] = models.prompts.hashes();
    body_["counter"] = models.counter.name();
    body_["segmenter"] = kSegmenterVersion;
    body_["seed"] = config.seed;
    body_["parameters"] = std::move(extra);
    ordered_json files = ordered_json::array();
    for (const InputFile& f : inputs) {
      files.push_back({{"role", f.role}, {"path", f.path}, {"sha256", file_digest(f.path)}});
    }
    body_["inputs"] = std::move(files);
    // Paths do not affect identity, contents do.
    ordered_json identity = body_;
    for (auto& f : identity["inputs"]) f.erase("path");
    run_id_ = sha256_hex(identity.dump()).substr(0, 16);
  }

  const std::string& run_id() const { return run_id_; }

  void write(const fs::path& output, const std::string& status, const ordered_json& counts) {
    if (started_at_.empty()) started_at_ = utc_now();
    ordered_json j;
    j["run_id"] = run_id_;
    for (const auto& [k, v] : body_.items()) j[k] = v;
    j["status"] = status;
    j["counts"] = counts;
    j["started_at"] = started_at_;
    j["updated_at"] = utc_now();
    std::ofstream out(output.string() + ".manifest.json", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
  }

 private:
  fs::path path_;
  ordered_json body_;
  std::string run_id_;
  std::string started_at_;
};

template <typename T>
void report_diagnostics(const Ingested<T>& data, const std::string& path, std::ostream& err) {
  for (const Diagnostic& d : data.diagnostics) err << path << ":" << d.line << ": skipped: " << d.message << "\n";
}

template <typename T>
void apply_limit(std::vector<T>& records, const std::optional<std::size_t>& limit) {
  if (limit && records.size() > *limit) records.resize(*limit);
}

// Runs `work` for each pending record with bounded parallelism. Errors are
// reported per record and make the run partial.
template <typename T>
std::size_t process(const std::vector<T>& records, ResumableOutput& sink, std::size_t parallelism,
                    std::ostream& err, const std::function<ordered_json(const T&)>& work) {
  std::vector<const T*> pending;
  for (const T& r : records) {
    if (!sink.done(r.id)) pending.push_back(&r);
  }
  std::vector<std::string> errors(pending.size());
  parallel_for(pending.size(), parallelism, [&](std::size_t i) {
    try {
      ordered_json line = work(*pending[i]);
      sink.append(std::move(line));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t failures = 0;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (errors[i].empty()) continue;
    ++failures;
    err << "record " << pending[i]->id << ": " << errors[i] << "\n";
  }
  std::vector<std::string> order;
  for (const T& r : records) order.push_back(r.id);
  sink.reorder(order);
  return failures;
}

int finish(Manifest& manifest, const fs::path& output, std::size_t total, std::size_t failures,
           ordered_json counts, std::ostream& out, std::string_view verb) {
  counts["records"] = total;
  counts["errors"] = failures;
  manifest.write(output, failures ? "partial" : "complete", counts);
  out << verb << ": run " << manifest.run_id() << ", " << total - failures << "/" << total << " records written to "
      << output.string() << "\n";
  return failures ? 1 : 0;
}

int cmd_generate(const Options& o, std::ostream& out, std::ostream& err) {
  const BenchConfig config = resolve_config(o);
  auto data = ingest_documents(o.input);
  report_diagnostics(data, o.input, err);
  apply_limit(data.records, o.limit);
  Services services(config, o, true, false);
  Manifest manifest("generate", config, services.models, {{"documents", o.input}}, {{"limit", o.limit ? ordered_json(*o.limit) : nullptr}});
  ResumableOutput sink(o.output, manifest.run_id());
  manifest.write(o.output, "running", {});
  std::map<CofStatus, std::size_t> statuses;
  std::mutex mutex;
  const std::size_t failures = process<Document>(
      data.records, sink, config.parallelism, err, [&](const Document& doc) {
        CofOutcome outcome = run_cof(doc, config.strategy.pipeline, services.models, config.seed);
        {
          std::lock_guard lock(mutex);
          ++statuses[outcome.status];
        }
        ordered_json line;
        line["id"] = doc.id;
        line.update(to_json(outcome));
        return line;
      });
  ordered_json counts;
  for (CofStatus s : {CofStatus::Kept, CofStatus::Discarded, CofStatus::Failed}) {
    counts[std::string(to_string(s))] = statuses[s];
  }
  counts["resumed"] = sink.completed() - statuses[CofStatus::Kept] - statuses[CofStatus::Discarded] -
                      statuses[CofStatus::Failed];
  return finish(manifest, o.output, data.records.size(), failures, counts, out, "generate");
}

int cmd_annotate(const Options& o, std::ostream& out, std::ostream& err) {
  const BenchConfig config = resolve_config(o);
  auto data = ingest_qa(o.input);
  report_diagnostics(data, o.input, err);
  apply_limit(data.records, o.limit);
  Services services(config, o, true, false);
  Manifest manifest("annotate", config, services.models, {{"qa", o.input}}, {{"limit", o.limit ? ordered_json(*o.limit) : nullptr}});
  ResumableOutput sink(o.output, manifest.run_id());
  manifest.write(o.output, "running", {});
  const std::size_t failures = process<QaRecord>(data.records, sink, config.parallelism, err, [&](const QaRecord& r) {
    const Document doc{r.id, r.context, r.language};
    QAInstance qa{r.query, r.answer, r.task_type, r.language.value_or(detect_language(r.context))};
    const CofOutcome outcome = run_cof_on_qa(doc, qa, config.strategy.pipeline, services.models, config.seed);
    ordered_json line;
    line["id"] = r.id;
    line.update(to_json(outcome));
    return line;
  });
  return finish(manifest, o.output, data.records.size(), failures, {}, out, "annotate");
}

int cmd_answer(const Options& o, std::ostream& out, std::ostream& err) {
  const bool vanilla = o.strategy == "vanilla";
  const auto strategy = parse_strategy(o.strategy);
  if (!vanilla && !strategy) throw ConfigError("unknown strategy '" + o.strategy + "'");
  const BenchConfig config = resolve_config(o);
  auto data = ingest(o.input);
  report_diagnostics(data, o.input, err);
  apply_limit(data.records, o.limit);
  Services services(config, o, true, false);
  Manifest manifest("answer", config, services.models, {{"dataset", o.input}},
                    {{"strategy", o.strategy}, {"limit", o.limit ? ordered_json(*o.limit) : nullptr}});
  ResumableOutput sink(o.output, manifest.run_id());
  manifest.write(o.output, "running", {});
  const PipelineConfig& pipeline = config.strategy.pipeline;
  const std::size_t failures =
      process<DatasetRecord>(data.records, sink, config.parallelism, err, [&](const DatasetRecord& r) {
        const Context context =
            Context::build(r.context, services.models.counter, pipeline.chunk_size, r.language);
        ordered_json line;
        line["id"] = r.id;
        line["dataset"] = r.dataset;
        line["strategy"] = o.strategy;
        if (vanilla) {
          line["answer"] = generate_answer(context, r.query, services.models, pipeline);
          return line;
        }
        const StrategyOutput result = run_strategy(*strategy, context, r.query, config.strategy, services.models);
        line["granularity"] = to_string(result.response.granularity);
        line["chunk_size"] = pipeline.chunk_size;
        line["response"] = serialize_annotated(result.response);
        line["answer"] = result.plain_answer;
        line["statements"] = to_json(result.response)["statements"];
        line["raw_output"] = result.raw_output;
        line["answer_preserved"] = result.answer_preserved;
        line["chat_calls"] = result.chat_calls;
        line["warnings"] = result.warnings;
        if (o.timings) {
          ordered_json t = ordered_json::array();
          for (const CallTiming& c : result.timings) t.push_back({{"stage", c.stage}, {"ms", c.elapsed.count()}});
          line["timings"] = std::move(t);
        }
        return line;
      });
  return finish(manifest, o.output, data.records.size(), failures, {}, out, "answer");
}

struct ResponseLine {
  std::string id;
  json body;
};

std::vector<ResponseLine> read_responses(const std::string& path, std::ostream& err) {
  auto data = read_jsonl<ResponseLine>(path, [](const json& j) {
    ResponseLine r{string_field(j, "id"), j};
    if (!j.contains("answer") && !j.contains("response")) throw InvalidArgument("line has neither answer nor response");
    return r;
  });
  report_diagnostics(data, path, err);
  return std::move(data.records);
}

ResponseMetrics metrics_from_json(const json& j) {
  ResponseMetrics m;
  m.id = j.at("id");
  m.dataset = j.at("dataset");
  if (!j.at("citation").is_null()) {
    CitationScores s;
    s.recall = j["citation"].at("recall");
    s.precision = j["citation"].at("precision");
    s.f1 = j["citation"].at("f1");
    s.citation_length = j["citation"].at("citation_length");
    m.citation = s;
  }
  if (!j.at("correctness").is_null()) m.correctness = j["correctness"].get<double>();
  m.flags = j.value("flags", std::vector<std::string>{});
  return m;
}

// Run id of the first line and every metrics line.
std::pair<std::string, std::vector<ResponseMetrics>> read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Unreadable("cannot open " + path);
  std::pair<std::string, std::vector<ResponseMetrics>> result;
  std::size_t number = 0;
  for (std::string l; std::getline(in, l);) {
    ++number;
    if (unicode::trim(l).empty()) continue;
    try {
      const json j = json::parse(l);
      if (result.first.empty()) result.first = j.value("run_id", std::string());
      result.second.push_back(metrics_from_json(j));
    } catch (const json::exception& e) {
      throw Unreadable(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return result;
}

std::pair<std::string, CorpusReport> load_metrics(const std::string& path) {
  auto [run_id, all] = read_metrics(path);
  if (all.empty()) throw EmptyDataset(path + " contains no metrics");
  return {run_id, aggregate(all)};
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const BenchConfig config = resolve_config(o);
  auto data = ingest(o.dataset);
  report_diagnostics(data, o.dataset, err);
  std::map<std::string, DatasetRecord> by_id;
  for (DatasetRecord& r : data.records) by_id.emplace(r.id, std::move(r));
  std::vector<ResponseLine> responses = read_responses(o.responses, err);
  apply_limit(responses, o.limit);
  Services services(config, o, false, true);
  Manifest manifest("evaluate", config, services.models, {{"dataset", o.dataset}, {"responses", o.responses}},
                    {{"skip_citations", o.skip_citations},
                     {"skip_correctness", o.skip_correctness},
                     {"limit", o.limit ? ordered_json(*o.limit) : nullptr}});
  ResumableOutput sink(o.output, manifest.run_id());
  manifest.write(o.output, "running", {});
  const Judge& judge = *services.judge;
  const std::size_t failures =
      process<ResponseLine>(responses, sink, config.parallelism, err, [&](const ResponseLine& line) {
        const auto it = by_id.find(line.id);
        if (it == by_id.end()) throw InvalidArgument("no dataset record with this id");
        const DatasetRecord& r = it->second;
        ResponseMetrics m;
        m.id = r.id;
        m.dataset = r.dataset;
        const std::string text = line.body.contains("response") ? line.body["response"].get<std::string>()
                                                                : line.body["answer"].get<std::string>();
        if (!o.skip_citations && line.body.contains("response")) {
          // Chunk ids only resolve against the chunking the answer was produced with.
          const std::size_t chunk_size =
              line.body.value("chunk_size", config.strategy.pipeline.chunk_size);
          const Context context = Context::build(r.context, services.models.counter, chunk_size, r.language);
          const auto granularity =
              parse_granularity(line.body.value("granularity", std::string("sentence"))).value_or(Granularity::SentenceLevel);
          const std::size_t units =
              granularity == Granularity::ChunkLevel ? context.chunks().size() : context.sentences().size();
          const ParseResult parsed = parse_annotated(text, granularity, units == 0 ? 0 : units - 1);
          m.citation = score_citations(parsed.response, context, r.query, judge, services.models.counter);
          if (m.citation->judge_failures) {
            m.flags.push_back(std::to_string(m.citation->judge_failures) + " judge verdicts unparseable");
          }
        }
        if (!o.skip_correctness) {
          try {
            m.correctness = normalized_correctness(
                judge.correctness(r.scale, r.query, r.groundtruths, text, r.rated_examples), r.scale);
          } catch (const JudgeParseError& e) {
            m.correctness = 0.0;
            m.flags.push_back(std::string("correctness: ") + e.what());
          }
        }
        return to_json(m);
      });

  // Aggregate everything in the metrics file, including resumed lines.
  std::vector<ResponseMetrics> all = read_metrics(o.output).second;
  const fs::path report_path = o.report ? fs::path(*o.report) : fs::path(o.output + ".report.json");
  if (!all.empty()) {
    ordered_json report;
    report["run_id"] = manifest.run_id();
    report["label"] = o.label;
    report["aggregate"] = to_json(aggregate(all));
    std::ofstream rout(report_path, std::ios::binary | std::ios::trunc);
    rout << report.dump(2) << '\n';
  }
  out << "judge: " << services.judge_calls() << " requests, " << services.judge_cache_hits() << " cache hits, "
      << services.judge_backend_calls() << " backend calls\n";
  return finish(manifest, o.output, responses.size(), failures,
                {{"judge_requests", services.judge_calls()}, {"judge_cache_hits", services.judge_cache_hits()}},
                out, "evaluate");
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  const auto [run_id, report] = load_metrics(o.metrics);
  std::string md = "<!-- run " + run_id;
  std::optional<std::pair<std::string, CorpusReport>> vanilla;
  if (o.vanilla_metrics) {
    vanilla = load_metrics(*o.vanilla_metrics);
    md += ", vanilla run " + vanilla->first;
  }
  md += " -->\n\n## Citation quality\n\n" + citation_table(report, o.label);
  if (vanilla) {
    const auto rows = correctness_ratios(report, vanilla->second);
    md += "\n## Correctness\n\n" + ratio_table(rows, o.label);
  }
  std::size_t flagged = report.average.flagged;
  if (flagged) md += "\n" + std::to_string(flagged) + " responses carry judge flags.\n";
  md += "\nCorrectness is the rating as a percentage of the scale maximum. Avg columns weight datasets equally.\n";
  if (o.output.empty()) {
    out << md;
  } else {
    std::ofstream f(o.output, std::ios::binary | std::ios::trunc);
    f << md;
    out << "report: written to " << o.output << "\n";
  }
  return 0;
}

void add_common(CLI::App* cmd, Options& o, bool chat_model) {
  cmd->add_option("--config", o.config_path, "JSON configuration file");
  cmd->add_option("--seed", o.seed, "Seed for every random decision");
  cmd->add_option("--parallelism", o.parallelism, "Records processed concurrently");
  cmd->add_option("--mock-transcript", o.mock_transcript, "Replay model calls from this transcript");
  cmd->add_option("--record-transcript", o.record_transcript, "Append every model call to this transcript");
  cmd->add_option("--limit", o.limit, "Process at most this many records");
  if (chat_model) {
    cmd->add_option("--model", o.model, "Chat model name");
    cmd->add_option("--chunk-size", o.chunk_size, "Tokens per chunk");
    cmd->add_option("--k", o.k, "Retrieval budget per answer");
    cmd->add_option("--l-max", o.l_max, "Retrieval cap per answer sentence");
    cmd->add_option("--scorer", o.scorer, "lexical or embedding");
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const BackendOverrides& overrides) {
  CLI::App app{"Long-context question answering with citations: data synthesis, strategies and evaluation", "lqac"};
  app.require_subcommand(1);
  Options o;
  o.overrides = overrides;

  auto* generate = app.add_subcommand("generate", "Synthesize cited QA instances from documents");
  add_common(generate, o, true);
  generate->add_option("--input", o.input, "Documents as JSON Lines {id, text}")->required();
  generate->add_option("--output", o.output, "Instance JSON Lines")->required();

  auto* annotate = app.add_subcommand("annotate", "Add sentence-level citations to existing answers");
  add_common(annotate, o, true);
  annotate->add_option("--input", o.input, "JSON Lines {id, context, query, answer}")->required();
  annotate->add_option("--output", o.output, "Instance JSON Lines")->required();

  auto* answer = app.add_subcommand("answer", "Answer benchmark questions with a citation strategy");
  add_common(answer, o, true);
  answer->add_option("--strategy", o.strategy, "lac-c, lac-s, rac-c, rac-s, post-lc-c, post-lc-s, post-rc-c, post-rc-s, cof or vanilla")
      ->required();
  answer->add_option("--input", o.input, "Benchmark JSON Lines")->required();
  answer->add_option("--output", o.output, "Response JSON Lines")->required();
  answer->add_flag("--timings", o.timings, "Include call timings in the output");

  auto* evaluate = app.add_subcommand("evaluate", "Score responses with judge prompts");
  add_common(evaluate, o, false);
  evaluate->add_option("--judge-model", o.judge_model, "Judge model name");
  evaluate->add_option("--dataset", o.dataset, "Benchmark JSON Lines")->required();
  evaluate->add_option("--responses", o.responses, "Response JSON Lines from `answer`")->required();
  evaluate->add_option("--output", o.output, "Per-response metrics JSON Lines")->required();
  evaluate->add_option("--report", o.report, "Aggregate report JSON (default: <output>.report.json)");
  evaluate->add_option("--judge-cache", o.judge_cache, "Transcript used as a persistent judge cache");
  evaluate->add_option("--label", o.label, "Name shown for this run");
  evaluate->add_flag("--skip-citations", o.skip_citations, "Only judge correctness");
  evaluate->add_flag("--skip-correctness", o.skip_correctness, "Only score citations");

  auto* report = app.add_subcommand("report", "Render Markdown tables from metrics");
  report->add_option("--metrics", o.metrics, "Metrics JSON Lines from `evaluate`")->required();
  report->add_option("--vanilla", o.vanilla_metrics, "Metrics of plain answers, for correctness ratios");
  report->add_option("--label", o.label, "Row label");
  report->add_option("--output", o.output, "Markdown file (default: standard output)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(o, out, err);
    if (annotate->parsed()) return cmd_annotate(o, out, err);
    if (answer->parsed()) return cmd_answer(o, out, err);
    if (evaluate->parsed()) return cmd_evaluate(o, out, err);
    if (report->parsed()) return cmd_report(o, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
  } catch (const AuthError& e) {
    err << "credentials: " << e.what() << "\n";
  } catch (const Unreadable& e) {
    err << "unreadable input: " << e.what() << "\n";
  } catch (const EmptyDataset& e) {
    err << "empty input: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 2;
}

}  // namespace lqac::bench
