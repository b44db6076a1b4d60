#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lqac {

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  // Unset means "whatever the backend defaults to".
  std::optional<double> temperature;
  std::size_t max_output_tokens = 1024;
  std::string model_name;
  // Distinguishes deliberate re-asks of an identical prompt (judge retries).
  // Only part of the fingerprint when non-zero.
  int attempt = 0;

  static ChatRequest user(std::string content, std::optional<double> temperature = 0.0,
                          std::size_t max_output_tokens = 1024);

  // Throws InvalidArgument on empty messages or negative temperature.
  void validate() const;
};

// Canonical JSON form (sorted keys, no whitespace) and its SHA-256.
std::string canonical_json(const ChatRequest& request);
std::string fingerprint(const ChatRequest& request);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dimension() const { return values.size(); }
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  // One vector per input, in input order. Throws InvalidArgument on empty input.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
};

// Bounds the number of in-flight operations across threads.
class ConcurrencyLimit {
 public:
  explicit ConcurrencyLimit(std::size_t limit);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimit& owner) : owner_(&owner) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Permit& operator=(Permit&&) = delete;
    ~Permit() {
      if (owner_) owner_->release();
    }

   private:
    ConcurrencyLimit* owner_;
  };

  Permit acquire();
  std::size_t limit() const { return limit_; }

 private:
  void release();

  std::size_t limit_;
  std::size_t in_use_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

struct TranscriptEntry {
  std::string fingerprint;
  std::string request_digest;  // model name plus a preview of the last message
  std::string response;
};

std::string request_digest(const ChatRequest& request);

// fingerprint -> response store backed by a JSON Lines file. Reads are
// concurrent; writes are serialized and appended (and flushed) immediately,
// so an interrupted run keeps everything recorded so far.
class Transcript {
 public:
  Transcript() = default;

  // Loads `path` if it exists and appends new entries to it. A truncated
  // final line (interrupted write) is ignored; other malformed lines throw
  // Unreadable.
  static std::shared_ptr<Transcript> open(const std::filesystem::path& path);
  static std::shared_ptr<Transcript> load(const std::filesystem::path& path);

  std::optional<std::string> find(const std::string& fingerprint) const;
  void record(TranscriptEntry entry);
  std::size_t size() const;
  std::vector<TranscriptEntry> entries() const;

 private:
  void read_file(const std::filesystem::path& path);

  mutable std::shared_mutex mutex_;
  std::map<std::string, TranscriptEntry> entries_;
  std::optional<std::ofstream> sink_;
};

// Strict replay: unknown requests throw UnknownFingerprint.
class ReplayChatBackend : public ChatBackend {
 public:
  explicit ReplayChatBackend(std::shared_ptr<const Transcript> transcript);
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "replay"; }

 private:
  std::shared_ptr<const Transcript> transcript_;
};

// Serves recorded responses and forwards misses to `inner`, recording the
// result. Used both as the on-disk judge cache and for transcript capture.
class CachingChatBackend : public ChatBackend {
 public:
  CachingChatBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<Transcript> store);
  std::string complete(const ChatRequest& request) override;
  std::string name() const override;

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<Transcript> store_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

class CountingChatBackend : public ChatBackend {
 public:
  explicit CountingChatBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return inner_->name(); }
  std::size_t calls() const { return calls_; }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::atomic<std::size_t> calls_{0};
};

// Answers with a caller-supplied function; handy for tests and dry runs.
class FunctionChatBackend : public ChatBackend {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;
  FunctionChatBackend(std::string name, Responder responder);
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  Responder responder_;
};

// Deterministic offline embeddings: lexical terms are hashed into signed
// buckets and the result is L2-normalized. Text without terms maps to the
// zero vector.
class HashEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HashEmbeddingBackend(std::size_t dimension = 256);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "hash-embedding"; }

 private:
  std::size_t dimension_;
};

// Lowercased ASCII alphanumeric runs plus individual CJK ideographs.
std::vector<std::string> lexical_terms(std::string_view text);

}  // namespace lqac
