#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "lqac/modelgate.hpp"

namespace lqac {

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};
  // Replaced in tests so backoffs do not actually sleep.
  std::function<void(std::chrono::milliseconds)> sleep;

  std::chrono::milliseconds backoff_for(int retry_index) const;
};

// Settings for an OpenAI-compatible endpoint.
struct RemoteConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  // Takes precedence over the environment variable when set.
  std::optional<std::string> api_key;
  std::chrono::seconds timeout{120};
  std::size_t parallelism = 4;
  std::size_t embedding_batch = 100;
  RetryPolicy retry;
};

// Shared HTTP plumbing: endpoint parsing, credentials, retry loop.
class RemoteEndpoint;

class RemoteChatBackend : public ChatBackend {
 public:
  // Throws AuthError when no API key is configured.
  explicit RemoteChatBackend(RemoteConfig config);
  ~RemoteChatBackend() override;

  std::string complete(const ChatRequest& request) override;
  std::string name() const override;

 private:
  std::unique_ptr<RemoteEndpoint> endpoint_;
};

class RemoteEmbeddingBackend : public EmbeddingBackend {
 public:
  RemoteEmbeddingBackend(RemoteConfig config, std::size_t dimension);
  ~RemoteEmbeddingBackend() override;

  // Splits `texts` into batches of at most config.embedding_batch.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  std::string name() const override;

 private:
  std::unique_ptr<RemoteEndpoint> endpoint_;
  std::size_t dimension_;
};

}  // namespace lqac
