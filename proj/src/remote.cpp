#include "lqac/remote.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "lqac/error.hpp"

namespace lqac {

using nlohmann::json;

std::chrono::milliseconds RetryPolicy::backoff_for(int retry_index) const {
  const double scaled =
      static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry_index);
  const double capped = std::min(scaled, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

class RemoteEndpoint {
 public:
  explicit RemoteEndpoint(RemoteConfig config)
      : config_(std::move(config)), limit_(std::max<std::size_t>(config_.parallelism, 1)) {
    if (config_.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    if (config_.api_key) {
      api_key_ = *config_.api_key;
    } else if (const char* value = std::getenv(config_.api_key_env.c_str())) {
      api_key_ = value;
    }
    if (api_key_.empty()) {
      throw AuthError("no API key: set " + config_.api_key_env);
    }
    // "https://host:port/v1" -> origin "https://host:port", prefix "/v1".
    const std::string& url = config_.base_url;
    const std::size_t scheme_end = url.find("://");
    const std::size_t path_start =
        url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    origin_ = url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  const RemoteConfig& config() const { return config_; }

  // POSTs `body` to `path` and returns the parsed JSON response.
  json post(const std::string& path, const json& body) {
    const auto permit = limit_.acquire();
    const std::string payload = body.dump(-1, ' ', false, json::error_handler_t::replace);
    const RetryPolicy& retry = config_.retry;
    std::string last_problem;
    bool rate_limited = false;
    for (int attempt = 0; attempt < retry.max_attempts; ++attempt) {
      if (attempt > 0) {
        const auto delay = retry.backoff_for(attempt - 1);
        if (retry.sleep) {
          retry.sleep(delay);
        } else {
          std::this_thread::sleep_for(delay);
        }
      }
      httplib::Client client(origin_);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      client.set_bearer_token_auth(api_key_);
      const auto result = client.Post(prefix_ + path, payload, "application/json");
      if (!result) {
        rate_limited = false;
        last_problem = "transport failure: " + httplib::to_string(result.error());
        continue;
      }
      const int status = result->status;
      if (status == 401 || status == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
      }
      if (status == 429) {
        rate_limited = true;
        last_problem = "HTTP 429";
        continue;
      }
      if (status >= 500 || status == 408) {
        rate_limited = false;
        last_problem = "HTTP " + std::to_string(status);
        continue;
      }
      if (status < 200 || status >= 300) {
        throw TransportError("HTTP " + std::to_string(status) + ": " + result->body.substr(0, 500));
      }
      json parsed = json::parse(result->body, nullptr, false);
      if (parsed.is_discarded()) throw TransportError("response body is not JSON");
      return parsed;
    }
    const std::string message = "giving up after " + std::to_string(retry.max_attempts) +
                                " attempts: " + last_problem;
    if (rate_limited) throw RateLimitedExhausted(message);
    throw TransportError(message);
  }

 private:
  RemoteConfig config_;
  ConcurrencyLimit limit_;
  std::string api_key_;
  std::string origin_;
  std::string prefix_;
};

RemoteChatBackend::RemoteChatBackend(RemoteConfig config)
    : endpoint_(std::make_unique<RemoteEndpoint>(std::move(config))) {}

RemoteChatBackend::~RemoteChatBackend() = default;

std::string RemoteChatBackend::name() const { return endpoint_->config().model; }

std::string RemoteChatBackend::complete(const ChatRequest& request) {
  request.validate();
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {
      {"model", request.model_name.empty() ? endpoint_->config().model : request.model_name},
      {"messages", std::move(messages)},
      {"max_tokens", request.max_output_tokens},
  };
  if (request.temperature) body["temperature"] = *request.temperature;
  const json response = endpoint_->post("/chat/completions", body);
  try {
    const json& content = response.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("unexpected chat response shape: ") + e.what());
  }
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(RemoteConfig config, std::size_t dimension)
    : endpoint_(std::make_unique<RemoteEndpoint>(std::move(config))), dimension_(dimension) {
  if (endpoint_->config().embedding_batch == 0) throw ConfigError("embedding_batch must be >= 1");
}

RemoteEmbeddingBackend::~RemoteEmbeddingBackend() = default;

std::string RemoteEmbeddingBackend::name() const { return endpoint_->config().model; }

std::vector<EmbeddingVector> RemoteEmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed called with no texts");
  const std::size_t batch = endpoint_->config().embedding_batch;
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
    const std::size_t end = std::min(texts.size(), begin + batch);
    json input = json::array();
    for (std::size_t i = begin; i < end; ++i) {
      // Some endpoints reject empty strings; a single space embeds the same "nothing".
      input.push_back(texts[i].empty() ? std::string(" ") : texts[i]);
    }
    const json response =
        endpoint_->post("/embeddings", {{"model", endpoint_->config().model}, {"input", input}});
    std::vector<EmbeddingVector> part(end - begin);
    try {
      const json& data = response.at("data");
      if (data.size() != end - begin) throw TransportError("embedding count mismatch");
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t index = data[i].value("index", i);
        if (index >= part.size()) throw TransportError("embedding index out of range");
        part[index].values = data[i].at("embedding").get<std::vector<float>>();
        if (part[index].dimension() != dimension_) {
          throw TransportError("embedding dimension " + std::to_string(part[index].dimension()) +
                               " != configured " + std::to_string(dimension_));
        }
      }
    } catch (const json::exception& e) {
      throw TransportError(std::string("unexpected embedding response shape: ") + e.what());
    }
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace lqac
