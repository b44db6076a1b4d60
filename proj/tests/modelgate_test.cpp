#include "lqac/modelgate.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <json.hpp>
#include <thread>

#include "lqac/error.hpp"
#include "lqac/remote.hpp"

namespace lqac {
namespace {

using nlohmann::json;

TEST(Fingerprint, StableAndSensitive) {
  ChatRequest a = ChatRequest::user("hi");
  ChatRequest b = ChatRequest::user("hi");
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_EQ(fingerprint(a).size(), 64u);
  // Frozen so that transcripts stay valid across builds.
  EXPECT_EQ(canonical_json(a),
            R"({"max_output_tokens":1024,"messages":[{"content":"hi","role":"user"}],"model":"","temperature":0.0})");
  b.temperature = 0.7;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  b = a;
  b.attempt = 1;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  b = a;
  b.temperature.reset();
  EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(ChatRequest, Validation) {
  EXPECT_THROW(ChatRequest{}.validate(), InvalidArgument);
  ChatRequest r = ChatRequest::user("x", -0.5);
  EXPECT_THROW(r.validate(), InvalidArgument);
}

TEST(Replay, ReturnsRecordedResponseAndRejectsUnknown) {
  auto transcript = std::make_shared<Transcript>();
  const ChatRequest hi = ChatRequest::user("hi");
  transcript->record({fingerprint(hi), request_digest(hi), "hello"});
  ReplayChatBackend replay(transcript);
  EXPECT_EQ(replay.complete(hi), "hello");
  try {
    replay.complete(ChatRequest::user("bye"));
    FAIL() << "expected UnknownFingerprint";
  } catch (const UnknownFingerprint& e) {
    EXPECT_EQ(e.fingerprint(), fingerprint(ChatRequest::user("bye")));
  }
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("lqac_mg_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

using TranscriptFile = TempDir;

TEST_F(TranscriptFile, CachePersistsAcrossReopenAndSkipsTornLine) {
  const auto path = dir_ / "cache.jsonl";
  int upstream_calls = 0;
  auto upstream = std::make_shared<FunctionChatBackend>("echo", [&](const ChatRequest& r) {
    ++upstream_calls;
    return "re: " + r.messages.back().content;
  });
  {
    CachingChatBackend cache(upstream, Transcript::open(path));
    EXPECT_EQ(cache.complete(ChatRequest::user("a")), "re: a");
    EXPECT_EQ(cache.complete(ChatRequest::user("a")), "re: a");
    EXPECT_EQ(cache.complete(ChatRequest::user("b")), "re: b");
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_EQ(cache.misses(), 2u);
  }
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"fingerprint":"abc","resp)";  // interrupted write
  }
  auto reopened = Transcript::load(path);
  EXPECT_EQ(reopened->size(), 2u);
  ReplayChatBackend replay(reopened);
  EXPECT_EQ(replay.complete(ChatRequest::user("b")), "re: b");
  EXPECT_EQ(upstream_calls, 2);
}

TEST_F(TranscriptFile, MalformedMiddleLineIsUnreadable) {
  const auto path = dir_ / "bad.jsonl";
  std::ofstream(path) << "not json\n{\"fingerprint\":\"x\",\"response\":\"y\"}\n";
  EXPECT_THROW(Transcript::load(path), Unreadable);
  EXPECT_THROW(Transcript::load(dir_ / "missing.jsonl"), Unreadable);
}

TEST_F(TranscriptFile, ConcurrentRecordingKeepsEveryEntry) {
  const auto path = dir_ / "par.jsonl";
  auto upstream = std::make_shared<FunctionChatBackend>(
      "echo", [](const ChatRequest& r) { return r.messages.back().content; });
  auto cache = std::make_shared<CachingChatBackend>(upstream, Transcript::open(path));
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) cache->complete(ChatRequest::user(std::to_string(t * 1000 + i)));
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(Transcript::load(path)->size(), 400u);
}

TEST(HashEmbedding, DeterministicNormalizedAndOrdered) {
  HashEmbeddingBackend backend(64);
  const std::vector<std::string> texts = {"", "the cat sat", "The CAT sat", "狗在跑"};
  const auto v = backend.embed(texts);
  ASSERT_EQ(v.size(), 4u);
  for (const auto& e : v) EXPECT_EQ(e.dimension(), 64u);
  EXPECT_EQ(v[1].values, v[2].values);
  EXPECT_NEAR(cosine(v[1], v[1]), 1.0, 1e-6);
  EXPECT_EQ(cosine(v[0], v[1]), 0.0);
  EXPECT_EQ(backend.embed(std::vector<std::string>{"狗在跑"})[0].values, v[3].values);
  EXPECT_THROW(backend.embed(std::vector<std::string>{}), InvalidArgument);
}

TEST(LexicalTerms, Examples) {
  EXPECT_EQ(lexical_terms("Hello, World-42 ok"),
            (std::vector<std::string>{"hello", "world", "42", "ok"}));
  EXPECT_EQ(lexical_terms("他说。GLM4"), (std::vector<std::string>{"他", "说", "glm4"}));
  EXPECT_EQ(lexical_terms("café au lait"), (std::vector<std::string>{"café", "au", "lait"}));
}

TEST(ConcurrencyLimit, NeverExceedsLimit) {
  ConcurrencyLimit limit(3);
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 12; ++t) {
    threads.emplace_back([&] {
      auto permit = limit.acquire();
      const int now = ++active;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 1);
}

TEST(RetryPolicy, ExponentialAndCapped) {
  RetryPolicy p;
  EXPECT_EQ(p.backoff_for(0).count(), 1000);
  EXPECT_EQ(p.backoff_for(1).count(), 2000);
  EXPECT_EQ(p.backoff_for(4).count(), 16000);
  EXPECT_EQ(p.backoff_for(5).count(), 30000);
}

// Local OpenAI-compatible fake. Handlers see every request.
class FakeServer : public ::testing::Test {
 protected:
  void start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  RemoteConfig config() {
    RemoteConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    c.model = "fake-model";
    c.api_key = "sk-test";
    c.timeout = std::chrono::seconds(5);
    c.retry.sleep = [this](std::chrono::milliseconds d) { sleeps_.push_back(d); };
    return c;
  }
  static std::string chat_body(const std::string& content) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<std::chrono::milliseconds> sleeps_;
};

TEST_F(FakeServer, RetriesRateLimitThenSucceeds) {
  std::atomic<int> calls{0};
  std::string seen_auth;
  json seen_body;
  server_.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 429;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    res.set_content(chat_body("hello"), "application/json");
  });
  start();
  RemoteChatBackend backend(config());
  EXPECT_EQ(backend.complete(ChatRequest::user("hi")), "hello");
  EXPECT_EQ(calls.load(), 3);
  ASSERT_EQ(sleeps_.size(), 2u);
  EXPECT_EQ(sleeps_[0].count(), 1000);
  EXPECT_EQ(sleeps_[1].count(), 2000);
  EXPECT_EQ(seen_auth, "Bearer sk-test");
  EXPECT_EQ(seen_body["model"], "fake-model");
  EXPECT_EQ(seen_body["temperature"], 0.0);
  EXPECT_EQ(seen_body["messages"][0]["content"], "hi");
}

TEST_F(FakeServer, PersistentRateLimitExhausts) {
  std::atomic<int> calls{0};
  server_.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
  });
  start();
  RemoteChatBackend backend(config());
  EXPECT_THROW(backend.complete(ChatRequest::user("hi")), RateLimitedExhausted);
  EXPECT_EQ(calls.load(), 5);
}

TEST_F(FakeServer, ServerErrorsExhaustAsTransport) {
  server_.Post("/v1/chat/completions",
               [&](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  start();
  RemoteConfig c = config();
  c.retry.max_attempts = 2;
  RemoteChatBackend backend(c);
  EXPECT_THROW(backend.complete(ChatRequest::user("hi")), TransportError);
  EXPECT_EQ(sleeps_.size(), 1u);
}

TEST_F(FakeServer, AuthFailureIsNotRetried) {
  std::atomic<int> calls{0};
  server_.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  start();
  RemoteChatBackend backend(config());
  EXPECT_THROW(backend.complete(ChatRequest::user("hi")), AuthError);
  EXPECT_EQ(calls.load(), 1);
}

TEST_F(FakeServer, MissingKeyIsAuthError) {
  start();
  RemoteConfig c = config();
  c.api_key.reset();
  c.api_key_env = "LQAC_TEST_SURELY_UNSET_KEY";
  EXPECT_THROW(RemoteChatBackend{c}, AuthError);
}

TEST_F(FakeServer, EmbeddingsBatchInOrder) {
  std::atomic<int> calls{0};
  server_.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const json body = json::parse(req.body);
    json data = json::array();
    // Reply in reverse order to check that the index field is honoured.
    for (std::size_t i = body["input"].size(); i-- > 0;) {
      const float v = std::stof(body["input"][i].get<std::string>());
      data.push_back({{"index", i}, {"embedding", {v, 1.0f}}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  start();
  RemoteEmbeddingBackend backend(config(), 2);
  std::vector<std::string> texts;
  for (int i = 0; i < 300; ++i) texts.push_back(std::to_string(i));
  const auto vectors = backend.embed(texts);
  EXPECT_EQ(calls.load(), 3);
  ASSERT_EQ(vectors.size(), 300u);
  for (int i = 0; i < 300; ++i) ASSERT_EQ(vectors[i].values[0], static_cast<float>(i));
}

TEST_F(FakeServer, UnreachableEndpointIsTransportError) {
  start();
  RemoteConfig c = config();
  c.base_url = "http://127.0.0.1:1/v1";
  c.retry.max_attempts = 2;
  RemoteChatBackend backend(c);
  EXPECT_THROW(backend.complete(ChatRequest::user("hi")), TransportError);
}

}  // namespace
}  // namespace lqac
