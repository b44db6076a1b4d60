#include "lqac/modelgate.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cmath>
#include <json.hpp>

#include "lqac/digest.hpp"
#include "lqac/error.hpp"
#include "lqac/unicode.hpp"

namespace lqac {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0f];
  }
  return out;
}

ChatRequest ChatRequest::user(std::string content, std::optional<double> temperature,
                              std::size_t max_output_tokens) {
  ChatRequest request;
  request.messages.push_back({"user", std::move(content)});
  request.temperature = temperature;
  request.max_output_tokens = max_output_tokens;
  return request;
}

void ChatRequest::validate() const {
  if (messages.empty()) throw InvalidArgument("chat request has no messages");
  if (temperature && !(*temperature >= 0.0)) {
    throw InvalidArgument("chat request temperature must be >= 0");
  }
}

std::string canonical_json(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"content", m.content}, {"role", m.role}});
  }
  // nlohmann::json objects keep keys sorted, which makes the dump canonical.
  json doc = {
      {"max_output_tokens", request.max_output_tokens},
      {"messages", std::move(messages)},
      {"model", request.model_name},
      {"temperature", request.temperature ? json(*request.temperature) : json(nullptr)},
  };
  if (request.attempt != 0) doc["attempt"] = request.attempt;
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string fingerprint(const ChatRequest& request) {
  return sha256_hex(canonical_json(request));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw InvalidArgument("cosine of vectors with different dimensions");
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += double(a.values[i]) * b.values[i];
    na += double(a.values[i]) * a.values[i];
    nb += double(b.values[i]) * b.values[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ConcurrencyLimit::ConcurrencyLimit(std::size_t limit) : limit_(limit) {
  if (limit == 0) throw InvalidArgument("concurrency limit must be >= 1");
}

ConcurrencyLimit::Permit ConcurrencyLimit::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return in_use_ < limit_; });
  ++in_use_;
  return Permit(*this);
}

void ConcurrencyLimit::release() {
  {
    std::lock_guard lock(mutex_);
    --in_use_;
  }
  cv_.notify_one();
}

std::string request_digest(const ChatRequest& request) {
  std::string preview;
  if (!request.messages.empty()) {
    const std::string& last = request.messages.back().content;
    std::size_t cut = std::min<std::size_t>(last.size(), 80);
    // Do not cut a UTF-8 sequence in half.
    while (cut < last.size() && cut > 0 && (static_cast<unsigned char>(last[cut]) & 0xC0) == 0x80) {
      --cut;
    }
    preview = last.substr(0, cut);
  }
  return (request.model_name.empty() ? "default" : request.model_name) + ": " + preview;
}

std::shared_ptr<Transcript> Transcript::load(const std::filesystem::path& path) {
  auto transcript = std::make_shared<Transcript>();
  transcript->read_file(path);
  return transcript;
}

std::shared_ptr<Transcript> Transcript::open(const std::filesystem::path& path) {
  auto transcript = std::make_shared<Transcript>();
  if (std::filesystem::exists(path)) transcript->read_file(path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  transcript->sink_.emplace(path, std::ios::app | std::ios::binary);
  if (!*transcript->sink_) throw Unreadable("cannot open " + path.string() + " for writing");
  return transcript;
}

void Transcript::read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Unreadable("cannot read transcript " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (unicode::trim(line).empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("fingerprint") ||
        !doc.contains("response")) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn final write
      throw Unreadable(path.string() + ":" + std::to_string(line_no) + ": malformed transcript line");
    }
    TranscriptEntry entry{doc.at("fingerprint").get<std::string>(),
                          doc.value("request_digest", ""),
                          doc.at("response").get<std::string>()};
    entries_.insert_or_assign(entry.fingerprint, std::move(entry));
  }
}

std::optional<std::string> Transcript::find(const std::string& fp) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(fp);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

void Transcript::record(TranscriptEntry entry) {
  std::unique_lock lock(mutex_);
  if (sink_) {
    const json doc = {{"fingerprint", entry.fingerprint},
                      {"request_digest", entry.request_digest},
                      {"response", entry.response}};
    *sink_ << doc.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    sink_->flush();
  }
  entries_.insert_or_assign(entry.fingerprint, std::move(entry));
}

std::size_t Transcript::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<TranscriptEntry> out;
  for (const auto& [_, entry] : entries_) out.push_back(entry);
  return out;
}

ReplayChatBackend::ReplayChatBackend(std::shared_ptr<const Transcript> transcript)
    : transcript_(std::move(transcript)) {}

std::string ReplayChatBackend::complete(const ChatRequest& request) {
  request.validate();
  const std::string fp = fingerprint(request);
  if (auto response = transcript_->find(fp)) return *std::move(response);
  throw UnknownFingerprint(fp);
}

CachingChatBackend::CachingChatBackend(std::shared_ptr<ChatBackend> inner,
                                       std::shared_ptr<Transcript> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

std::string CachingChatBackend::complete(const ChatRequest& request) {
  request.validate();
  const std::string fp = fingerprint(request);
  if (auto response = store_->find(fp)) {
    ++hits_;
    return *std::move(response);
  }
  ++misses_;
  std::string response = inner_->complete(request);
  store_->record({fp, request_digest(request), response});
  return response;
}

std::string CachingChatBackend::name() const { return "cached:" + inner_->name(); }

std::string CountingChatBackend::complete(const ChatRequest& request) {
  ++calls_;
  return inner_->complete(request);
}

FunctionChatBackend::FunctionChatBackend(std::string name, Responder responder)
    : name_(std::move(name)), responder_(std::move(responder)) {}

std::string FunctionChatBackend::complete(const ChatRequest& request) {
  request.validate();
  return responder_(request);
}

namespace {

bool is_term_ideograph(char32_t cp) {
  // CJK letters only; punctuation and full-width forms are separators.
  return unicode::is_cjk(cp) && !(cp >= 0x3000 && cp <= 0x303F) && !(cp >= 0xFF00 && cp <= 0xFF60);
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  return !unicode::is_space(cp) && !unicode::is_cjk(cp) && !(cp >= 0x2000 && cp <= 0x206F) &&
         cp != 0xFFFD;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::vector<std::string> lexical_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = unicode::decode(text, pos);
    if (is_word_char(d.code_point)) {
      if (d.code_point < 0x80) {
        current += static_cast<char>(std::tolower(static_cast<unsigned char>(d.code_point)));
      } else {
        current.append(text.substr(pos, d.length));
      }
    } else {
      if (!current.empty()) terms.push_back(std::move(current));
      current.clear();
      if (is_term_ideograph(d.code_point)) terms.emplace_back(text.substr(pos, d.length));
    }
    pos += d.length;
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

HashEmbeddingBackend::HashEmbeddingBackend(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw InvalidArgument("embedding dimension must be >= 1");
}

std::vector<EmbeddingVector> HashEmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed called with no texts");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    std::vector<double> acc(dimension_, 0.0);
    for (const std::string& term : lexical_terms(text)) {
      const std::uint64_t h = fnv1a(term);
      acc[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    EmbeddingVector vec;
    vec.values.reserve(dimension_);
    for (double v : acc) vec.values.push_back(norm > 0 ? static_cast<float>(v / norm) : 0.0f);
    out.push_back(std::move(vec));
  }
  return out;
}

}  // namespace lqac
