#pragma once

#include <stdexcept>
#include <string>

namespace lqac {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A model produced output that no stage can use (no statements, no questions,
// neither spans nor the no-information sentinel).
class MalformedGeneration : public Error {
 public:
  using Error::Error;
};

// Backend errors.
class AuthError : public Error {
 public:
  using Error::Error;
};

class RateLimitedExhausted : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class UnknownFingerprint : public Error {
 public:
  explicit UnknownFingerprint(const std::string& fingerprint)
      : Error("no transcript entry for request fingerprint " + fingerprint),
        fingerprint_(fingerprint) {}

  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string fingerprint_;
};

// Judge errors.
class JudgeParseError : public Error {
 public:
  using Error::Error;
};

class OutOfScaleRating : public Error {
 public:
  OutOfScaleRating(int rating, int max)
      : Error("rating " + std::to_string(rating) + " outside scale 1.." +
              std::to_string(max)),
        rating_(rating) {}

  int rating() const { return rating_; }

 private:
  int rating_;
};

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

// Dataset / IO errors.
class Unreadable : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqac
