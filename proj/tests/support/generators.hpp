#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lqac/citemark.hpp"
#include "lqac/unicode.hpp"

namespace lqac::testing {

// Seeded generators for property tests.
class TextGen {
 public:
  explicit TextGen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  std::size_t uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  std::string word() {
    static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
    std::string w;
    const std::size_t n = uniform(1, 8);
    for (std::size_t i = 0; i < n; ++i) w += kLetters[uniform(0, kLetters.size() - 1)];
    if (uniform(0, 9) == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  }

  std::string cjk_run() {
    std::string out;
    const std::size_t n = uniform(1, 6);
    for (std::size_t i = 0; i < n; ++i) {
      unicode::append_utf8(out, static_cast<char32_t>(0x4E00 + uniform(0, 2000)));
    }
    return out;
  }

  std::string separator() {
    switch (uniform(0, 9)) {
      case 0:
        return "\n";
      case 1:
        return "  ";
      case 2:
        return "\n\n";
      case 3:
        return "\t";
      default:
        return " ";
    }
  }

  // Mixed prose: words, CJK runs, terminators, quotes, odd whitespace.
  std::string prose(std::size_t pieces) {
    std::string out;
    if (uniform(0, 3) == 0) out += separator();
    for (std::size_t i = 0; i < pieces; ++i) {
      const std::size_t kind = uniform(0, 19);
      if (kind < 12) {
        out += word();
      } else if (kind < 15) {
        out += cjk_run();
      } else if (kind == 15) {
        out += "。";
      } else if (kind == 16) {
        out += "Dr.";
      } else if (kind == 17) {
        out += "\"quoted.\"";
      } else {
        out += uniform(0, 1) ? "." : "?";
      }
      if (uniform(0, 2) != 0) out += separator();
    }
    return out;
  }

  // `n` whitespace-separated ASCII tokens.
  std::string words(std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += separator();
      out += word();
    }
    return out;
  }

  // Statement text that never contains markup tags.
  std::string statement_text() {
    std::string out;
    const std::size_t n = uniform(0, 12);
    for (std::size_t i = 0; i < n; ++i) {
      switch (uniform(0, 11)) {
        case 0:
          out += cjk_run();
          break;
        case 1:
          out += "<b>";  // stray angle brackets are plain text
          break;
        case 2:
          out += "[3]";  // brackets outside <cite> are plain text
          break;
        case 3:
          out += "\n";
          break;
        default:
          out += word();
      }
      if (uniform(0, 1)) out += ' ';
    }
    return out;
  }

  AnnotatedResponse response() {
    AnnotatedResponse r;
    r.granularity = uniform(0, 1) ? Granularity::SentenceLevel : Granularity::ChunkLevel;
    const std::size_t n = uniform(0, 6);
    for (std::size_t i = 0; i < n; ++i) {
      Statement s{statement_text(), {}};
      const std::size_t c = uniform(0, 4);
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t a = uniform(0, 300);
        if (r.granularity == Granularity::ChunkLevel) {
          s.citations.push_back(CitationSpan::chunk(a));
        } else {
          s.citations.push_back(CitationSpan::sentence(a, a + uniform(0, 5)));
        }
      }
      r.statements.push_back(std::move(s));
    }
    return r;
  }

  // Arbitrary bytes biased toward markup fragments.
  std::string markup_noise(std::size_t pieces) {
    static const std::vector<std::string> kFragments = {
        "<statement>", "</statement>", "<cite>", "</cite>", "[", "]", "-",
        "[1]", "[2-4]", "[9-2]", "[99999999999999999999999]", "<", ">", " ",
        "\n", "text", "，", "[-3]", "[a-b]", "<cite", "statement>", "\xff",
        "\xe4\xbd"};
    std::string out;
    for (std::size_t i = 0; i < pieces; ++i) {
      if (uniform(0, 4) == 0) {
        out += static_cast<char>(uniform(0, 255));
      } else {
        out += kFragments[uniform(0, kFragments.size() - 1)];
      }
    }
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace lqac::testing
