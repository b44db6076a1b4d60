#pragma once

// A tiny on-disk corpus for command-line tests: three documents and a
// three-record benchmark covering all correctness scales.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

namespace lqac::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lqac-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_all(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

inline const char* corpus_text(int i) {
  static const char* kTexts[] = {
      "The river port opened in 1821. Barges carried grain downstream every spring. A fire in 1860 destroyed "
      "the warehouses. The town rebuilt them in brick within two years. Trade declined after the railway "
      "arrived. Today the old quay hosts a market on Saturdays.",
      "Mira Castell trained as a clockmaker in Geneva. She moved to Lyon in 1902 and opened a workshop. Her "
      "tower clocks were installed in six churches. Two of them still keep time. She wrote a manual on "
      "escapements in 1911. It was translated into German and Italian.",
      "The survey counted 412 nesting pairs on the island. Most nests were on the northern cliffs. Rats had "
      "been removed three years earlier. Breeding success doubled after the removal. Volunteers repeat the "
      "count every June. The next survey will add the southern beaches.",
  };
  return kTexts[i];
}

inline void write_documents(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  for (int i = 0; i < 3; ++i) {
    out << nlohmann::json{{"id", "doc-" + std::to_string(i)}, {"text", corpus_text(i)}, {"language", "en"}}.dump()
        << "\n";
  }
}

inline void write_benchmark(const std::string& path) {
  const char* datasets[] = {"longbench-chat", "hotpotqa", "gov_report"};
  const char* queries[] = {"What happened to the warehouses?", "Where did Mira Castell open her workshop?",
                           "Summarize the survey."};
  const char* truths[] = {"They burned in 1860 and were rebuilt in brick.", "In Lyon.",
                          "The survey found 412 pairs and breeding improved after rat removal."};
  std::ofstream out(path, std::ios::binary);
  for (int i = 0; i < 3; ++i) {
    out << nlohmann::json{{"id", "q-" + std::to_string(i)},
                          {"dataset", datasets[i]},
                          {"context", corpus_text(i)},
                          {"query", queries[i]},
                          {"groundtruths", {truths[i]}}}
               .dump()
        << "\n";
  }
}

}  // namespace lqac::testing
