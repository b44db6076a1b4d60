#include "lqac/bench.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "lqac/error.hpp"
#include "support/corpus.hpp"
#include "support/fake_llm.hpp"

namespace lqac::bench {
namespace {

using testing::FakeLlm;
using testing::PromptKind;
using testing::TempDir;
using testing::read_all;
using testing::write_all;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args, const BackendOverrides& overrides = {}) {
  std::ostringstream out, err;
  CliResult r;
  r.code = cli_main(args, out, err, overrides);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::size_t line_count(const std::string& path) {
  const std::string s = read_all(path);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

TEST(Ingest, ValidMalformedAndEmpty) {
  TempDir dir;
  testing::write_benchmark(dir.file("b.jsonl"));
  EXPECT_EQ(ingest(dir.file("b.jsonl")).records.size(), 3u);

  write_all(dir.file("m.jsonl"),
            R"({"id":"a","dataset":"hotpotqa","context":"c","query":"q","groundtruths":["x"]})"
            "\n{not json\n");
  const auto mixed = ingest(dir.file("m.jsonl"));
  ASSERT_EQ(mixed.records.size(), 1u);
  ASSERT_EQ(mixed.diagnostics.size(), 1u);
  EXPECT_EQ(mixed.diagnostics[0].line, 2u);
  EXPECT_EQ(mixed.records[0].scale, CorrectnessScale::QA3);

  write_all(dir.file("e.jsonl"), "");
  EXPECT_THROW(ingest(dir.file("e.jsonl")), EmptyDataset);
  EXPECT_THROW(ingest(dir.file("missing.jsonl")), Unreadable);
}

TEST(Ingest, ScalesFollowDatasetFamily) {
  EXPECT_EQ(scale_for_dataset("LongBench-Chat"), CorrectnessScale::Chat10);
  EXPECT_EQ(scale_for_dataset("gov_report"), CorrectnessScale::Summ5);
  EXPECT_EQ(scale_for_dataset("multifieldqa_zh"), CorrectnessScale::QA3);
  EXPECT_EQ(scale_for_dataset("custom"), std::nullopt);
  using nlohmann::json;
  const json base = {{"id", "1"}, {"context", "c"}, {"query", "q"}};
  json custom = base;
  custom["dataset"] = "custom";
  EXPECT_THROW(dataset_record_from_json(custom), InvalidArgument);
  custom["scale"] = "summ5";
  EXPECT_EQ(dataset_record_from_json(custom).scale, CorrectnessScale::Summ5);
  json mismatch = base;
  mismatch["dataset"] = "gov_report";
  mismatch["scale"] = "qa3";
  EXPECT_THROW(dataset_record_from_json(mismatch), InvalidArgument);
  json dup = base;
  dup["dataset"] = "hotpotqa";
  dup["groundtruths"] = "single";
  dup["rated_examples"] = json::array({{{"answer", "a"}, {"rating", 3}}});
  const auto r = dataset_record_from_json(dup);
  EXPECT_EQ(r.groundtruths, std::vector<std::string>{"single"});
  EXPECT_EQ(r.rated_examples.size(), 1u);
}

TEST(Config, DefaultsStrictnessAndRoundTrip) {
  const BenchConfig defaults = config_from_json(nlohmann::json::object());
  EXPECT_EQ(defaults.strategy.pipeline.chunk_size, 128u);
  EXPECT_EQ(defaults.strategy.pipeline.retrieval.k, 40u);
  EXPECT_EQ(defaults.strategy.pipeline.retrieval.l_max, 10u);
  EXPECT_DOUBLE_EQ(defaults.strategy.pipeline.min_cited_fraction, 0.2);

  EXPECT_THROW(config_from_json({{"version", 2}}), ConfigError);
  EXPECT_THROW(config_from_json({{"pipeline", {{"chunksize", 64}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"retrieval", {{"k", "many"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"retrieval", {{"scorer", "bm25"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"pipeline", {{"chunk_size", 0}}}}), ConfigError);

  const nlohmann::json custom = {{"seed", 9},
                                 {"pipeline", {{"chunk_size", 64}, {"generation_temperature", 0.7}}},
                                 {"retrieval", {{"k", 20}, {"scorer", "embedding"}}},
                                 {"judge", {{"model", "judge-x"}, {"max_attempts", 2}}}};
  const BenchConfig c = config_from_json(custom);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.strategy.pipeline.generation_temperature, 0.7);
  const BenchConfig again = config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
}

TEST(ResumableOutput, DropsTornLineAndRejectsOtherRuns) {
  TempDir dir;
  const std::string path = dir.file("o.jsonl");
  write_all(path, R"({"run_id":"r1","id":"a"})" "\n" R"({"run_id":"r1","id":"b"})" "\n" R"({"run_id":"r1","id":)");
  {
    ResumableOutput sink(path, "r1");
    EXPECT_TRUE(sink.done("a"));
    EXPECT_TRUE(sink.done("b"));
    EXPECT_EQ(sink.completed(), 2u);
    sink.append({{"id", "c"}});
    sink.reorder({"c", "a", "b"});
  }
  EXPECT_EQ(read_all(path), R"({"run_id":"r1","id":"c"})" "\n" R"({"run_id":"r1","id":"a"})" "\n"
                            R"({"run_id":"r1","id":"b"})" "\n");
  EXPECT_THROW(ResumableOutput(path, "r2"), ConfigError);
  write_all(path, "garbage\n" R"({"run_id":"r1","id":"a"})" "\n");
  EXPECT_THROW(ResumableOutput(path, "r1"), Unreadable);
}

class CliFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_documents(dir.file("docs.jsonl"));
    testing::write_benchmark(dir.file("bench.jsonl"));
  }

  BackendOverrides fake() { return {llm.backend(), llm.backend()}; }

  TempDir dir;
  FakeLlm llm;
};

TEST_F(CliFixture, GenerateRecordThenReplayIsByteIdentical) {
  const CliResult recorded = cli({"generate", "--input", dir.file("docs.jsonl"), "--output", dir.file("live.jsonl"),
                            "--chunk-size", "16", "--record-transcript", dir.file("t.jsonl")},
                           fake());
  ASSERT_EQ(recorded.code, 0) << recorded.err;
  EXPECT_EQ(line_count(dir.file("live.jsonl")), 3u);

  for (const char* out : {"a.jsonl", "b.jsonl"}) {
    const CliResult r = cli({"generate", "--input", dir.file("docs.jsonl"), "--output", dir.file(out), "--chunk-size",
                       "16", "--mock-transcript", dir.file("t.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_all(dir.file("a.jsonl")), read_all(dir.file("b.jsonl")));
  EXPECT_EQ(read_all(dir.file("a.jsonl")), read_all(dir.file("live.jsonl")));
  const auto first = nlohmann::json::parse(read_all(dir.file("a.jsonl")).substr(0, read_all(dir.file("a.jsonl")).find('\n')));
  EXPECT_EQ(first["id"], "doc-0");
  EXPECT_EQ(first["status"], "kept");
  const auto manifest = nlohmann::json::parse(read_all(dir.file("a.jsonl.manifest.json")));
  EXPECT_EQ(manifest["run_id"], first["run_id"]);
  EXPECT_EQ(manifest["status"], "complete");
  EXPECT_EQ(manifest["config"]["pipeline"]["chunk_size"], 16);
}

TEST_F(CliFixture, SeedChangesRunIdentity) {
  const std::vector<std::string> base = {"generate", "--input", dir.file("docs.jsonl"), "--limit", "1"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  ASSERT_EQ(cli(with({"--output", dir.file("s1.jsonl"), "--seed", "1"}), fake()).code, 0);
  ASSERT_EQ(cli(with({"--output", dir.file("s2.jsonl"), "--seed", "2"}), fake()).code, 0);
  const auto a = nlohmann::json::parse(read_all(dir.file("s1.jsonl")));
  const auto b = nlohmann::json::parse(read_all(dir.file("s2.jsonl")));
  EXPECT_NE(a["run_id"], b["run_id"]);
  EXPECT_EQ(a["instance"]["provenance"]["seed"], 1);
  // the same output path cannot be resumed by a different run
  EXPECT_EQ(cli(with({"--output", dir.file("s1.jsonl"), "--seed", "2"}), fake()).code, 2);
}

TEST_F(CliFixture, ResumeAfterInterruptionMatchesUninterruptedRun) {
  ASSERT_EQ(cli({"generate", "--input", dir.file("docs.jsonl"), "--output", dir.file("full.jsonl")}, fake()).code, 0);
  const std::string full = read_all(dir.file("full.jsonl"));
  // keep the first record and half of the second, as an interrupted run would
  const std::size_t first_end = full.find('\n') + 1;
  const std::size_t second_end = full.find('\n', first_end) + 1;
  write_all(dir.file("resumed.jsonl"), full.substr(0, first_end + (second_end - first_end) / 2));

  FakeLlm counting;
  const CliResult r = cli({"generate", "--input", dir.file("docs.jsonl"), "--output", dir.file("resumed.jsonl")},
                    {counting.backend(), counting.backend()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_all(dir.file("resumed.jsonl")), full);
  EXPECT_EQ(counting.calls(PromptKind::QuestionGeneration), 2u);  // doc-0 was not redone
}

TEST_F(CliFixture, AnswerEvaluateAndReport) {
  ASSERT_EQ(cli({"answer", "--strategy", "lac-s", "--input", dir.file("bench.jsonl"), "--output",
                 dir.file("resp.jsonl"), "--record-transcript", dir.file("t.jsonl")},
                fake())
                .code,
            0);
  ASSERT_EQ(cli({"answer", "--strategy", "lac-s", "--input", dir.file("bench.jsonl"), "--output",
                 dir.file("resp2.jsonl"), "--mock-transcript", dir.file("t.jsonl")})
                .code,
            0);
  EXPECT_EQ(read_all(dir.file("resp.jsonl")), read_all(dir.file("resp2.jsonl")));
  const auto line = nlohmann::json::parse(read_all(dir.file("resp.jsonl")).substr(0, read_all(dir.file("resp.jsonl")).find('\n')));
  EXPECT_EQ(line["granularity"], "sentence");
  EXPECT_EQ(line["chat_calls"], 1);
  EXPECT_EQ(line["chunk_size"], 128);  // evaluate rebuilds chunks with this size
  EXPECT_FALSE(line.contains("timings"));

  FakeLlm judge1;
  const CliResult e1 = cli({"evaluate", "--dataset", dir.file("bench.jsonl"), "--responses", dir.file("resp.jsonl"),
                      "--output", dir.file("m1.jsonl"), "--judge-cache", dir.file("cache.jsonl")},
                     {nullptr, judge1.backend()});
  ASSERT_EQ(e1.code, 0) << e1.err;
  // per record: 1 support + 1 relevance + 1 need-citation + 1 correctness
  EXPECT_EQ(judge1.calls(PromptKind::CorrectnessJudge), 3u);
  EXPECT_EQ(judge1.calls(PromptKind::SupportJudge), 3u);

  FakeLlm judge2;
  const CliResult e2 = cli({"evaluate", "--dataset", dir.file("bench.jsonl"), "--responses", dir.file("resp.jsonl"),
                      "--output", dir.file("m2.jsonl"), "--judge-cache", dir.file("cache.jsonl")},
                     {nullptr, judge2.backend()});
  ASSERT_EQ(e2.code, 0) << e2.err;
  EXPECT_NE(e2.out.find("0 backend calls"), std::string::npos) << e2.out;
  EXPECT_EQ(judge2.calls(PromptKind::SupportJudge) + judge2.calls(PromptKind::CorrectnessJudge), 0u);
  EXPECT_EQ(read_all(dir.file("m1.jsonl.report.json")), read_all(dir.file("m2.jsonl.report.json")));
  EXPECT_EQ(read_all(dir.file("m1.jsonl")), read_all(dir.file("m2.jsonl")));

  const auto report = nlohmann::json::parse(read_all(dir.file("m1.jsonl.report.json")));
  EXPECT_EQ(report["aggregate"]["datasets"].size(), 3u);
  // chat10 judge says 4 -> 40, qa3 says 2 -> 66.7, summ5 says 4 -> 80
  EXPECT_NEAR(report["aggregate"]["average"]["correctness"].get<double>(), (40 + 200.0 / 3 + 80) / 3, 1e-9);

  ASSERT_EQ(cli({"answer", "--strategy", "vanilla", "--input", dir.file("bench.jsonl"), "--output",
                 dir.file("van.jsonl")},
                fake())
                .code,
            0);
  ASSERT_EQ(cli({"evaluate", "--dataset", dir.file("bench.jsonl"), "--responses", dir.file("van.jsonl"),
                 "--output", dir.file("vm.jsonl")},
                {nullptr, llm.backend()})
                .code,
            0);
  const CliResult rep = cli({"report", "--metrics", dir.file("m1.jsonl"), "--vanilla", dir.file("vm.jsonl"), "--label",
                       "fake"});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("<!-- run " + report["run_id"].get<std::string>()), std::string::npos);
  EXPECT_NE(rep.out.find("| fake |"), std::string::npos);
  EXPECT_NE(rep.out.find("100.0%"), std::string::npos);
}

TEST_F(CliFixture, ExitCodes) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"answer", "--strategy", "best", "--input", dir.file("bench.jsonl"), "--output", dir.file("x")},
                fake())
                .code,
            2);
  EXPECT_EQ(cli({"generate", "--input", dir.file("nope.jsonl"), "--output", dir.file("x")}, fake()).code, 2);
  write_all(dir.file("cfg.json"), R"({"version": 1, "pipeline": {"bogus": 1}})");
  EXPECT_EQ(cli({"generate", "--config", dir.file("cfg.json"), "--input", dir.file("docs.jsonl"), "--output",
                 dir.file("x")},
                fake())
                .code,
            2);
  // an empty transcript cannot answer anything: every record fails
  write_all(dir.file("empty.jsonl"), "");
  const CliResult partial = cli({"answer", "--strategy", "lac-c", "--input", dir.file("bench.jsonl"), "--output",
                           dir.file("p.jsonl"), "--mock-transcript", dir.file("empty.jsonl")});
  EXPECT_EQ(partial.code, 1);
  EXPECT_NE(partial.err.find("record q-0"), std::string::npos);
  EXPECT_EQ(line_count(dir.file("p.jsonl")), 0u);
}

TEST_F(CliFixture, MissingCredentialsIsConfigurationError) {
  ::unsetenv("LQAC_TEST_NO_SUCH_KEY");
  write_all(dir.file("cfg.json"), R"({"chat": {"api_key_env": "LQAC_TEST_NO_SUCH_KEY", "model": "m"}})");
  const CliResult r = cli({"generate", "--config", dir.file("cfg.json"), "--input", dir.file("docs.jsonl"), "--output",
                     dir.file("x.jsonl")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("credentials"), std::string::npos);
}

}  // namespace
}  // namespace lqac::bench
