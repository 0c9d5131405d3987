// Copyright 2026 The earlyben Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "earlyben/cli.hpp"
#include "metric_fixture.hpp"
#include "test_util.hpp"

namespace earlyben {
namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void expect_single_line_error(const Run& r, int code, const std::string& category) {
  EXPECT_EQ(r.code, code) << r.err;
  EXPECT_EQ(r.err.rfind(category + ": ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

std::string write_fixture_decisions(const testing::TempDir& dir) {
  std::string text = "id,truth,predicted,tick,length\n";
  for (const auto& r : testing::metric_fixture_records()) {
    text += r.id + "," + std::to_string(r.truth) + "," + (r.predicted ? std::to_string(*r.predicted) : "") + "," +
            std::to_string(r.tick) + "," + std::to_string(r.length) + "\n";
  }
  return dir.write("d.csv", text);
}

TEST(CliTest, UsageErrorsExitTwo) {
  expect_single_line_error(run({}), 2, "usage");
  expect_single_line_error(run({"bogus"}), 2, "usage");
  expect_single_line_error(run({"evaluate", "--decisions"}), 2, "usage");
  expect_single_line_error(run({"evaluate", "--nope", "1"}), 2, "usage");
  expect_single_line_error(run({"train", "--out", "x.json"}), 2, "usage");
  expect_single_line_error(run({"train", "--data", "/no/such/file", "--out", "x.json"}), 2, "usage");
}

TEST(CliTest, HelpAndVersionSucceed) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(EARLYBEN_VERSION) + "\n");
}

TEST(CliTest, EvaluateHappyPath) {
  testing::TempDir dir;
  const auto decisions = write_fixture_decisions(dir);
  save_benefit_spec(testing::metric_fixture_spec(), dir.file("b.cfg"));
  const auto r = run({"evaluate", "--decisions", decisions, "--benefit", dir.file("b.cfg")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = csv::read(dir.file("d.report.csv"));
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(report_from_row(table, table.rows[0]), testing::metric_fixture_expected());
  const auto manifest = nlohmann::json::parse(testing::read_file(dir.file("d.report.csv.manifest.json")));
  EXPECT_EQ(manifest["subcommand"], "evaluate");
  EXPECT_EQ(manifest["tool_version"], EARLYBEN_VERSION);
  EXPECT_TRUE(manifest.contains("wall_seconds"));
}

TEST(CliTest, EvaluateWithInlineRatio) {
  testing::TempDir dir;
  const auto decisions = write_fixture_decisions(dir);
  const auto r = run({"evaluate", "--decisions", decisions, "--ms-ratio", "2", "--mode", "outcome", "--out",
                      dir.file("r.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = csv::read(dir.file("r.csv"));
  EXPECT_EQ(report_from_row(table, table.rows[0]), testing::metric_fixture_expected());
}

TEST(CliTest, ModuleErrorsKeepTheirCategory) {
  testing::TempDir dir;
  dir.write("bad.tsv", "1\t2\tx\n");
  expect_single_line_error(run({"train", "--data", dir.file("bad.tsv"), "--ms-ratio", "2", "--out", dir.file("o")}),
                           3, "format");
  dir.write("bundle.json", "{\"format_version\": 1}");
  dir.write("ok.tsv", "1\t1\t2\n2\t3\t4\n");
  expect_single_line_error(
      run({"stream", "--bundle", dir.file("bundle.json"), "--data", dir.file("ok.tsv"), "--out", dir.file("d.csv")}),
      4, "persistence");
  const auto decisions = write_fixture_decisions(dir);
  expect_single_line_error(run({"evaluate", "--decisions", decisions, "--ms-ratio", "2", "--mode", "outcome",
                                "--default-class", "5"}),
                           2, "usage");
}

TEST(CliTest, WorkersFromFlagThenEnvironment) {
  ::unsetenv(cli::kWorkersEnv);
  EXPECT_EQ(cli::resolve_workers(0), 1u);
  ::setenv(cli::kWorkersEnv, "3", 1);
  EXPECT_EQ(cli::resolve_workers(0), 3u);
  EXPECT_EQ(cli::resolve_workers(2), 2u);
  ::setenv(cli::kWorkersEnv, "zero", 1);
  EXPECT_THROW(cli::resolve_workers(0), ArgumentError);
  ::unsetenv(cli::kWorkersEnv);
}

TEST(CliTest, SeededPipelineIsByteIdentical) {
  testing::TempDir dir;
  for (const std::string tag : {"a", "b"}) {
    const auto data = dir.file(tag + "_s.jsonl");
    ASSERT_EQ(run({"synth", "--out", data, "--n", "16", "--dim", "2", "--min-length", "5", "--max-length", "9",
                   "--seed", "7"})
                  .code,
              0);
    const auto tr = run({"train", "--data", data, "--ms-ratio", "4", "--mode", "outcome", "--epochs", "3",
                         "--hidden", "3", "--seed", "5", "--out", dir.file(tag + "_b.json")});
    ASSERT_EQ(tr.code, 0) << tr.err;
    const auto st = run({"stream", "--bundle", dir.file(tag + "_b.json"), "--data", data, "--out",
                         dir.file(tag + "_d.csv"), "--trace", "--attention-export", dir.file(tag + "_a.csv")});
    ASSERT_EQ(st.code, 0) << st.err;
    ASSERT_EQ(run({"evaluate", "--decisions", dir.file(tag + "_d.csv"), "--bundle", dir.file(tag + "_b.json")}).code,
              0);
  }
  for (const std::string f : {"_s.jsonl", "_s.jsonl.truth.jsonl", "_b.json", "_d.csv", "_a.csv", "_d.report.csv"}) {
    const auto a = testing::read_file(dir.file("a" + f));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, testing::read_file(dir.file("b" + f))) << f;
  }
}

TEST(CliTest, SweepReplayReproducesRankedManifest) {
  testing::TempDir dir;
  ASSERT_EQ(run({"synth", "--out", dir.file("s.jsonl"), "--n", "16", "--dim", "2", "--min-length", "5",
                 "--max-length", "9", "--seed", "1"})
                .code,
            0);
  dir.write("g.json", R"({"data": "s.jsonl", "mode": "type", "learning_rate": [0.01], "hidden_dim": [2, 3],
                          "ms_factor": [1], "delta_fraction": [0.3, 0.6], "epochs": 2, "seed": 3})");
  const auto first = run({"sweep", "--grids", dir.file("g.json"), "--out", dir.file("sw")});
  ASSERT_EQ(first.code, 0) << first.err;
  const auto ranked = testing::read_file(dir.file("sw/ranked.csv"));
  const auto table = csv::read(dir.file("sw/ranked.csv"));
  EXPECT_EQ(table.rows.size(), 4u);
  for (const auto& row : table.rows) {
    const auto bundle = load_bundle(dir.file("sw/" + row[table.column("bundle")]));
    EXPECT_EQ(bundle.model_config.hidden_dim, std::stoul(row[table.column("hidden_dim")]));
  }
  std::filesystem::remove(dir.file("sw/ranked.csv"));
  const auto again = run({"replay", "--manifest", dir.file("sw/manifest.json")});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(testing::read_file(dir.file("sw/ranked.csv")), ranked);

  const auto pa = run({"pareto", "--manifest", dir.file("sw/ranked.csv"), "--out", dir.file("pa"), "--tolerances",
                       "0.01,1"});
  ASSERT_EQ(pa.code, 0) << pa.err;
  const auto tol = csv::read(dir.file("pa/tolerance.csv"));
  EXPECT_EQ(tol.header, (std::vector<std::string>{"name", "tol_0.01", "tol_1"}));
  EXPECT_NE(tol.rows[0][2], "-");
  const auto front = csv::read(dir.file("pa/pareto.csv"));
  EXPECT_EQ(front.rows.size(), 4u);
}

TEST(CliTest, PreprocessAppliesStepsInCommandOrder) {
  testing::TempDir dir;
  const auto in = dir.write("u.tsv", "0\t1\t5\t2\t8\t3\t0\t0\n1\t4\t4\t6\t1\t9\t2\t7\n");
  ASSERT_EQ(run({"preprocess", "--in", in, "--out", dir.file("a.tsv"), "--trim", "3,1e-9", "--downsample", "2"}).code,
            0);
  ASSERT_EQ(run({"preprocess", "--in", in, "--out", dir.file("b.tsv"), "--downsample", "2", "--trim", "3,1e-9"}).code,
            0);
  // Trimming first drops the trailing zeros before pairing, so 3 stays a
  // singleton window; pairing first averages it with a zero.
  EXPECT_EQ(testing::read_file(dir.file("a.tsv")), "0\t3\t5\t3\n1\t4\t3.5\t5.5\t7\n");
  EXPECT_EQ(testing::read_file(dir.file("b.tsv")), "0\t3\t5\t1.5\n1\t4\t3.5\t5.5\t7\n");
  const auto m = nlohmann::json::parse(testing::read_file(dir.file("b.tsv.manifest.json")));
  EXPECT_EQ(m["config"]["steps"][0]["op"], "downsample");
  EXPECT_EQ(m["config"]["steps"][1]["op"], "trim");
}

TEST(CliTest, LatencyBenchWritesOneRowPerTick) {
  testing::TempDir dir;
  const auto r = run({"bench", "latency", "--dim", "3", "--hidden", "4", "--attention", "last-state", "--length",
                      "12", "--out", dir.file("lat.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv::read(dir.file("lat.csv")).rows.size(), 12u);
  expect_single_line_error(run({"bench", "--out", dir.file("x.csv")}), 2, "usage");
}

}  // namespace
}  // namespace earlyben
