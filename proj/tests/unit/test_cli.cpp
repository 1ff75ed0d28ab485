// Copyright 2026 The mvrisk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

const fs::path& root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "mvrisk_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(MVRISK_CLI_PATH) + " " + args + " > " + (root() / "stdout.txt").string() +
                          " 2> " + (root() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::string dir(const std::string& name) { return (root() / name).string(); }

const std::string kSmallModel = " --set model.hidden_sizes=[12,8,6] --set train.epochs=3";

// Synthetic cohort shared by the pipeline tests.
const std::string& cohort() {
  static const std::string path = [] {
    const std::string d = dir("cohort");
    EXPECT_EQ(run("synth --seed 5 --set synth.n_patients=400 --out " + d), 0) << slurp(root() / "stderr.txt");
    return d;
  }();
  return path;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("train --variant lstm"), 2);
  EXPECT_EQ(run("evaluate --out " + dir("x")), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ConfigErrors) {
  EXPECT_EQ(run("synth --set synth.bogus=1 --out " + dir("bad")), 3);
  EXPECT_NE(slurp(root() / "stderr.txt").find("code=config"), std::string::npos);
  EXPECT_EQ(run("train --out " + dir("nodata")), 3);
  EXPECT_EQ(run("synth --set synth.n_patients=0 --out " + dir("bad")), 3);
}

TEST(Cli, MissingCheckpointIsIoError) {
  EXPECT_EQ(run("evaluate --set data.dir=" + cohort() + " --checkpoint " + dir("none.json") + " --out " + dir("e")), 4);
}

TEST(Cli, GradcheckPasses) {
  EXPECT_EQ(run("gradcheck --out " + dir("gc")), 0);
  const std::string out = slurp(root() / "stdout.txt");
  EXPECT_NE(out.find("PASS"), std::string::npos);
  EXPECT_EQ(out.find("FAIL"), std::string::npos);
  EXPECT_TRUE(fs::exists(root() / "gc" / "gradcheck.csv"));
}

TEST(Cli, SynthSummary) {
  const nlohmann::json s = json_file(fs::path(cohort()) / "synth_summary.json");
  EXPECT_EQ(s["patients"], 400);
  EXPECT_TRUE(fs::exists(fs::path(cohort()) / "patients.csv"));
  EXPECT_TRUE(fs::exists(fs::path(cohort()) / "events.csv"));
  EXPECT_EQ(run("ingest --set data.dir=" + cohort() + " --out " + dir("ingest")), 0);
  EXPECT_EQ(json_file(root() / "ingest" / "ingest_report.json")["patients_kept"], 400);
}

TEST(Cli, PipelineIsDeterministic) {
  const std::string common = "train --seed 5 --variant ffnn --set data.dir=" + cohort() + kSmallModel;
  ASSERT_EQ(run(common + " --out " + dir("t1")), 0) << slurp(root() / "stderr.txt");
  ASSERT_EQ(run(common + " --threads 2 --out " + dir("t2")), 0);
  EXPECT_EQ(slurp(root() / "t1" / "train_log.csv"), slurp(root() / "t2" / "train_log.csv"));
  EXPECT_EQ(slurp(root() / "t1" / "checkpoint.json"), slurp(root() / "t2" / "checkpoint.json"));

  const std::string ckpt = dir("t1") + "/checkpoint.json";
  ASSERT_EQ(run("evaluate --set data.dir=" + cohort() + " --checkpoint " + ckpt + " --out " + dir("ev")), 0)
      << slurp(root() / "stderr.txt");
  const nlohmann::json report = json_file(root() / "ev" / "report.json");
  EXPECT_GE(report["auc"].get<double>(), 0.0);
  EXPECT_LE(report["auc"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(root() / "ev" / "roc_points.csv"));

  ASSERT_EQ(run("compare --set data.dir=" + cohort() + " --checkpoint " + ckpt + " --checkpoint " + ckpt +
                " --out " + dir("cmp")),
            0);
  const nlohmann::json cmp = json_file(root() / "cmp" / "compare.json");
  EXPECT_EQ(cmp["delong"]["p"], 1.0);
  EXPECT_EQ(cmp["delong"]["z"], 0.0);

  const int rc = run("explain --set data.dir=" + cohort() + " --checkpoint " + ckpt + " --out " + dir("ex"));
  ASSERT_EQ(rc, 0) << slurp(root() / "stderr.txt");
  const nlohmann::json ex = json_file(root() / "ex" / "explain.json");
  EXPECT_EQ(ex["top_k"], 3);
  EXPECT_GT(ex["patients"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(root() / "ex" / "heatmap.csv"));
}

TEST(Cli, CompareRejectsDifferentSplits) {
  const std::string base = "train --variant ffnn --set data.dir=" + cohort() + kSmallModel;
  ASSERT_EQ(run(base + " --seed 1 --out " + dir("s1")), 0);
  ASSERT_EQ(run(base + " --seed 2 --out " + dir("s2")), 0);
  EXPECT_EQ(run("compare --set data.dir=" + cohort() + " --checkpoint " + dir("s1") + "/checkpoint.json --checkpoint " +
                dir("s2") + "/checkpoint.json --out " + dir("cmp2")),
            3);
}

TEST(Cli, ConfigFileAndOverridesCompose) {
  const fs::path cfg = root() / "run.json";
  {
    std::ofstream os(cfg);
    os << R"({"train": {"epochs": 2}, "model": {"variant": "ffnn_ca", "hidden_sizes": [8, 6, 4]}})";
  }
  ASSERT_EQ(run("train --seed 5 --config " + cfg.string() + " --set data.dir=" + cohort() + " --out " + dir("cfg")), 0)
      << slurp(root() / "stderr.txt");
  const nlohmann::json s = json_file(root() / "cfg" / "train_summary.json");
  EXPECT_EQ(s["variant"], "ffnn_ca");
  EXPECT_EQ(s["epochs"], 2);
}

}  // namespace
