// Copyright 2026 The ARMKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "armkit/aatd.hpp"
#include "armkit/config.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Result {
  int status = -1;
  std::string output;  // stdout + stderr
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + ARMKIT_CLI + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), p)) r.output += buf.data();
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "armkit_cli_tests" / info->name();
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string config(const std::string& name) { return std::string(ARMKIT_CONFIG_DIR) + "/" + name; }

json manifest_of(const fs::path& dir) { return json::parse(armkit::read_file(dir / "manifest.json")); }

TEST(Cli, BankWritesDumpSidecarAndManifest) {
  const fs::path d = scratch();
  const Result r = run("bank --seed 7 --n 8 --k 3 --out " + (d / "bank.aatd").string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(d / "bank.aatd"));
  EXPECT_TRUE(fs::exists(d / "bank.json"));
  const json m = json::parse(armkit::read_file(d / "bank.manifest.json"));
  EXPECT_EQ(m["command"], "bank");
  EXPECT_EQ(m["config"]["n"], 8);
  EXPECT_EQ(armkit::read_aatd(d / "bank.aatd").shape, (armkit::Shape{8, 3, 3}));
}

TEST(Cli, DemoPeakBinIsThree) {
  const fs::path d = scratch();
  const Result r = run("demo --freq 7 --rate 10 --out " + d.string());
  ASSERT_EQ(r.status, 0) << r.output;
  std::istringstream csv(armkit::read_file(d / "spectrum.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "bin_hz,magnitude");
  double best_hz = -1.0, best = -1.0;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    const double hz = std::stod(line.substr(0, comma)), mag = std::stod(line.substr(comma + 1));
    if (mag > best) {
      best = mag;
      best_hz = hz;
    }
  }
  EXPECT_EQ(best_hz, 3.0);
  const json m = manifest_of(d);
  EXPECT_EQ(m["command"], "demo");
  EXPECT_EQ(m["outputs"], json({"report.json", "spectrum.csv"}));
}

TEST(Cli, DemoPrefilterReportsAttenuation) {
  const fs::path d = scratch();
  ASSERT_EQ(run("demo --freq 7 --rate 10 --prefilter-sigma 0.05 --out " + d.string()).status, 0);
  const json rep = json::parse(armkit::read_file(d / "report.json"));
  EXPECT_GE(rep["prefiltered"]["attenuation_db"].get<double>(), 10.0);
  EXPECT_TRUE(fs::exists(d / "spectrum_prefiltered.csv"));
}

TEST(Cli, GradcheckTinyModelPasses) {
  const fs::path d = scratch();
  const Result r = run("gradcheck --config " + config("tiny_gradcheck.json") + " --out " + d.string());
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("max relative error"), std::string::npos);
  EXPECT_TRUE(json::parse(armkit::read_file(d / "gradcheck.json"))["passed"].get<bool>());
}

TEST(Cli, UsageErrorsExitTwo) {
  Result r = run("frobnicate");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("unknown subcommand 'frobnicate'"), std::string::npos);
  EXPECT_NE(r.output.find("Subcommands:"), std::string::npos);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("train --bogus-flag").status, 2);
  EXPECT_EQ(run("sweep --kind diagonal").status, 2);
  EXPECT_EQ(run("--help").status, 0);
}

TEST(Cli, BadConfigGivesStructuredError) {
  const fs::path d = scratch();
  std::FILE* f = std::fopen((d / "bad.json").c_str(), "w");
  std::fputs(R"({"model": {"hierarchical": false, "arm_placement": "after_patch_merging"}})", f);
  std::fclose(f);
  const Result r = run("train --config " + (d / "bad.json").string() + " --out " + (d / "run").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("armkit: error [config]: model.arm_placement"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(d / "run" / "manifest.json"));
  const Result missing = run("train --config " + (d / "missing.json").string());
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.output.find("armkit: error [parse]"), std::string::npos);
}

TEST(Cli, TrainRunDirectoryIsCompleteAndReproducible) {
  const fs::path d = scratch();
  const Result r = run("train --config " + config("smoke.json") + " --export-attn --out " + (d / "a").string());
  ASSERT_EQ(r.status, 0) << r.output;
  for (const char* f : {"manifest.json", "config.json", "metrics.csv", "checkpoints/seed_0/manifest.json",
                        "checkpoints/seed_1/manifest.json", "checkpoints/seed_0/arm_bank.aatd",
                        "checkpoints/seed_0/arm_bank.json", "checkpoints/seed_0/pos_embed.aatd",
                        "attention/seed_0/stage0_block0.aatd", "attention/seed_1/stage3_block0.aatd"}) {
    EXPECT_TRUE(fs::exists(d / "a" / f)) << f;
  }
  const json m = manifest_of(d / "a");
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seed"], json({0, 1}));
  EXPECT_EQ(m["config_hash"], armkit::config_hash(armkit::experiment_config_from_json(m["config"])));
  const auto outputs = m["outputs"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(outputs.begin(), outputs.end(), "metrics.csv"), outputs.end());
  EXPECT_NE(std::find(outputs.begin(), outputs.end(), "attention/seed_1/stage3_block0.aatd"), outputs.end());
  EXPECT_FALSE(m["started"].get<std::string>().empty());
  EXPECT_FALSE(m["finished"].get<std::string>().empty());

  // Re-running the manifest reproduces the CSV byte for byte.
  ASSERT_EQ(run("train --config " + (d / "a" / "manifest.json").string() + " --threads 2 --out " + (d / "b").string()).status, 0);
  EXPECT_EQ(armkit::read_file(d / "a" / "metrics.csv"), armkit::read_file(d / "b" / "metrics.csv"));
  EXPECT_EQ(manifest_of(d / "b")["config_hash"], m["config_hash"]);
}

TEST(Cli, SeedFlagOverridesConfigSeeds) {
  const fs::path d = scratch();
  ASSERT_EQ(run("train --config " + config("smoke.json") + " --seed 9 --out " + d.string()).status, 0);
  EXPECT_EQ(manifest_of(d)["seed"], json({9}));
  EXPECT_TRUE(fs::exists(d / "checkpoints" / "seed_9"));
}

TEST(Cli, OutputRootFromEnvironment) {
  const fs::path d = scratch();
  ASSERT_EQ(run("demo --freq 3 --rate 10", "ARMKIT_OUT=" + d.string()).status, 0);
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(d)) {
    EXPECT_EQ(e.path().filename().string().rfind("demo-", 0), 0u);
    EXPECT_TRUE(fs::exists(e.path() / "manifest.json"));
    ++runs;
  }
  EXPECT_EQ(runs, 1u);
}

TEST(Cli, SweepWritesTableAndReruns) {
  const fs::path d = scratch();
  ASSERT_EQ(run("sweep --kind filter --config " + config("smoke.json") + " --out " + (d / "a").string()).status, 0);
  const std::string csv = armkit::read_file(d / "a" / "sweep_filter.csv");
  EXPECT_EQ(csv.rfind("filter,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(d / "a" / "config.json"));
  EXPECT_TRUE(fs::exists(d / "a" / "runs"));
  const json m = manifest_of(d / "a");
  EXPECT_EQ(m["args"]["kind"], "filter");
  ASSERT_EQ(run("sweep --kind filter --config " + (d / "a" / "manifest.json").string() + " --out " + (d / "b").string()).status, 0);
  EXPECT_EQ(csv, armkit::read_file(d / "b" / "sweep_filter.csv"));
}

TEST(Cli, ProbeAndExportFromCheckpoint) {
  const fs::path d = scratch();
  ASSERT_EQ(run("train --config " + config("smoke.json") + " --seed 3 --out " + (d / "t").string()).status, 0);
  const std::string ck = (d / "t" / "checkpoints" / "seed_3").string();
  const Result p = run("probe --config " + config("smoke.json") + " --checkpoint " + ck + " --out " + (d / "p").string());
  ASSERT_EQ(p.status, 0) << p.output;
  const std::string csv = armkit::read_file(d / "p" / "probe.csv");
  EXPECT_NE(csv.find("3,true,input,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("3,true,stage0,"), std::string::npos);

  const Result e = run("export --checkpoint " + ck + " --count 4 --out " + (d / "e").string());
  ASSERT_EQ(e.status, 0) << e.output;
  const armkit::TensorDump a = armkit::read_aatd(d / "e" / "attention" / "stage0_block0.aatd");
  EXPECT_EQ(a.shape[0], 4u);
  EXPECT_TRUE(fs::exists(d / "e" / "arm_bank.aatd"));
  EXPECT_TRUE(fs::exists(d / "e" / "manifest.json"));

  const Result fresh = run("probe --config " + config("smoke.json") + " --untrained --out " + (d / "q").string() +
                         " --seed 1");
  EXPECT_EQ(fresh.status, 0) << fresh.output;
  EXPECT_NE(armkit::read_file(d / "q" / "probe.csv").find("1,false,input,"), std::string::npos);
}

}  // namespace
