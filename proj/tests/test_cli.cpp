/* Copyright 2026 The xtrd Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "xtrd/checkpoint.hpp"
#include "xtrd/eval.hpp"

namespace xtrd {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args, bool merge_stderr = true) {
  const std::string cmd = std::string(XTRD_CLI_PATH) + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Per-utterance records of a decode output, with the header and summary dropped.
std::vector<json> records(const std::string& out) {
  std::vector<json> r;
  for (const auto& l : lines(out)) {
    auto j = json::parse(l);
    if (j.contains("utterance_id")) r.push_back(j);
  }
  return r;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::random_device rd;
    dir_ = new fs::path(fs::temp_directory_path() / ("xtrd_cli_" + std::to_string(rd())));
    fs::create_directories(*dir_);
    write_config("cfg.json", 2);
    write_config("cfg1.json", 1);
    ASSERT_EQ(run("synth-data --config " + p("cfg.json") + " --out " + p("train") + " --n-utts 10 --seed 1").rc, 0);
    ASSERT_EQ(run("synth-data --config " + p("cfg.json") + " --out " + p("dev") + " --n-utts 4 --seed 2").rc, 0);
    ASSERT_EQ(run("train --config " + p("cfg.json") + " --data " + p("train/manifest.jsonl") + " --dev " +
                  p("dev/manifest.jsonl") + " --out " + p("run"))
                  .rc,
              0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static void write_config(const std::string& name, int epochs) {
    std::ofstream(*dir_ / name) << R"({"seed": 5, "train": {"epochs": )" << epochs
                                << R"(, "learning_rate": 0.003, "warmup_steps": 10, "batch_size": 4,
        "training_mode": "multi_chunk", "chunk_choices": [4, 8]},
      "decode": {"chunk_frames": 8, "left_context": 1, "sink_frames": 2, "beam_width": 2}})";
  }
  static std::string p(const std::string& rel) { return (*dir_ / rel).string(); }

  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

TEST_F(Cli, SynthDataWritesManifestAndIsDeterministic) {
  EXPECT_EQ(lines(slurp(p("train/manifest.jsonl"))).size(), 10u);
  ASSERT_EQ(run("synth-data --config " + p("cfg.json") + " --out " + p("again") + " --n-utts 10 --seed 1").rc, 0);
  for (const auto& e : fs::directory_iterator(p("train")))
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(p("again")) / e.path().filename())) << e.path();
  EXPECT_TRUE(json::parse(slurp(p("train/dataset.json"))).contains("config"));
}

TEST_F(Cli, ConfigAndUsageErrorsExitTwo) {
  std::ofstream(p("bad.json")) << R"({"seed": 1, "decode": {"beam": 3}})";
  auto r = run("synth-data --config " + p("bad.json") + " --out " + p("x"));
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.out.find("decode.beam"), std::string::npos) << r.out;
  EXPECT_EQ(run("train --config " + p("cfg.json") + " --data " + p("missing.jsonl") + " --out " + p("y")).rc, 2);
  EXPECT_EQ(run("decode --ckpt " + p("run/last.xtrd")).rc, 2);
  EXPECT_EQ(run("frobnicate").rc, 2);
  EXPECT_EQ(run("inspect-mask --chunk-frames zero").rc, 2);
  EXPECT_EQ(run("--help").rc, 0);
}

TEST_F(Cli, RuntimeErrorsExitOne) {
  std::ofstream(p("junk.xtrd")) << "not a checkpoint";
  EXPECT_EQ(run("decode --ckpt " + p("junk.xtrd") + " --data " + p("dev/manifest.jsonl")).rc, 1);
}

TEST_F(Cli, TrainLogsEpochsAndCheckpoints) {
  auto log = lines(slurp(p("run/metrics.jsonl")));
  ASSERT_EQ(log.size(), 3u);
  EXPECT_TRUE(json::parse(log[0]).contains("config"));
  for (int e = 0; e < 2; ++e) {
    auto j = json::parse(log[std::size_t(e) + 1]);
    EXPECT_EQ(j.at("epoch"), e);
    for (const char* k : {"mean_nll", "dev_nll", "lr_final", "chunk_sizes_used"}) EXPECT_TRUE(j.contains(k)) << k;
    for (const auto& c : j["chunk_sizes_used"]) EXPECT_TRUE(c == 4 || c == 8);
  }
  EXPECT_TRUE(fs::exists(p("run/last.xtrd")));
  EXPECT_TRUE(fs::exists(p("run/best.xtrd")));
  auto ck = load_checkpoint<float>(p("run/last.xtrd"));
  EXPECT_EQ(ck.config.seed, 5u);
  EXPECT_EQ(ck.trainer.epoch, 2u);
}

TEST_F(Cli, OneEpochSmokeRunIsQuick) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = run("train --config " + p("cfg1.json") + " --data " + p("train/manifest.jsonl") + " --out " + p("smoke"),
               false);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(lines(r.out).size(), 1u);
  EXPECT_LT(s, 60.0);
}

TEST_F(Cli, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(run("train --config " + p("cfg1.json") + " --data " + p("train/manifest.jsonl") + " --dev " +
                p("dev/manifest.jsonl") + " --out " + p("half"))
                .rc,
            0);
  auto r = run("train --config " + p("cfg.json") + " --data " + p("train/manifest.jsonl") + " --dev " +
                   p("dev/manifest.jsonl") + " --out " + p("half") + " --resume " + p("half/last.xtrd"),
               false);
  ASSERT_EQ(r.rc, 0) << r.out;
  auto resumed = json::parse(lines(r.out).back());
  auto straight = json::parse(lines(slurp(p("run/metrics.jsonl"))).back());
  EXPECT_EQ(resumed, straight);
  auto a = load_checkpoint<float>(p("half/last.xtrd"));
  auto b = load_checkpoint<float>(p("run/last.xtrd"));
  EXPECT_TRUE(a.params == b.params);
  EXPECT_TRUE(a.trainer.optim == b.trainer.optim);
}

TEST_F(Cli, DecodeModesAgree) {
  const std::string base = "decode --ckpt " + p("run/best.xtrd") + " --data " + p("dev/manifest.jsonl");
  auto off = run(base + " --mode offline", false);
  auto str = run(base + " --mode streaming", false);
  ASSERT_EQ(off.rc, 0);
  ASSERT_EQ(str.rc, 0);
  auto ro = records(off.out), rs = records(str.out);
  ASSERT_EQ(ro.size(), 4u);
  ASSERT_EQ(rs.size(), 4u);
  for (std::size_t i = 0; i < ro.size(); ++i) {
    EXPECT_EQ(ro[i]["utterance_id"], rs[i]["utterance_id"]);
    EXPECT_EQ(ro[i]["tokens"], rs[i]["tokens"]);
    EXPECT_EQ(ro[i]["attended_keys_total"], rs[i]["attended_keys_total"]);
    EXPECT_NEAR(ro[i]["log_prob"].get<double>(), rs[i]["log_prob"].get<double>(), 1e-6);
    for (const char* k : {"text", "log_prob", "chunks", "attended_keys_total", "cost"})
      EXPECT_TRUE(rs[i].contains(k)) << k;
  }
  // Deterministic output and embedded config.
  EXPECT_EQ(run(base + " --mode streaming", false).out, str.out);
  EXPECT_TRUE(json::parse(lines(str.out).front()).contains("config"));
  EXPECT_TRUE(json::parse(lines(str.out).back())["summary"].contains("wer"));
}

TEST_F(Cli, FullAttentionAndSaturatedLeftContext) {
  const std::string base = "decode --ckpt " + p("run/best.xtrd") + " --data " + p("dev/manifest.jsonl");
  auto a = records(run(base + " --full-attention", false).out);
  auto b = records(run(base + " --chunk-frames full --left-context full --sink-frames 0", false).out);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  for (const auto& r : a) EXPECT_EQ(r["chunks"], 1);
  auto c = records(run(base + " --mode streaming --left-context full", false).out);
  auto d = records(run(base + " --mode streaming --left-context 1000000", false).out);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c, d);
  EXPECT_EQ(run(base + " --mode streaming --full-attention").rc, 2);
}

TEST_F(Cli, EvalWerScoresDecodeOutput) {
  auto same = run("eval-wer --ref " + p("dev/manifest.jsonl") + " --hyp " + p("dev/manifest.jsonl"), false);
  ASSERT_EQ(same.rc, 0);
  EXPECT_EQ(json::parse(same.out)["wer"], 0.0);
  ASSERT_EQ(run("decode --ckpt " + p("run/best.xtrd") + " --data " + p("dev/manifest.jsonl") + " --out " +
                p("dec.jsonl"))
                .rc,
            0);
  auto r = run("eval-wer --ref " + p("dev/manifest.jsonl") + " --hyp " + p("dec.jsonl"), false);
  ASSERT_EQ(r.rc, 0);
  auto summary = json::parse(lines(slurp(p("dec.jsonl"))).back())["summary"]["wer"];
  EXPECT_EQ(json::parse(r.out), summary);
}

TEST(CliMask, BlockDiagonalPicture) {
  auto r = run("inspect-mask --chunk-frames 2 --left-context 0 --sink-frames 0 --frames 4", false);
  ASSERT_EQ(r.rc, 0);
  auto l = lines(r.out);
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[0], "##..");
  EXPECT_EQ(l[1], "##..");
  EXPECT_EQ(l[2], "..##");
  EXPECT_EQ(l[3], "..##");
}

TEST(CliMask, SinkColumnFullyMarked) {
  auto l = lines(run("inspect-mask --chunk-frames 3 --left-context 0 --sink-frames 1 --frames 12", false).out);
  ASSERT_EQ(l.size(), 13u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(l[i][0], '#') << i;
  EXPECT_EQ(l[11].substr(1), "........###");
}

TEST(CliMask, JsonCountsMatchAttendedCount) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 12; ++t) {
    const std::size_t T = 1 + rng() % 60, C = 1 + rng() % 9, L = rng() % 3, S = rng() % 4;
    auto r = run("inspect-mask --no-grid --frames " + std::to_string(T) + " --chunk-frames " + std::to_string(C) +
                     " --left-context " + std::to_string(L) + " --sink-frames " + std::to_string(S),
                 false);
    ASSERT_EQ(r.rc, 0);
    auto j = json::parse(r.out);
    MaskSpec spec{C, LeftContext::chunks(L), S, T};
    ASSERT_EQ(j["chunks"].size(), spec.num_chunks());
    for (std::size_t n = 0; n < spec.num_chunks(); ++n)
      EXPECT_EQ(j["chunks"][n]["attended_count"].get<std::size_t>(), attended_count(spec, n));
  }
  auto big = run("inspect-mask --frames 600 --chunk-frames 16", false);
  EXPECT_EQ(big.rc, 0);
  EXPECT_EQ(lines(big.out).size(), 1u);
}

}  // namespace
}  // namespace xtrd
