// Drives the built `aim` binary end to end through a shell.
#include "aim/eval.hpp"
#include "aim/scenario.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>

using namespace aim;

namespace {

const std::string kHover = std::string(AIM_SOURCE_DIR) + "/scenarios/hover_5s.json";

fs::path workdir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("aim_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int aim_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + "'" + AIM_CLI + "' " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, SimulateWritesTruthAndWav) {
  auto out = workdir("sim");
  ASSERT_EQ(aim_cli("simulate --scenario " + q(kHover) + " --out " + q(out)), 0);
  auto truth = parse_csv(read_file(out / "truth.csv"), "truth");
  EXPECT_EQ(truth.rows.size(), 50u);
  auto wav = decode_wav(read_file(out / "A.wav"));
  EXPECT_EQ(wav.channels.size(), 6u);
  EXPECT_EQ(wav.sample_rate, 48000.0);
  EXPECT_NEAR(static_cast<double>(wav.channels[0].size()) / 48000.0, 5.0, 0.01);
}

TEST(Cli, SameSeedIsByteIdenticalAndSeedFlagChangesAudio) {
  auto a = workdir("seed_a"), b = workdir("seed_b"), c = workdir("seed_c");
  ASSERT_EQ(aim_cli("simulate --scenario " + q(kHover) + " --out " + q(a)), 0);
  ASSERT_EQ(aim_cli("simulate --scenario " + q(kHover) + " --out " + q(b)), 0);
  ASSERT_EQ(aim_cli("simulate --scenario " + q(kHover) + " --seed 8 --out " + q(c)), 0);
  EXPECT_EQ(read_file(a / "A.wav"), read_file(b / "A.wav"));
  EXPECT_EQ(read_file(a / "truth.csv"), read_file(b / "truth.csv"));
  EXPECT_NE(read_file(a / "A.wav"), read_file(c / "A.wav"));
}

TEST(Cli, RunProducesTrackAndReport) {
  auto out = workdir("run");
  ASSERT_EQ(aim_cli("run --scenario " + q(kHover) + " --dump-debug --out " + q(out)), 0);
  auto track = parse_csv(read_file(out / "track.csv"), "track");
  EXPECT_EQ(track.header, (std::vector<std::string>{"t", "x", "y", "z", "los", "n_hypotheses"}));
  EXPECT_EQ(track.rows.size(), 50u);
  EXPECT_TRUE(fs::exists(out / "debug.csv"));
  EXPECT_FALSE(fs::exists(out / "fused.csv"));
  auto rep = nlohmann::json::parse(read_file(out / "report.json"));
  EXPECT_LT(rep["mean_error_m"].get<double>(), 0.1);
  EXPECT_EQ(rep["steps"].get<int>(), 50);
  auto cdf = parse_csv(read_file(out / "cdf.csv"), "cdf");
  EXPECT_EQ(cdf.rows.back()[1], "1.000000");
  for (const auto& e : fs::directory_iterator(out))
    EXPECT_EQ(e.path().string().find(".tmp."), std::string::npos) << e.path();
}

TEST(Cli, BadScenarioIsInputError) {
  auto out = workdir("bad");
  EXPECT_EQ(aim_cli("simulate --scenario " + q(out / "nope.json") + " --out " + q(out)), 2);
  write_atomic(out / "broken.json", "{\"segments\": [");
  EXPECT_EQ(aim_cli("simulate --scenario " + q(out / "broken.json") + " --out " + q(out)), 2);
  write_atomic(out / "neg.json", R"({"segments":[{"kind":"hover","duration":-1}],"arrays":[]})");
  EXPECT_EQ(aim_cli("simulate --scenario " + q(out / "neg.json") + " --out " + q(out)), 2);
  EXPECT_EQ(aim_cli("frobnicate"), 2);
}

TEST(Cli, SilentAudioIsIdentificationFailure) {
  auto out = workdir("silent");
  write_atomic(out / "A.wav", encode_wav(std::vector<std::vector<float>>(6, std::vector<float>(5 * 48000)), 48000.0));
  EXPECT_EQ(aim_cli("track --scenario " + q(kHover) + " --out " + q(out)), 3);
  EXPECT_FALSE(fs::exists(out / "track.csv"));
}

TEST(Cli, TruncatedWavKeepsPartialTrack) {
  auto out = workdir("cut");
  ASSERT_EQ(aim_cli("simulate --scenario " + q(kHover) + " --out " + q(out)), 0);
  auto bytes = read_file(out / "A.wav");
  bytes.resize(44 + 6 * 4 * 3 * 48000 + 7);  // three seconds and a stray partial sample
  write_atomic(out / "A.wav", bytes);
  EXPECT_EQ(aim_cli("track --scenario " + q(kHover) + " --out " + q(out)), 2);
  auto track = parse_csv(read_file(out / "track.csv"), "track");
  EXPECT_EQ(track.rows.size(), 30u);
  EXPECT_TRUE(nlohmann::json::parse(read_file(out / "track_meta.json"))["truncated"].get<bool>());
}

TEST(Cli, ConfigFromEnvironment) {
  auto out = workdir("env");
  ASSERT_EQ(aim_cli("simulate --scenario " + q(kHover) + " --out " + q(out)), 0);
  write_atomic(out / "bad.json", "{not json");
  EXPECT_EQ(aim_cli("track --scenario " + q(kHover) + " --out " + q(out), "AIM_CONFIG=" + q(out / "bad.json")), 2);
  write_atomic(out / "good.json", R"({"gate_chi2": 20.0})");
  EXPECT_EQ(aim_cli("track --scenario " + q(kHover) + " --out " + q(out), "AIM_CONFIG=" + q(out / "good.json")), 0);
  auto meta = nlohmann::json::parse(read_file(out / "track_meta.json"));
  EXPECT_EQ(meta["config"]["gate_chi2"].get<double>(), 20.0);
  // An explicit --config wins over the environment.
  EXPECT_EQ(aim_cli("track --scenario " + q(kHover) + " --config " + q(out / "good.json") + " --out " + q(out),
                    "AIM_CONFIG=" + q(out / "bad.json")),
            0);
}
