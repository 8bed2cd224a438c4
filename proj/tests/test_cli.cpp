#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hopf/cli.hpp"

using namespace hopf;
namespace fs = std::filesystem;

#ifndef HOPF_CLI_PATH
#define HOPF_CLI_PATH "hopf"
#endif

namespace {

struct RunResult {
  int status;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hopf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunResult run(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "cd " + dir_.string() + " && " + env + " " + HOPF_CLI_PATH + " " + args + " >" +
                            out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, io::read_file(out), io::read_file(err)};
  }

  io::json load(const std::string& name) const { return io::json::parse(io::read_file(dir_ / name)); }

  fs::path dir_;
};

cli::RunConfig parse(std::vector<std::string> args) { return cli::parse_config(args); }

void expect_usage_error(std::vector<std::string> args, const std::string& flag) {
  try {
    (void)parse(std::move(args));
    ADD_FAILURE() << "expected UsageError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UsageError);
    EXPECT_NE(std::string(e.what()).find(flag), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(ParseConfig, IndexCommand) {
  const cli::RunConfig c = parse({"index", "--h", "2", "--n", "10"});
  EXPECT_EQ(c.command, cli::Command::Index);
  EXPECT_EQ(c.h, std::vector<double>{2.0});
  EXPECT_EQ(c.n, std::vector<int>{10});
}

TEST(ParseConfig, PreimageCommand) {
  const cli::RunConfig c = parse({"preimage", "--h", "2.9", "--spin", "1,0,0", "--res", "64"});
  EXPECT_EQ(c.command, cli::Command::Preimage);
  EXPECT_EQ(c.h.front(), 2.9);
  ASSERT_EQ(c.spins.size(), 1u);
  EXPECT_EQ(c.spins.front(), BlochVector(1, 0, 0));
  EXPECT_EQ(c.res, 64);
}

TEST(ParseConfig, EpsilonIsRejectedForIndex) { expect_usage_error({"index", "--h", "2", "--eps", "0.3"}, "--eps"); }

TEST(ParseConfig, Defaults) {
  const cli::RunConfig c = parse({"campaign", "--h", "2"});
  EXPECT_EQ(c.n, std::vector<int>{10});
  EXPECT_EQ(c.photons, 93000);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.threads, 0u);
  EXPECT_EQ(c.format, "json");
}

TEST(ParseConfig, ListsAndSpins) {
  const cli::RunConfig s = parse({"scaling", "--h", "0", "--h", "2", "--n", "10", "--n", "20"});
  EXPECT_EQ(s.h, (std::vector<double>{0.0, 2.0}));
  EXPECT_EQ(s.n, (std::vector<int>{10, 20}));
  const cli::RunConfig l = parse({"link", "--h", "2.9", "--spins", "1,0,0;0,1,0;0,0,-1"});
  ASSERT_EQ(l.spins.size(), 3u);
  EXPECT_EQ(l.spins[2], BlochVector(0, 0, -1));
  const cli::RunConfig nb = parse({"neighborhood", "--h", "2", "--spin", "1,1,0", "--eps", "0.3"});
  EXPECT_NEAR((nb.spins.front() - BlochVector(1, 1, 0) / std::sqrt(2.0)).norm(), 0.0, 1e-15);
  EXPECT_EQ(parse({"index", "--h", "-2"}).h.front(), -2.0);
}

TEST(ParseConfig, InvalidCombinationsNameTheFlag) {
  expect_usage_error({"index", "--h", "2", "--h", "3"}, "--h");
  expect_usage_error({"index"}, "--h");
  expect_usage_error({"index", "--h", "2", "--n", "2"}, "--n");
  expect_usage_error({"index", "--h", "2", "--n", "ten"}, "--n");
  expect_usage_error({"neighborhood", "--h", "2", "--spin", "1,0,0"}, "--eps");
  expect_usage_error({"neighborhood", "--h", "2", "--spin", "1,0,0", "--eps", "3"}, "--eps");
  expect_usage_error({"preimage", "--h", "2"}, "--spin");
  expect_usage_error({"preimage", "--h", "2", "--spin", "1,0"}, "--spin");
  expect_usage_error({"preimage", "--h", "2", "--spin", "0,0,0"}, "--spin");
  expect_usage_error({"link", "--h", "2", "--spins", "1,0,0"}, "--spins");
  expect_usage_error({"index", "--h", "2", "--photons", "10"}, "--photons");
  expect_usage_error({"index", "--h", "2", "--scheme", "fancy"}, "--scheme");
  expect_usage_error({"index", "--input", "f.json", "--h", "2"}, "--h");
  expect_usage_error({"field", "--h", "2", "--format", "csv"}, "--format");
  expect_usage_error({"texture", "--h", "2", "--format", "xml"}, "--format");
  expect_usage_error({"campaign", "--h", "2", "--photons", "-5"}, "--photons");
  expect_usage_error({"preimage", "--h", "2", "--spin", "1,0,0", "--res", "8"}, "--res");
}

TEST(ParseConfig, HelpIsNotAnError) {
  try {
    (void)parse({"--help"});
    ADD_FAILURE();
  } catch (const cli::HelpRequested& h) {
    EXPECT_NE(h.text.find("campaign"), std::string::npos);
  }
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
  const fs::path cfg = dir_ / "run.toml";
  io::write_atomic(cfg, "h = 0\nn = 8\nseed = 4\n");
  const cli::RunConfig a = parse({"campaign", "--config", cfg.string()});
  EXPECT_EQ(a.h.front(), 0.0);
  EXPECT_EQ(a.n.front(), 8);
  EXPECT_EQ(a.seed, 4u);
  const cli::RunConfig b = parse({"campaign", "--config", cfg.string(), "--h", "2", "--seed", "9"});
  EXPECT_EQ(b.h, std::vector<double>{2.0});
  EXPECT_EQ(b.n.front(), 8);
  EXPECT_EQ(b.seed, 9u);
}

TEST_F(CliTest, IndexReportRoundTrips) {
  const RunResult r = run("index --h 2 --n 10 --out index.json");
  ASSERT_EQ(r.status, 0) << r.err;
  const io::json j = load("index.json");
  EXPECT_TRUE(j.contains("generated_at"));
  const HopfIndexResult read = io::hopf_index_from_json(j);
  const HopfIndexResult direct = hopf_index(sample_state_field({2.0}, MeshSpec(10)));
  EXPECT_EQ(read.chi, direct.chi);
  EXPECT_EQ(read.chern_numbers, direct.chern_numbers);
  EXPECT_EQ(j["expected"], 1);
}

TEST_F(CliTest, FieldFileFeedsOtherCommands) {
  ASSERT_EQ(run("field --h 0 --n 8 --out f.json").status, 0);
  const StateField f = io::state_field_from_json(load("f.json"));
  const StateField direct = sample_state_field({0.0}, MeshSpec(8));
  for (std::size_t i = 0; i < f.size(); ++i) ASSERT_EQ(f.spinors()[i], direct.spinors()[i]);
  ASSERT_EQ(run("index --input f.json --out i.json").status, 0);
  EXPECT_EQ(load("i.json")["chi"].get<double>(), hopf_index(direct).chi);
  ASSERT_EQ(run("chern --input f.json --out c.json").status, 0);
  EXPECT_TRUE(load("c.json")["all_zero"].get<bool>());
}

TEST_F(CliTest, ScalingTableHasDeviationColumns) {
  const RunResult r = run("scaling --h 0 --h 2 --n 10 --n 20 --out scal.json");
  ASSERT_EQ(r.status, 0) << r.err;
  const io::json j = load("scal.json");
  ASSERT_EQ(j["studies"].size(), 2u);
  for (const auto& study : j["studies"]) {
    const auto& rows = study["rows"];
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0]["n"], 10);
    EXPECT_EQ(rows[1]["n"], 20);
    EXPECT_LT(rows[1]["deviation"].get<double>(), rows[0]["deviation"].get<double>());
  }
}

TEST_F(CliTest, LinkMatrixHasUnitMagnitudes) {
  const RunResult r = run("link --h 2.9 --spins \"1,0,0;0,1,0;0,0,-1\" --out link.json");
  ASSERT_EQ(r.status, 0) << r.err;
  const LinkMatrix m = io::link_matrix_from_json(load("link.json"));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      ASSERT_TRUE(m.values[i][j]);
      EXPECT_EQ(std::abs(*m.values[i][j]), 1);
    }
  }
}

TEST_F(CliTest, PreimageLoopsRoundTrip) {
  ASSERT_EQ(run("preimage --h 2.9 --spin 1,0,0 --out pre.json").status, 0);
  const io::json j = load("pre.json");
  const auto& loops = j["targets"][0]["loops"];
  ASSERT_EQ(loops.size(), 1u);
  const Polyline c = io::polyline_from_json(loops[0]);
  const auto direct = preimage_contours({2.9}, SpinTarget({1, 0, 0}));
  ASSERT_EQ(c.vertices.size(), direct.front().vertices.size());
  for (std::size_t i = 0; i < c.vertices.size(); ++i) ASSERT_EQ(c.vertices[i], direct.front().vertices[i]);
}

TEST_F(CliTest, CampaignWritesFieldAndStats) {
  const RunResult r = run("campaign --h 2 --n 10 --photons 93000 --seed 7 --out camp.json");
  ASSERT_EQ(r.status, 0) << r.err;
  const StateField f = io::state_field_from_json(load("camp.json"));
  EXPECT_EQ(f.provenance(), Provenance::SimulatedExperiment);
  const io::json stats = load("camp.stats.json");
  for (const char* key : {"mean_fidelity", "median_fidelity", "ci95", "per_site"}) EXPECT_TRUE(stats.contains(key));
  EXPECT_EQ(stats["per_site"].size(), 1000u);
  EXPECT_EQ(stats["seed"], 7);
  EXPECT_GE(stats["mean_fidelity"].get<double>(), 0.99);
}

TEST_F(CliTest, RerunsAreIdenticalApartFromTimestamp) {
  for (const char* cmd : {"campaign --h 2 --n 6 --seed 3 --threads 3 --out a.json",
                          "campaign --h 2 --n 6 --seed 3 --threads 1 --out b.json"}) {
    ASSERT_EQ(run(cmd).status, 0);
  }
  ASSERT_EQ(run("link --h 0 --spins \"1,0,0;0,1,0\" --out l1.json").status, 0);
  ASSERT_EQ(run("link --h 0 --spins \"1,0,0;0,1,0\" --out l2.json").status, 0);
  const auto strip = [&](const std::string& name) {
    std::string text = io::read_file(dir_ / name);
    const auto at = text.find("\"generated_at\"");
    EXPECT_NE(at, std::string::npos);
    text.erase(at, text.find('\n', at) - at);
    return text;
  };
  EXPECT_EQ(strip("a.json"), strip("b.json"));
  EXPECT_EQ(strip("a.stats.json"), strip("b.stats.json"));
  EXPECT_EQ(strip("l1.json"), strip("l2.json"));
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const RunResult r = run("texture --h 2 --n 4 --format csv", "HOPF_OUTPUT_DIR=" + (dir_ / "outdir").string());
  ASSERT_EQ(r.status, 0) << r.err;
  const std::string csv = io::read_file(dir_ / "outdir" / "texture.csv");
  EXPECT_EQ(csv.rfind("jx,jy,jz,sx,sy,sz\n", 0), 0u);
}

TEST_F(CliTest, ExitCodes) {
  const RunResult usage = run("index --h 2 --eps 0.3");
  EXPECT_EQ(usage.status, 2);
  EXPECT_NE(usage.err.find("--eps"), std::string::npos);

  const RunResult engine = run("index --h 1 --n 10");
  EXPECT_EQ(engine.status, 1);
  const io::json e = io::json::parse(engine.err);
  EXPECT_EQ(e["error"], "GaplessPoint");
  EXPECT_NE(e["message"].get<std::string>().find("(0, 5, 5)"), std::string::npos);

  EXPECT_EQ(run("index --input missing.json").status, 3);
  io::write_atomic(dir_ / "blocker", "x");
  EXPECT_EQ(run("field --h 2 --n 4 --out blocker/f.json").status, 3);

  const RunResult help = run("--help");
  EXPECT_EQ(help.status, 0);
  EXPECT_NE(help.out.find("neighborhood"), std::string::npos);
}
