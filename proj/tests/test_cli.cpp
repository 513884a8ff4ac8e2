#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("dnrnn_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const auto r = run("gen-synth --out " + path("synth") + " --seed 3");
    ASSERT_EQ(r.status, 0) << r.err;
    std::ofstream(path("desk.toml")) << "widths = [50, 30]\nbranches = 3\nseed = 5\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static std::string manifest() { return path("synth/manifest.toml"); }

  static Outcome run(const std::string& args) {
    Outcome r;
    const auto err = (dir_ / "stderr.txt").string();
    const std::string cmd = std::string(DNRNN_CLI_PATH) + " " + args + " 2>" + err;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int raw = ::pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.err = slurp(err);
    return r;
  }

  static nlohmann::json last_json_line(const std::string& text) {
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line))
      if (!line.empty() && line.front() == '{') last = line;
    return nlohmann::json::parse(last);
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
  const auto r = run("train --variant mlp --manifest " + manifest() + " --out " + path("x.rnmm"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("unknown variant"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, UnknownConfigKeysListed) {
  std::ofstream(path("bad.toml")) << "widths = [5, 4]\nbranchez = 2\n[fista]\nl1 = 1\n";
  const auto r = run("train --config " + path("bad.toml") + " --manifest " + manifest() + " --out " + path("x.rnmm"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("branchez"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("fista.l1"), std::string::npos) << r.err;
}

TEST_F(Cli, TrainReportPredictEval) {
  const auto model = path("m.rnmm");
  const auto r = run("train --config " + path("desk.toml") + " --variant mcrnn_mla --manifest " + manifest() +
                     " --out " + model);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(model));
  EXPECT_TRUE(fs::exists(model + ".prep"));
  EXPECT_NE(r.out.find("accuracy (%)"), std::string::npos);
  const auto report = last_json_line(r.out);
  EXPECT_EQ(report["variant"], "mcrnn_mla");
  EXPECT_GE(report["accuracy"].get<double>(), 95.0);
  EXPECT_EQ(report["seed"], 5);
  EXPECT_EQ(report["config"]["widths"], nlohmann::json::array({50, 30}));
  EXPECT_EQ(report["config"]["cluster"]["n"], 10);
  std::int64_t total = 0;
  for (const auto& row : report["confusion"])
    for (const auto& v : row) total += v.get<std::int64_t>();
  EXPECT_EQ(total, report["test_rows"].get<std::int64_t>());

  const auto p = run("predict --model " + model + " --manifest " + manifest());
  ASSERT_EQ(p.status, 0) << p.err;
  EXPECT_EQ(csv_rows(p.out).size(), 2001u);

  const auto e = run("eval --model " + model + " --manifest " + manifest());
  ASSERT_EQ(e.status, 0) << e.err;
  const auto evaluated = last_json_line(e.out);
  EXPECT_EQ(evaluated["accuracy"], report["accuracy"]);
  EXPECT_EQ(evaluated["confusion"], report["confusion"]);
  EXPECT_EQ(evaluated["config"], report["config"]);
}

TEST_F(Cli, SameSeedSameModelFile) {
  const std::string common = " --config " + path("desk.toml") + " --variant mcrnn_mla1 --manifest " + manifest();
  ASSERT_EQ(run("train" + common + " --out " + path("a.rnmm")).status, 0);
  ASSERT_EQ(run("train" + common + " --threads 2 --out " + path("b.rnmm")).status, 0);
  ASSERT_EQ(run("train" + common + " --seed 6 --out " + path("c.rnmm")).status, 0);
  const auto a = slurp(path("a.rnmm"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("b.rnmm")));
  EXPECT_NE(a, slurp(path("c.rnmm")));
}

TEST_F(Cli, SimulateColumns) {
  const auto zero = run("simulate --lambda-plus 0 --lambda-minus 0.01 --x 0 --horizon 1000");
  ASSERT_EQ(zero.status, 0) << zero.err;
  auto rows = csv_rows(zero.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "zeta", "fixed_point_q", "q_hat", "std_err"}));
  EXPECT_EQ(std::stod(rows[1][1]), 0.0);
  EXPECT_EQ(std::stod(rows[1][2]), 0.0);
  EXPECT_EQ(std::stod(rows[1][3]), 0.0);

  const auto sweep = run("simulate --horizon 2000");
  ASSERT_EQ(sweep.status, 0) << sweep.err;
  rows = csv_rows(sweep.out);
  ASSERT_EQ(rows.size(), 12u);
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_LE(std::abs(std::stod(rows[i][1]) - std::stod(rows[i][2])), 1e-8) << "row " << i;

  EXPECT_EQ(run("simulate --p 2").status, 2);
}

TEST_F(Cli, BenchTableAndCsvAgree) {
  const auto r = run("bench --config " + path("desk.toml") + " --manifest " + manifest() + " --out " + path("b.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = csv_rows(slurp(path("b.csv")));
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], (std::vector<std::string>{"Method", "synthetic acc (%)", "synthetic time (s)"}));
  EXPECT_EQ(csv[1][0], "MCRNN-MLA");
  EXPECT_EQ(csv[2][0], "MCRNN-MLA1");
  EXPECT_EQ(csv[3][0], "MCRNN-MLA2");
  EXPECT_EQ(csv[4][0], "Improved RNN-MLA");
  EXPECT_GT(std::stod(csv[2][2]), std::stod(csv[1][2]));
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto line = r.out.find(csv[i][0] + " ");
    ASSERT_NE(line, std::string::npos) << csv[i][0];
    const auto text = r.out.substr(line, r.out.find('\n', line) - line);
    EXPECT_NE(text.find(csv[i][1]), std::string::npos) << text;
    EXPECT_NE(text.find(csv[i][2]), std::string::npos) << text;
  }
}

TEST_F(Cli, BenchRecordsPerCellFailures) {
  fs::create_directories(path("broken"));
  std::ofstream(path("broken/manifest.toml")) << "name = \"broken\"\nlabels = \"nope.csv\"\n[[channel]]\npath = \"x.csv\"\n";
  const auto r = run("bench --config " + path("desk.toml") + " --manifest " + path("broken/manifest.toml"));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("\u2014"), std::string::npos);
  EXPECT_NE(r.out.find("Diagnostics:"), std::string::npos);
  EXPECT_NE(r.out.find("cannot open"), std::string::npos);
}

TEST_F(Cli, ValidateSubset) {
  const auto r = run("validate --only 1,2,5");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(csv_rows(r.out).size(), 3u);
  EXPECT_EQ(r.out.find("[FAIL]"), std::string::npos);
  EXPECT_NE(r.out.find("[PASS] 5."), std::string::npos);
}
