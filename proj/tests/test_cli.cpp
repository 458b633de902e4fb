#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("revsum_cli_" + std::string(::testing::UnitTest::GetInstance()
                                            ->current_test_info()
                                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  Outcome run(const std::string& args, const std::string& stdin_text = "") const {
    write("stdin.txt", stdin_text);
    const std::string cmd = std::string("\"") + REVSUM_CLI + "\" " + args + " < \"" +
                            path("stdin.txt").string() + "\" > \"" +
                            path("stdout.txt").string() + "\" 2> \"" +
                            path("stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout.txt"));
    r.err = slurp(path("stderr.txt"));
    return r;
  }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("gen-data --out x.jsonl").code, 2);
  EXPECT_EQ(run("gen-data --count many --out x.jsonl").code, 2);
  EXPECT_EQ(run("eval --checkpoint a.ckpt --corpus b.jsonl --bogus 1").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("train --help").code, 0);
}

TEST_F(Cli, RuntimeFailuresExitOne) {
  auto r = run("eval --checkpoint " + path("missing.ckpt").string() + " --corpus " +
               path("missing.jsonl").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("revsum:"), std::string::npos);
  write("bad.json", R"({"variant": "joint_coattn"})");
  write("corpus.jsonl", R"({"review": "good", "summary": "ok", "rating": 4})" "\n");
  EXPECT_EQ(run("train --config " + path("bad.json").string() + " --corpus " +
                path("corpus.jsonl").string() + " --checkpoint " + path("m.ckpt").string())
                .code,
            1);
}

TEST_F(Cli, GenDataIsDeterministic) {
  ASSERT_EQ(run("gen-data --count 50 --seed 4 --out " + path("a.jsonl").string()).code, 0);
  ASSERT_EQ(run("gen-data --count 50 --seed 4 --out " + path("b.jsonl").string()).code, 0);
  ASSERT_EQ(run("gen-data --count 50 --seed 5 --out " + path("c.jsonl").string()).code, 0);
  const auto a = slurp(path("a.jsonl"));
  EXPECT_EQ(a, slurp(path("b.jsonl")));
  EXPECT_NE(a, slurp(path("c.jsonl")));
  std::istringstream lines(a);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    EXPECT_TRUE(j.contains("review"));
    EXPECT_TRUE(j.contains("summary"));
    EXPECT_GE(j["rating"].get<int>(), 1);
    ++n;
  }
  EXPECT_EQ(n, 50u);
}

TEST_F(Cli, AnalyzeReportsConflictingSet) {
  write("r.jsonl",
        "{\"id\": 0, \"gold\": 1, \"pred\": 1}\n"
        "{\"id\": 1, \"gold\": 2, \"pred\": 5}\n"
        "{\"id\": 2, \"gold\": 3, \"pred\": 5}\n");
  write("s.jsonl",
        "{\"id\": 0, \"gold\": 1, \"pred\": 2}\n"
        "{\"id\": 1, \"gold\": 2, \"pred\": 2}\n"
        "{\"id\": 2, \"gold\": 3, \"pred\": 5}\n");
  auto r = run("analyze --review-preds " + path("r.jsonl").string() + " --summary-preds " +
               path("s.jsonl").string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["conflicting"]["indices"], json::array({0, 1}));
  EXPECT_EQ(j["union"]["indices"], json::array({0, 1}));
  EXPECT_EQ(j["non_conflicting"]["count"], 1);

  write("s_bad.jsonl", "{\"id\": 0, \"gold\": 1, \"pred\": 2}\n");
  EXPECT_EQ(run("analyze --review-preds " + path("r.jsonl").string() + " --summary-preds " +
                path("s_bad.jsonl").string())
                .code,
            1);
}

TEST_F(Cli, TrainEvalPredictVisualize) {
  ASSERT_EQ(run("gen-data --count 24 --seed 2 --out " + path("toy.jsonl").string()).code, 0);
  write("run.json", R"({"variant": "review_centric", "embedding_dim": 12,
    "hidden_size": 8, "heads": 2, "layers": 2, "dropout": 0.0, "epochs": 200,
    "batch_size": 8, "seed": 3, "patience": 200, "learning_rate": 0.01,
    "target_accuracy": 1.0, "min_count": 1})");
  auto t = run("train --config " + path("run.json").string() + " --corpus " +
               path("toy.jsonl").string() + " --checkpoint " + path("m.ckpt").string() +
               " --history " + path("history.jsonl").string());
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(json::parse(t.out)["best_dev_accuracy"], 1.0);
  EXPECT_FALSE(slurp(path("history.jsonl")).empty());

  auto e = run("eval --checkpoint " + path("m.ckpt").string() + " --corpus " +
               path("toy.jsonl").string() + " --out " + path("preds.jsonl").string());
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(json::parse(e.out)["accuracy"], 1.0);
  std::istringstream preds(slurp(path("preds.jsonl")));
  std::string line;
  std::getline(preds, line);
  auto first = json::parse(line);
  EXPECT_EQ(first["id"], 0);
  EXPECT_EQ(first["gold"], first["pred"]);
  EXPECT_EQ(first["model"], "review_centric");

  auto p = run("predict --checkpoint " + path("m.ckpt").string(),
               R"({"review": "a fun game for the kids", "summary": "great fun"})");
  ASSERT_EQ(p.code, 0) << p.err;
  auto pj = json::parse(p.out);
  EXPECT_EQ(pj["probabilities"].size(), 5u);
  EXPECT_FALSE(pj["trace"].empty());
  EXPECT_EQ(run("predict --checkpoint " + path("m.ckpt").string(), "{\"review\": 3}").code, 1);

  auto v = run("visualize --checkpoint " + path("m.ckpt").string() + " --corpus " +
               path("toy.jsonl").string() + " --index 1 --out " + path("case.html").string());
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_NE(slurp(path("case.html")).find("<html>"), std::string::npos);
  auto sidecar = json::parse(slurp(path("case.json")));
  EXPECT_EQ(sidecar["rows"].size(), 4u);
}

TEST_F(Cli, GradcheckPasses) {
  auto r = run("gradcheck --samples 20");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
