#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "tokshap/cli.hpp"

using namespace tokshap;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "tokshap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) { return detail::read_file(p); }

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir = testutil::temp_path(::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }

  std::string file(const std::string& name, const std::string& content = "") {
    const auto p = dir / name;
    if (!content.empty()) detail::write_file(p, content);
    return p.string();
  }

  std::filesystem::path dir;
};

}  // namespace

TEST_F(CliTest, GenKv) {
  const auto out = file("kv.jsonl");
  const auto r = run({"gen-kv", "--pairs", "50", "--count", "100", "--seed", "0", "--out", out});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto exs = load_jsonl(out);
  ASSERT_EQ(exs.size(), 100u);
  EXPECT_EQ(exs[42], gen_kv(50, 42));
}

TEST_F(CliTest, GenKvMatchesGolden) {
  const auto r = run({"gen-kv", "--pairs", "50", "--seed", "42", "--out", "-"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(std::string(TOKSHAP_TEST_DATA) + "/kv_seed42_n50.jsonl"));
}

TEST_F(CliTest, BuildAndAttribute) {
  const auto ctx = file("ctx.txt", "Tom Brady won the game. The weather was cold.\nFans cheered loudly.");
  const auto q = file("q.txt", "Who won the game?\n");
  const auto resp = file("r.txt", "Tom Brady won");
  const auto store = file("s.tksh");
  auto r = run({"build-store", "--context", ctx, "--provider", "hash:256", "--out", store});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_datastore(store).size(), 15u);

  const auto rep = file("rep.json");
  r = run({"attribute", "--store", store, "--query", q, "--response", resp, "--provider", "hash:256", "--out", rep});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = load_report(rep);
  EXPECT_EQ(report.targets, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(report.span_scores.size(), 3u);
  EXPECT_EQ(report.k, 1u);
  EXPECT_EQ(report.m, 10u);

  const auto html = file("rep.html");
  r = run({"attribute", "--store", store, "--query", q, "--response", resp, "--context", ctx, "--targets", "1,2",
           "--top-k", "2", "--format", "html", "--out", html});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(html).find("data-rank=\"2\""), std::string::npos);
}

TEST_F(CliTest, AttributeIsIdempotentWithoutTimestamp) {
  const auto ctx = file("ctx.txt", "a b c. d e f. g h.");
  const auto q = file("q.txt", "question");
  const auto resp = file("r.txt", "d e");
  const auto store = file("s.tksh");
  ASSERT_EQ(run({"build-store", "--context", ctx, "--provider", "hash:64", "--out", store}).code, 0);
  const std::vector<std::string> args{"attribute", "--store", store, "--query", q, "--response", resp,
                                      "--no-timestamp", "--K", "2", "--threads", "3", "--out", "-"};
  const auto a = run(args), b = run(args);
  EXPECT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.find("timestamp"), std::string::npos);
}

TEST_F(CliTest, Eval) {
  const auto data = file("kv.jsonl");
  ASSERT_EQ(run({"gen-kv", "--pairs", "10", "--count", "3", "--out", data}).code, 0);
  const auto metrics = file("m.json");
  const auto r = run({"eval", "--data", data, "--provider", "hash:256", "--top-k", "2", "--out", metrics});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(metrics));
  EXPECT_EQ(j["examples"], 3);
  EXPECT_EQ(j["k"], 2);
  EXPECT_EQ(j["params"]["provider"], "hash:256");
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"gen-kv", "--bogus", "--out", "-"}).code, 1);
  EXPECT_EQ(run({"gen-kv", "--pairs", "1", "--out", "-"}).code, 1);
  const auto data = file("kv.jsonl");
  ASSERT_EQ(run({"gen-kv", "--pairs", "4", "--out", data}).code, 0);
  auto r = run({"eval", "--data", data, "--provider", "hash:64", "--K", "5", "--M", "3"});
  EXPECT_EQ(r.code, 1);
  r = run({"eval", "--data", data, "--provider", "hash:64", "--K", "3", "--M", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, RuntimeErrors) {
  const auto bad = file("bad.jsonl", "{\"id\":1}\n");
  EXPECT_EQ(run({"eval", "--data", bad, "--provider", "hash:64"}).code, 2);
  const auto ctx = file("ctx.txt", "a b");
  EXPECT_EQ(run({"build-store", "--context", ctx, "--provider", "nope:3", "--out", file("s.tksh")}).code, 2);
  const auto corrupt = file("c.tksh", "XXXXgarbage");
  const auto q = file("q.txt", "q");
  EXPECT_EQ(run({"attribute", "--store", corrupt, "--query", q, "--response", q, "--out", "-"}).code, 2);
}
