#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "tokshap/eval.hpp"

using namespace tokshap;

namespace {

std::vector<EvalExample> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_jsonl(in);
}

const char* kLine =
    R"({"id":"a","query":"q?","context":"x y. z w.","response":"z","gold":{"kind":"sentence_set","payload":[1]}})";

}  // namespace

TEST(GenKv, Structure) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ex = gen_kv(2, seed);
    const auto& ctx = std::get<std::string>(ex.context);
    EXPECT_EQ(std::count(ctx.begin(), ctx.end(), '\n'), 1);
    const auto g = ex.gold.payload.at(0).get<std::size_t>();
    EXPECT_LT(g, 2u);
    EXPECT_EQ(ex.gold.kind, "sentence_set");
  }
}

TEST(GenKv, DistinctAndConsistent) {
  const auto ex = gen_kv(50, 5);
  const auto seq = tokenize(std::get<std::string>(ex.context));
  ASSERT_EQ(seq.size(), 150u);
  std::set<std::string> seen;
  for (std::size_t line = 0; line < 50; ++line) {
    EXPECT_EQ(seq[3 * line].surface.size(), 16u);
    EXPECT_EQ(seq[3 * line + 1].surface, ":");
    EXPECT_EQ(seq[3 * line + 2].sentence_id, line);
    EXPECT_TRUE(seen.insert(seq[3 * line].surface).second);
    EXPECT_TRUE(seen.insert(seq[3 * line + 2].surface).second);
  }
  const auto g = ex.gold.payload.at(0).get<std::size_t>();
  EXPECT_EQ(ex.query, "What is the value of key " + seq[3 * g].surface + "?");
  EXPECT_EQ(ex.response, seq[3 * g + 2].surface);
}

TEST(GenKv, DeterministicAndFrozen) {
  EXPECT_EQ(gen_kv(50, 42), gen_kv(50, 42));
  EXPECT_NE(gen_kv(50, 42), gen_kv(50, 43));
  std::ifstream in(std::string(TOKSHAP_TEST_DATA) + "/kv_seed42_n50.jsonl");
  ASSERT_TRUE(in);
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(to_jsonl({gen_kv(50, 42)}), golden.str());
  EXPECT_THROW(gen_kv(1, 0), InvalidArgument);
}

TEST(Jsonl, ParsesLines) {
  const std::string text = std::string(kLine) + "\n" + kLine + "\n\n" +
                           R"({"id":"b","query":"q","context":["p0","p1"],"response":"r","gold":{"kind":"passage_index","payload":1},"targets":[0]})" + "\n";
  const auto exs = parse(text);
  ASSERT_EQ(exs.size(), 3u);
  EXPECT_EQ(exs[0].id, "a");
  EXPECT_EQ(std::get<std::vector<std::string>>(exs[2].context).size(), 2u);
  EXPECT_EQ(exs[2].targets, (std::vector<std::size_t>{0}));
  EXPECT_EQ(parse(to_jsonl(exs)), exs);
  EXPECT_TRUE(parse("").empty());
}

TEST(Jsonl, ErrorsCarryLineNumber) {
  const auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      parse(text);
      FAIL() << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_line(std::string(kLine) + "\n" + R"({"id":"a","context":"x","response":"z","gold":{"kind":"sentence_set","payload":[0]}})", 2);
  expect_line("{not json", 1);
  expect_line(std::string(kLine) + "\n\n" + R"({"id":"a","query":"q","context":"x","response":"z","gold":{"kind":"nope","payload":0}})", 3);
  expect_line(R"({"id":"a","query":"q","context":5,"response":"z","gold":{"kind":"passage_index","payload":0}})", 1);
  expect_line(R"({"id":"a","query":"q","context":"c","response":"z","gold":{"kind":"answer_span","payload":[1]}})", 1);
}

TEST(Metrics, Accuracy) {
  EXPECT_EQ(metric_accuracy({1, 2}, {1, 3}), 0.5);
  EXPECT_EQ(metric_accuracy({4, 5, 6}, {4, 5, 6}), 1.0);
  EXPECT_THROW(metric_accuracy({}, {}), InsufficientData);
  EXPECT_THROW(metric_accuracy({1}, {1, 2}), InvalidArgument);
}

TEST(Metrics, PrecisionRecall) {
  auto m = metric_pr_at_k({1, 2, 7, 8, 9}, {1, 2, 3}, 5);
  EXPECT_DOUBLE_EQ(m.precision, 0.4);
  EXPECT_NEAR(m.recall, 2.0 / 3, 1e-12);
  EXPECT_NEAR(m.f1, 2 * 0.4 * (2.0 / 3) / (0.4 + 2.0 / 3), 1e-12);
  m = metric_pr_at_k({3, 1}, {1, 3}, 2);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  m = metric_pr_at_k({5}, {1}, 1);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_THROW(metric_pr_at_k({1}, {}, 1), InsufficientData);
  EXPECT_THROW(metric_pr_at_k({1, 2}, {1}, 1), InvalidArgument);
}

TEST(Metrics, CountsAreIntegral) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.next() % 6;
    std::vector<std::size_t> pred;
    for (std::size_t i = 0; i < k; ++i) pred.push_back(rng.next() % 10);
    std::set<std::size_t> gold;
    while (gold.size() < 1 + rng.next() % 4) gold.insert(rng.next() % 10);
    const auto m = metric_pr_at_k(pred, gold, k);
    EXPECT_NEAR(m.precision * k, std::round(m.precision * k), 1e-9);
    EXPECT_NEAR(m.recall * gold.size(), std::round(m.recall * gold.size()), 1e-9);
  }
}

TEST(Prepare, PassagesAndAnswerSpans) {
  EvalExample ex;
  ex.context = std::vector<std::string>{"first passage here.", "second one. more"};
  ex.gold = {"answer_span", nlohmann::json::array({27, 30})};  // "one" in the joined text
  const auto pc = prepare_context(ex);
  ASSERT_EQ(pc.spans.size(), 2u);
  EXPECT_EQ(pc.spans[0].kind, SpanKind::passage);
  EXPECT_EQ(pc.spans[1].positions.front(), 4u);
  EXPECT_EQ(gold_spans(ex, pc), (std::set<std::size_t>{1}));
}

TEST(Evaluate, SmallRun) {
  HashProvider p(256);
  const auto exs = parse(std::string(kLine) + "\n");
  const auto s = evaluate(exs, p, {}, 1);
  EXPECT_EQ(s.examples, 1u);
  EXPECT_EQ(s.single_gold, 1u);
  ASSERT_TRUE(s.outcomes[0].top1.has_value());
  EXPECT_THROW(evaluate({}, p, {}, 1), InsufficientData);
}

TEST(Evaluate, ThreadIndependent) {
  HashProvider p(256);
  std::vector<EvalExample> exs;
  for (std::uint64_t seed = 0; seed < 6; ++seed) exs.push_back(gen_kv(10, seed));
  const auto a = evaluate(exs, p, {}, 2, 1);
  const auto b = evaluate(exs, p, {}, 2, 3);
  EXPECT_EQ(a.to_json(), b.to_json());
  for (std::size_t i = 0; i < exs.size(); ++i) EXPECT_EQ(a.outcomes[i].matrix, b.outcomes[i].matrix);
}
