#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tokshap/report.hpp"

using namespace tokshap;

namespace {

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

struct Fixture {
  TokenSeq context = tokenize("Tom Brady won the game. It was in <Tampa> & Miami. Fans cheered.");
  HashProvider provider{128};
  Datastore store = build_datastore(context, provider);
  AttributionMatrix matrix;
  std::vector<SpanScore> ranked;

  Fixture() {
    AttributionQuery aq{"Who won?", context, tokenize("Tom Brady won"), std::nullopt};
    matrix = attribute_response(store, provider, aq);
    ranked = rank_sources(matrix, sentence_spans(context), 2);
  }
};

}  // namespace

TEST(Report, JsonRoundTrip) {
  Fixture f;
  const auto r = make_report(f.matrix, f.ranked, {{"accuracy", 1.0}}, false);
  EXPECT_EQ(r.provider, "hash:128");
  EXPECT_EQ(r.span_scores.size(), 2u);
  EXPECT_FALSE(r.metadata.contains("timestamp"));
  const auto path = testutil::temp_path("report.json");
  emit_report(r, path, "json");
  EXPECT_EQ(load_report(path), r);
  std::filesystem::remove(path);
}

TEST(Report, SchemaFields) {
  Fixture f;
  const auto j = to_json(make_report(f.matrix, f.ranked));
  for (const char* key : {"params", "targets", "span_scores", "token_phi", "metrics"}) EXPECT_TRUE(j.contains(key)) << key;
  for (const char* key : {"K", "M", "gamma", "provider"}) EXPECT_TRUE(j["params"].contains(key)) << key;
  const auto& span = j["span_scores"][0];
  for (const char* key : {"span_start", "span_end", "score", "rank"}) EXPECT_TRUE(span.contains(key)) << key;
  EXPECT_TRUE(j["metadata"].contains("timestamp"));
  EXPECT_EQ(j["metadata"]["feature_join"], "space");
}

TEST(Report, HtmlMarksEveryRankedSpan) {
  Fixture f;
  auto r = make_report(f.matrix, f.ranked);
  r.context = f.context;
  const auto html = render_html(r);
  EXPECT_EQ(count_of(html, "<mark class=\"span\""), f.ranked.size());
  EXPECT_NE(html.find("&lt;Tampa&gt; &amp; Miami"), std::string::npos);
  EXPECT_EQ(html.find("<Tampa>"), std::string::npos);

  const auto three = rank_sources(f.matrix, sentence_spans(f.context), 3);
  r = make_report(f.matrix, three);
  r.context = context_from_store(f.store);
  EXPECT_EQ(count_of(render_html(r), "<mark class=\"span\""), 3u);
}

TEST(Report, Errors) {
  Fixture f;
  const auto r = make_report(f.matrix, f.ranked);
  EXPECT_THROW(emit_report(r, testutil::temp_path("x.pdf"), "pdf"), InvalidArgument);
  EXPECT_THROW(report_from_json(nlohmann::json::object()), FormatError);
  const auto path = testutil::temp_path("bad.json");
  detail::write_file(path, "{nope");
  EXPECT_THROW(load_report(path), FormatError);
  std::filesystem::remove(path);
}

TEST(Report, ContextFromStore) {
  Fixture f;
  const auto ctx = context_from_store(f.store);
  ASSERT_EQ(ctx.size(), f.context.size());
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    EXPECT_EQ(ctx[i].surface, f.context[i].surface);
    EXPECT_EQ(ctx[i].sentence_id, f.context[i].sentence_id);
  }
}
