#pragma once

// Attribution report in JSON and as a static HTML page.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokshap/binary_io.hpp"
#include "tokshap/datastore.hpp"
#include "tokshap/error.hpp"
#include "tokshap/pipeline.hpp"
#include "tokshap/text.hpp"

namespace tokshap {

struct RankedSpan {
  std::uint32_t span_start = 0;  // first context position
  std::uint32_t span_end = 0;    // one past the last context position
  double score = 0.0;
  std::size_t rank = 0;
  std::string kind;
  std::size_t index = 0;

  bool operator==(const RankedSpan&) const = default;
};

struct TokenPhi {
  std::uint32_t pos = 0;
  std::size_t t = 0;
  double phi = 0.0;

  bool operator==(const TokenPhi&) const = default;
};

struct Report {
  std::size_t k = 1;
  std::size_t m = 10;
  double gamma = 1.0;
  std::string provider;
  std::vector<std::size_t> targets;
  std::vector<RankedSpan> span_scores;
  std::vector<TokenPhi> token_phi;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  std::optional<TokenSeq> context;  // used for HTML rendering only

  bool operator==(const Report& o) const {
    return k == o.k && m == o.m && gamma == o.gamma && provider == o.provider && targets == o.targets &&
           span_scores == o.span_scores && token_phi == o.token_phi && metrics == o.metrics &&
           metadata == o.metadata;
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Report make_report(const AttributionMatrix& matrix, const std::vector<SpanScore>& ranked,
                          nlohmann::json metrics = nlohmann::json::object(), bool timestamp = true) {
  Report r;
  r.k = matrix.params.k;
  r.m = matrix.params.m;
  r.gamma = matrix.params.gamma;
  r.provider = matrix.provider_id;
  r.targets = matrix.targets;
  for (const auto& s : ranked) r.span_scores.push_back({s.start(), s.end(), s.score, s.rank, to_string(s.kind), s.index});
  for (const auto& [key, value] : matrix.phi) r.token_phi.push_back({key.first, key.second, value});
  r.metrics = std::move(metrics);
  r.metadata["feature_join"] = "space";
  r.metadata["weight_bits"] = matrix.params.weight_bits;
  if (timestamp) r.metadata["timestamp"] = utc_timestamp();
  return r;
}

inline nlohmann::ordered_json to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["params"] = {{"K", r.k}, {"M", r.m}, {"gamma", r.gamma}, {"provider", r.provider}};
  j["targets"] = r.targets;
  j["span_scores"] = nlohmann::ordered_json::array();
  for (const auto& s : r.span_scores)
    j["span_scores"].push_back({{"span_start", s.span_start},
                                {"span_end", s.span_end},
                                {"score", s.score},
                                {"rank", s.rank},
                                {"kind", s.kind},
                                {"index", s.index}});
  j["token_phi"] = nlohmann::ordered_json::array();
  for (const auto& p : r.token_phi) j["token_phi"].push_back({{"pos", p.pos}, {"t", p.t}, {"phi", p.phi}});
  j["metrics"] = r.metrics;
  j["metadata"] = r.metadata;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    const auto& p = j.at("params");
    r.k = p.at("K").get<std::size_t>();
    r.m = p.at("M").get<std::size_t>();
    r.gamma = p.at("gamma").get<double>();
    r.provider = p.at("provider").get<std::string>();
    r.targets = j.at("targets").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("span_scores"))
      r.span_scores.push_back({s.at("span_start").get<std::uint32_t>(), s.at("span_end").get<std::uint32_t>(),
                               s.at("score").get<double>(), s.at("rank").get<std::size_t>(),
                               s.value("kind", std::string("sentence")), s.value("index", std::size_t{0})});
    for (const auto& t : j.at("token_phi"))
      r.token_phi.push_back({t.at("pos").get<std::uint32_t>(), t.at("t").get<std::size_t>(), t.at("phi").get<double>()});
    r.metrics = j.at("metrics");
    r.metadata = j.value("metadata", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid report: ") + e.what());
  }
}

inline Report load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid report JSON: ") + e.what());
  }
}

/// Token sequence rebuilt from a datastore: value tokens joined by single spaces.
inline TokenSeq context_from_store(const Datastore& store) {
  std::vector<const DatastoreEntry*> order;
  for (const auto& e : store.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->position < b->position; });
  TokenSeq seq;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) seq.text += (order[i]->sentence_id != order[i - 1]->sentence_id) ? '\n' : ' ';
    const std::size_t start = seq.text.size();
    seq.text += order[i]->value_token;
    seq.tokens.push_back({order[i]->value_token, start, seq.text.size(), order[i]->sentence_id});
  }
  return seq;
}

namespace detail {

inline std::string html_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "<br>\n"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Context text with every ranked span wrapped in a <mark> shaded by its score.
inline std::string render_html(const Report& r) {
  std::string html =
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Attribution report</title>\n"
      "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto;line-height:1.6}"
      "mark.span{border-radius:3px;padding:0 2px}table{border-collapse:collapse}"
      "td,th{border:1px solid #ccc;padding:2px 8px}</style></head><body>\n";
  html += "<h1>Attribution report</h1>\n<p>K=" + std::to_string(r.k) + " M=" + std::to_string(r.m) +
          " gamma=" + detail::fmt_double(r.gamma) + " provider=" + detail::html_escape(r.provider) + "</p>\n";

  double max_abs = 0.0;
  for (const auto& s : r.span_scores) max_abs = std::max(max_abs, std::abs(s.score));

  html += "<div class=\"context\">\n";
  if (r.context && !r.context->empty()) {
    const auto& ctx = *r.context;
    std::vector<const RankedSpan*> spans;
    for (const auto& s : r.span_scores)
      if (s.span_end > s.span_start && s.span_end <= ctx.size()) spans.push_back(&s);
    std::sort(spans.begin(), spans.end(), [](auto* a, auto* b) { return a->span_start < b->span_start; });
    std::size_t cursor = 0;
    for (const auto* s : spans) {
      const std::size_t begin = ctx[s->span_start].byte_start;
      const std::size_t end = ctx[s->span_end - 1].byte_end;
      if (begin < cursor) continue;  // overlapping custom spans keep the first
      html += detail::html_escape(std::string_view(ctx.text).substr(cursor, begin - cursor));
      const double alpha = max_abs > 0.0 ? 0.15 + 0.6 * std::abs(s->score) / max_abs : 0.15;
      const char* rgb = s->score >= 0.0 ? "66,133,244" : "219,68,55";
      html += "<mark class=\"span\" data-rank=\"" + std::to_string(s->rank) + "\" data-score=\"" +
              detail::fmt_double(s->score) + "\" style=\"background-color:rgba(" + rgb + "," +
              detail::fmt_double(alpha) + ")\" title=\"rank " + std::to_string(s->rank) + ", score " +
              detail::fmt_double(s->score) + "\">";
      html += detail::html_escape(std::string_view(ctx.text).substr(begin, end - begin));
      html += "</mark>";
      cursor = end;
    }
    html += detail::html_escape(std::string_view(ctx.text).substr(cursor));
  }
  html += "\n</div>\n<h2>Ranked spans</h2>\n<table><tr><th>rank</th><th>kind</th><th>positions</th><th>score</th></tr>\n";
  for (const auto& s : r.span_scores)
    html += "<tr><td>" + std::to_string(s.rank) + "</td><td>" + detail::html_escape(s.kind) + "</td><td>" +
            std::to_string(s.span_start) + "&ndash;" + std::to_string(s.span_end) + "</td><td>" +
            detail::fmt_double(s.score) + "</td></tr>\n";
  html += "</table>\n</body></html>\n";
  return html;
}

inline void emit_report(const Report& r, const std::filesystem::path& path, std::string_view format) {
  if (format == "json")
    detail::write_file(path, to_json(r).dump(2) + "\n");
  else if (format == "html")
    detail::write_file(path, render_html(r));
  else
    throw InvalidArgument("unknown report format \"" + std::string(format) + "\" (expected json or html)");
}

}  // namespace tokshap
