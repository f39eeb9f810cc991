#pragma once

// Synthetic key-value retrieval benchmark, JSONL datasets, attribution metrics and runs.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tokshap/datastore.hpp"
#include "tokshap/embedding.hpp"
#include "tokshap/error.hpp"
#include "tokshap/hash.hpp"
#include "tokshap/pipeline.hpp"
#include "tokshap/text.hpp"

namespace tokshap {

struct Gold {
  std::string kind;  // passage_index | sentence_set | answer_span
  nlohmann::json payload;

  bool operator==(const Gold&) const = default;
};

struct EvalExample {
  std::string id;
  std::string query;
  std::variant<std::string, std::vector<std::string>> context;
  std::string response;
  Gold gold;
  std::optional<std::vector<std::size_t>> targets;  // response tokens to attribute; all when unset

  bool operator==(const EvalExample&) const = default;
};

// ---------------------------------------------------------------------------------------------
// JSONL

inline nlohmann::ordered_json to_json(const EvalExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["query"] = ex.query;
  if (const auto* text = std::get_if<std::string>(&ex.context))
    j["context"] = *text;
  else
    j["context"] = std::get<std::vector<std::string>>(ex.context);
  j["response"] = ex.response;
  j["gold"] = {{"kind", ex.gold.kind}, {"payload", ex.gold.payload}};
  if (ex.targets) j["targets"] = *ex.targets;
  return j;
}

namespace detail {

inline const std::set<std::string>& gold_kinds() {
  static const std::set<std::string> kinds{"passage_index", "sentence_set", "answer_span"};
  return kinds;
}

inline EvalExample example_from_json(const nlohmann::json& j, std::size_t line) {
  const auto fail = [&](const std::string& what) -> EvalExample { throw ParseError(line, what); };
  if (!j.is_object()) return fail("expected a JSON object");
  for (const char* key : {"id", "query", "context", "response", "gold"})
    if (!j.contains(key)) return fail(std::string("missing \"") + key + "\"");
  EvalExample ex;
  if (!j["id"].is_string() || !j["query"].is_string() || !j["response"].is_string())
    return fail("\"id\", \"query\" and \"response\" must be strings");
  ex.id = j["id"].get<std::string>();
  ex.query = j["query"].get<std::string>();
  ex.response = j["response"].get<std::string>();
  const auto& ctx = j["context"];
  if (ctx.is_string()) {
    ex.context = ctx.get<std::string>();
  } else if (ctx.is_array() && std::all_of(ctx.begin(), ctx.end(), [](const auto& p) { return p.is_string(); })) {
    ex.context = ctx.get<std::vector<std::string>>();
  } else {
    return fail("\"context\" must be a string or an array of strings");
  }
  const auto& gold = j["gold"];
  if (!gold.is_object() || !gold.contains("kind") || !gold.contains("payload") || !gold["kind"].is_string())
    return fail("\"gold\" must be {\"kind\": string, \"payload\": ...}");
  ex.gold.kind = gold["kind"].get<std::string>();
  ex.gold.payload = gold["payload"];
  if (!gold_kinds().contains(ex.gold.kind)) return fail("unknown gold kind \"" + ex.gold.kind + "\"");
  const auto& payload = ex.gold.payload;
  if (ex.gold.kind == "passage_index" && !payload.is_number_unsigned())
    return fail("passage_index payload must be a non-negative integer");
  if (ex.gold.kind == "sentence_set" &&
      !(payload.is_array() && std::all_of(payload.begin(), payload.end(), [](const auto& v) { return v.is_number_unsigned(); })))
    return fail("sentence_set payload must be an array of non-negative integers");
  if (ex.gold.kind == "answer_span" &&
      !(payload.is_array() && payload.size() == 2 && payload[0].is_number_unsigned() && payload[1].is_number_unsigned()))
    return fail("answer_span payload must be [byte_start, byte_end]");
  if (j.contains("targets")) {
    const auto& t = j["targets"];
    if (!t.is_array() || !std::all_of(t.begin(), t.end(), [](const auto& v) { return v.is_number_unsigned(); }))
      return fail("\"targets\" must be an array of non-negative integers");
    ex.targets = t.get<std::vector<std::size_t>>();
  }
  return ex;
}

}  // namespace detail

inline std::vector<EvalExample> parse_jsonl(std::istream& in) {
  std::vector<EvalExample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(number, e.what());
    }
    out.push_back(detail::example_from_json(j, number));
  }
  return out;
}

inline std::vector<EvalExample> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_jsonl(in);
}

inline std::string to_jsonl(const std::vector<EvalExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json(ex).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Key-value retrieval benchmark

inline std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// n_pairs distinct random keys and values as "key: value" lines; the query asks for one key and
/// the response is its value. Everything derives from SplitMix64(seed).
inline EvalExample gen_kv(std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs < 2) throw InvalidArgument("gen_kv needs at least 2 pairs");
  SplitMix64 rng(seed);
  std::unordered_set<std::string> seen;
  const auto draw = [&](std::vector<std::string>& into) {
    while (into.size() < n_pairs) {
      auto s = hex16(rng.next());
      if (seen.insert(s).second) into.push_back(std::move(s));
    }
  };
  std::vector<std::string> keys, values;
  draw(keys);
  draw(values);
  const std::size_t gold = static_cast<std::size_t>(rng.next() % n_pairs);

  std::string context;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    if (i) context += '\n';
    context += keys[i] + ": " + values[i];
  }
  EvalExample ex;
  ex.id = "kv-" + std::to_string(seed);
  ex.query = "What is the value of key " + keys[gold] + "?";
  ex.context = std::move(context);
  ex.response = values[gold];
  ex.gold = {"sentence_set", nlohmann::json::array({gold})};
  return ex;
}

// ---------------------------------------------------------------------------------------------
// Metrics

struct MetricsAtK {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double metric_accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& gold) {
  if (predictions.size() != gold.size())
    throw InvalidArgument("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold labels");
  if (predictions.empty()) throw InsufficientData("accuracy of zero examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i];
  return double(hits) / double(gold.size());
}

inline MetricsAtK metric_pr_at_k(const std::vector<std::size_t>& predicted_topk, const std::set<std::size_t>& gold_set,
                                 std::size_t k) {
  if (gold_set.empty()) throw InsufficientData("empty gold set");
  if (k == 0) throw InvalidArgument("k must be positive");
  if (predicted_topk.size() > k) throw InvalidArgument("more than k predictions");
  const std::set<std::size_t> predicted(predicted_topk.begin(), predicted_topk.end());
  std::size_t matches = 0;
  for (const auto p : predicted) matches += gold_set.contains(p);
  MetricsAtK m;
  m.k = k;
  m.precision = double(matches) / double(k);
  m.recall = double(matches) / double(gold_set.size());
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------------------------
// Running examples

/// Tokenized context plus the spans sources are ranked over: passages for list contexts,
/// sentences otherwise.
struct PreparedContext {
  TokenSeq tokens;
  std::vector<SpanScore> spans;
};

inline PreparedContext prepare_context(const EvalExample& ex) {
  PreparedContext pc;
  if (const auto* text = std::get_if<std::string>(&ex.context)) {
    pc.tokens = tokenize(*text);
    pc.spans = sentence_spans(pc.tokens);
    return pc;
  }
  const auto& passages = std::get<std::vector<std::string>>(ex.context);
  std::string joined;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t p = 0; p < passages.size(); ++p) {
    if (p) joined += '\n';
    ranges.emplace_back(joined.size(), joined.size() + passages[p].size());
    joined += passages[p];
  }
  pc.tokens = tokenize(joined);
  for (std::size_t p = 0; p < ranges.size(); ++p) {
    SpanScore s;
    s.kind = SpanKind::passage;
    s.index = p;
    for (std::size_t t = 0; t < pc.tokens.size(); ++t)
      if (pc.tokens[t].byte_start >= ranges[p].first && pc.tokens[t].byte_end <= ranges[p].second)
        s.positions.push_back(static_cast<std::uint32_t>(t));
    if (!s.positions.empty()) pc.spans.push_back(std::move(s));
  }
  return pc;
}

/// Gold span indices in the space of prepare_context's spans.
inline std::set<std::size_t> gold_spans(const EvalExample& ex, const PreparedContext& pc) {
  std::set<std::size_t> gold;
  if (ex.gold.kind == "passage_index") {
    gold.insert(ex.gold.payload.get<std::size_t>());
  } else if (ex.gold.kind == "sentence_set") {
    for (const auto& v : ex.gold.payload) gold.insert(v.get<std::size_t>());
  } else {
    const auto begin = ex.gold.payload[0].get<std::size_t>();
    const auto end = ex.gold.payload[1].get<std::size_t>();
    for (const auto& span : pc.spans)
      for (const auto pos : span.positions)
        if (pc.tokens[pos].byte_start < end && pc.tokens[pos].byte_end > begin) {
          gold.insert(span.index);
          break;
        }
  }
  return gold;
}

struct ExampleOutcome {
  std::string id;
  std::vector<SpanScore> ranked;
  std::set<std::size_t> gold;
  std::optional<std::size_t> top1;
  MetricsAtK at_k;
  AttributionMatrix matrix;
};

inline ExampleOutcome evaluate_example(const EvalExample& ex, const EmbeddingProvider& provider,
                                       const AttributionParams& params, std::size_t top_k) {
  auto pc = prepare_context(ex);
  if (pc.tokens.empty()) throw InvalidArgument("example " + ex.id + " has an empty context");
  const auto store = build_datastore(pc.tokens, provider);
  AttributionQuery aq{ex.query, pc.tokens, tokenize(ex.response), ex.targets};
  ExampleOutcome out;
  out.id = ex.id;
  out.matrix = attribute_response(store, provider, aq, params);
  out.ranked = rank_sources(out.matrix, pc.spans, static_cast<int>(top_k));
  out.gold = gold_spans(ex, pc);
  if (!out.ranked.empty()) out.top1 = out.ranked.front().index;
  std::vector<std::size_t> predicted;
  for (const auto& s : out.ranked) predicted.push_back(s.index);
  if (!out.gold.empty()) out.at_k = metric_pr_at_k(predicted, out.gold, top_k);
  return out;
}

struct EvalSummary {
  std::size_t examples = 0;
  std::size_t single_gold = 0;  // examples scored by accuracy
  double accuracy = 0.0;
  MetricsAtK mean_at_k;
  std::vector<ExampleOutcome> outcomes;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["examples"] = examples;
    j["accuracy_examples"] = single_gold;
    j["accuracy"] = accuracy;
    j["k"] = mean_at_k.k;
    j["precision_at_k"] = mean_at_k.precision;
    j["recall_at_k"] = mean_at_k.recall;
    j["f1_at_k"] = mean_at_k.f1;
    return j;
  }
};

/// Accuracy of the top-1 span over single-gold examples; precision/recall/F1 at top_k averaged over
/// all examples. Examples are independent and may run on `threads` workers.
inline EvalSummary evaluate(const std::vector<EvalExample>& examples, const EmbeddingProvider& provider,
                            const AttributionParams& params, std::size_t top_k = 1, unsigned threads = 1) {
  if (examples.empty()) throw InsufficientData("no examples to evaluate");
  EvalSummary summary;
  summary.examples = examples.size();
  summary.outcomes.resize(examples.size());
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(examples.size())));
  const auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < examples.size(); i += workers)
      summary.outcomes[i] = evaluate_example(examples[i], provider, params, top_k);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w));
    for (auto& j : jobs) j.get();
  }

  std::vector<std::size_t> predictions, gold;
  summary.mean_at_k.k = top_k;
  std::size_t with_gold = 0;
  for (const auto& o : summary.outcomes) {
    if (o.gold.size() == 1) {
      predictions.push_back(o.top1.value_or(SIZE_MAX));
      gold.push_back(*o.gold.begin());
    }
    if (!o.gold.empty()) {
      ++with_gold;
      summary.mean_at_k.precision += o.at_k.precision;
      summary.mean_at_k.recall += o.at_k.recall;
      summary.mean_at_k.f1 += o.at_k.f1;
    }
  }
  summary.single_gold = gold.size();
  if (!gold.empty()) summary.accuracy = metric_accuracy(predictions, gold);
  if (with_gold) {
    summary.mean_at_k.precision /= double(with_gold);
    summary.mean_at_k.recall /= double(with_gold);
    summary.mean_at_k.f1 /= double(with_gold);
  }
  return summary;
}

}  // namespace tokshap
