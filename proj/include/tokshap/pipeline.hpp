#pragma once

// Response-token attribution: feature construction, retrieval, Shapley scoring and span
// accumulation.

#include <algorithm>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tokshap/datastore.hpp"
#include "tokshap/embedding.hpp"
#include "tokshap/error.hpp"
#include "tokshap/knn.hpp"
#include "tokshap/shapley.hpp"
#include "tokshap/text.hpp"

namespace tokshap {

struct AttributionParams {
  std::size_t k = 1;
  std::size_t m = 10;
  double gamma = 1.0;
  int weight_bits = kDefaultWeightBits;
};

struct AttributionQuery {
  std::string query_text;
  TokenSeq context;
  TokenSeq response;
  std::optional<std::vector<std::size_t>> target_indices;  // 0-based response tokens; unset means all

  /// Sorted, de-duplicated target_indices, or every response index when unset.
  std::vector<std::size_t> targets() const {
    if (!target_indices) {
      std::vector<std::size_t> all(response.size());
      for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
      return all;
    }
    std::vector<std::size_t> out(*target_indices);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (!out.empty() && out.back() >= response.size())
      throw InvalidArgument("target index " + std::to_string(out.back()) + " out of bounds (response has " +
                            std::to_string(response.size()) + " tokens)");
    return out;
  }
};

/// phi(context position, response index); pairs that were never candidates are absent (zero).
struct AttributionMatrix {
  std::map<std::pair<std::uint32_t, std::size_t>, double> phi;
  std::vector<std::size_t> targets;
  AttributionParams params;
  std::string provider_id;

  double at(std::uint32_t position, std::size_t t) const {
    const auto it = phi.find({position, t});
    return it == phi.end() ? 0.0 : it->second;
  }

  bool operator==(const AttributionMatrix& o) const {
    return phi == o.phi && targets == o.targets && provider_id == o.provider_id;
  }
};

/// Query text followed by the response tokens before `t`, joined by a single space.
inline std::string build_feature(std::string_view query, const TokenSeq& response, std::size_t t) {
  if (t >= response.size())
    throw InvalidArgument("response index " + std::to_string(t) + " out of bounds (size " +
                          std::to_string(response.size()) + ")");
  std::string feature(query);
  if (t > 0) {
    feature += ' ';
    feature += render(std::span<const Token>(response.tokens).first(t));
  }
  return feature;
}

struct TokenAttribution {
  CandidateSet candidates;
  ShapleyResult shapley;
  std::map<std::uint32_t, double> phi_by_position;
};

namespace detail {

inline TokenAttribution score_token(const Datastore& store, const Vector& query_vector,
                                    std::string_view label, const AttributionParams& p) {
  TokenAttribution out;
  out.candidates = query_top_m(store, query_vector, p.m, p.gamma, label);
  out.shapley = shapley(out.candidates, p.k, p.weight_bits);
  for (std::size_t r = 0; r < out.candidates.size(); ++r)
    out.phi_by_position[out.candidates[r].position] = out.shapley.phi[r];
  return out;
}

inline void check_params(const Datastore& store, const EmbeddingProvider& provider,
                         const AttributionParams& p) {
  if (p.k == 0 || p.m == 0) throw InvalidArgument("K and M must be positive");
  if (p.k > p.m) throw InvalidArgument("K must not exceed M");
  if (!(p.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (provider.dim() != store.dim)
    throw DimensionMismatch("provider dim " + std::to_string(provider.dim()) + " differs from store dim " +
                            std::to_string(store.dim));
}

}  // namespace detail

inline TokenAttribution attribute_token(const Datastore& store, const EmbeddingProvider& provider,
                                        const AttributionQuery& aq, std::size_t t,
                                        const AttributionParams& params = {}) {
  detail::check_params(store, provider, params);
  const std::vector<std::string> feature{build_feature(aq.query_text, aq.response, t)};
  const auto vectors = provider.embed_batch(feature);
  return detail::score_token(store, vectors.at(0), aq.response[t].surface, params);
}

/// Attributes every target token. `threads` > 1 scores tokens concurrently; the result does not
/// depend on it.
inline AttributionMatrix attribute_response(const Datastore& store, const EmbeddingProvider& provider,
                                            const AttributionQuery& aq, const AttributionParams& params = {},
                                            unsigned threads = 1) {
  detail::check_params(store, provider, params);
  AttributionMatrix matrix;
  matrix.params = params;
  matrix.provider_id = provider.provider_id();
  matrix.targets = aq.targets();
  if (matrix.targets.empty()) return matrix;

  std::vector<std::string> features;
  features.reserve(matrix.targets.size());
  for (const auto t : matrix.targets) features.push_back(build_feature(aq.query_text, aq.response, t));
  const auto vectors = provider.embed_batch(features);
  if (vectors.size() != features.size()) throw ProviderError("provider returned wrong number of vectors");

  std::vector<std::map<std::uint32_t, double>> per_target(matrix.targets.size());
  const auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t n = first; n < matrix.targets.size(); n += stride)
      per_target[n] = detail::score_token(store, vectors[n], aq.response[matrix.targets[n]].surface, params)
                          .phi_by_position;
  };
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(matrix.targets.size())));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w, workers));
    for (auto& j : jobs) j.get();
  }
  for (std::size_t n = 0; n < matrix.targets.size(); ++n)
    for (const auto& [pos, value] : per_target[n]) matrix.phi[{pos, matrix.targets[n]}] += value;
  return matrix;
}

/// Sum of phi over span positions x target tokens, in ascending (position, target) order.
inline double accumulate(const AttributionMatrix& matrix, const std::set<std::uint32_t>& span_positions,
                         const std::set<std::size_t>& target_set) {
  double total = 0.0;
  for (const auto& [key, value] : matrix.phi)
    if (span_positions.contains(key.first) && target_set.contains(key.second)) total += value;
  return total;
}

// ---------------------------------------------------------------------------------------------
// Spans

enum class SpanKind { sentence, passage, custom };

inline const char* to_string(SpanKind k) {
  switch (k) {
    case SpanKind::sentence: return "sentence";
    case SpanKind::passage: return "passage";
    case SpanKind::custom: return "custom";
  }
  return "?";
}

struct SpanScore {
  SpanKind kind = SpanKind::sentence;
  std::size_t index = 0;                  // sentence or passage number
  std::vector<std::uint32_t> positions;   // ascending context positions
  double score = 0.0;
  std::map<std::size_t, double> per_target;
  std::size_t rank = 0;                   // 1-based, set by rank_sources

  std::uint32_t start() const { return positions.empty() ? 0 : positions.front(); }
  std::uint32_t end() const { return positions.empty() ? 0 : positions.back() + 1; }
};

/// One span per sentence id.
inline std::vector<SpanScore> sentence_spans(const TokenSeq& context) {
  std::vector<SpanScore> spans;
  for (std::size_t t = 0; t < context.size(); ++t) {
    const auto sid = context[t].sentence_id;
    if (spans.empty() || spans.back().index != sid) {
      SpanScore s;
      s.kind = SpanKind::sentence;
      s.index = sid;
      spans.push_back(std::move(s));
    }
    spans.back().positions.push_back(static_cast<std::uint32_t>(t));
  }
  return spans;
}

/// Sentence spans recovered from the positions and sentence ids stored in a datastore.
inline std::vector<SpanScore> sentence_spans(const Datastore& store) {
  std::map<std::uint32_t, SpanScore> by_id;
  for (const auto& e : store.entries) {
    auto& s = by_id[e.sentence_id];
    s.kind = SpanKind::sentence;
    s.index = e.sentence_id;
    s.positions.push_back(e.position);
  }
  std::vector<SpanScore> spans;
  for (auto& [id, s] : by_id) {
    std::sort(s.positions.begin(), s.positions.end());
    spans.push_back(std::move(s));
  }
  return spans;
}

/// Scores `spans` against the matrix targets and returns the best `k`, highest score first and
/// earliest start first among equal scores.
inline std::vector<SpanScore> rank_sources(const AttributionMatrix& matrix, std::vector<SpanScore> spans, int k) {
  if (k <= 0) throw InvalidArgument("k must be positive");
  for (auto& span : spans) {
    std::sort(span.positions.begin(), span.positions.end());
    const std::set<std::uint32_t> members(span.positions.begin(), span.positions.end());
    span.per_target.clear();
    for (const auto t : matrix.targets) span.per_target[t] = 0.0;
    for (const auto& [key, value] : matrix.phi)
      if (members.contains(key.first)) span.per_target[key.second] += value;
    span.score = 0.0;
    for (const auto& [t, value] : span.per_target) span.score += value;
  }
  std::stable_sort(spans.begin(), spans.end(), [](const SpanScore& a, const SpanScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.start() < b.start();
  });
  if (spans.size() > static_cast<std::size_t>(k)) spans.resize(static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < spans.size(); ++r) spans[r].rank = r + 1;
  return spans;
}

}  // namespace tokshap
