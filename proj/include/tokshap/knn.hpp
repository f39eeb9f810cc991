#pragma once

// RBF similarity, exact top-M retrieval and the signed-weight candidate set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tokshap/datastore.hpp"
#include "tokshap/error.hpp"
#include "tokshap/text.hpp"

namespace tokshap {

inline double squared_l2(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw DimensionMismatch("vector lengths differ: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    sum += d * d;
  }
  return sum;
}

/// exp(-gamma * |a - b|^2)
inline double rbf_similarity(std::span<const float> a, std::span<const float> b, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  return std::exp(-gamma * squared_l2(a, b));
}

struct Candidate {
  std::size_t entry_index = 0;
  std::uint32_t position = 0;
  std::uint32_t rank = 0;  // 1-based
  double sq_dist = 0.0;
  double weight = 0.0;
  bool label_match = false;
  double signed_weight = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// The players of one response token's Shapley game, in rank order.
struct CandidateSet {
  std::string target_token;
  Vector query_vector;
  double gamma = 1.0;
  std::vector<Candidate> candidates;
  std::size_t total = 0;  // datastore size

  std::size_t size() const noexcept { return candidates.size(); }
  const Candidate& operator[](std::size_t i) const { return candidates[i]; }

  bool operator==(const CandidateSet&) const = default;
};

/// Token labels match on exact surface equality after trimming surrounding whitespace.
inline bool labels_match(std::string_view a, std::string_view b) { return trim(a) == trim(b); }

/// Exact M nearest entries by squared L2 distance, ties broken by smaller context position.
inline CandidateSet query_top_m(const Datastore& store, std::span<const float> query, std::size_t m,
                                double gamma, std::string_view target_token) {
  if (store.empty()) throw InvalidArgument("query_top_m: empty datastore");
  if (m == 0) throw InvalidArgument("query_top_m: M must be positive");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (query.size() != store.dim)
    throw DimensionMismatch("query has length " + std::to_string(query.size()) + ", store dim is " +
                            std::to_string(store.dim));

  std::vector<double> dist(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) dist[i] = squared_l2(query, store.entries[i].key);

  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    if (store.entries[a].position != store.entries[b].position)
      return store.entries[a].position < store.entries[b].position;
    return a < b;
  };
  const std::size_t keep = std::min(m, store.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), before);

  CandidateSet set;
  set.target_token = std::string(target_token);
  set.query_vector.assign(query.begin(), query.end());
  set.gamma = gamma;
  set.total = store.size();
  set.candidates.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    const auto idx = order[r];
    const auto& e = store.entries[idx];
    Candidate c;
    c.entry_index = idx;
    c.position = e.position;
    c.rank = static_cast<std::uint32_t>(r + 1);
    c.sq_dist = dist[idx];
    c.weight = std::exp(-gamma * dist[idx]);
    c.label_match = labels_match(e.value_token, target_token);
    c.signed_weight = c.label_match ? c.weight : -c.weight;
    set.candidates.push_back(c);
  }
  return set;
}

}  // namespace tokshap
