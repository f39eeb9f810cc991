#pragma once

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "tokshap/datastore.hpp"
#include "tokshap/hash.hpp"
#include "tokshap/knn.hpp"

namespace testutil {

inline std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tokshap_test_" + std::to_string(::getpid()) + "_" + name);
}

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline tokshap::Datastore random_store(std::uint64_t seed, std::size_t n, std::uint32_t dim) {
  tokshap::SplitMix64 rng(seed);
  tokshap::Datastore s;
  s.dim = dim;
  s.normalized = rng.next() & 1;
  s.provider_id = "test:" + std::to_string(seed);
  s.build_params = tokshap::default_build_params(s.normalized);
  for (std::size_t i = 0; i < n; ++i) {
    tokshap::DatastoreEntry e;
    for (std::uint32_t d = 0; d < dim; ++d) e.key.push_back(float(rng.uniform() * 2.0 - 1.0));
    e.value_token = "tok" + std::to_string(rng.next() % 5);
    e.position = std::uint32_t(i);
    e.sentence_id = std::uint32_t(i / 4);
    s.entries.push_back(std::move(e));
  }
  return s;
}

/// Candidates in rank order with the given weights and labels.
inline tokshap::CandidateSet make_set(const std::vector<double>& weights, const std::vector<bool>& match) {
  tokshap::CandidateSet set;
  set.target_token = "t";
  set.total = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    tokshap::Candidate c;
    c.entry_index = i;
    c.position = std::uint32_t(i);
    c.rank = std::uint32_t(i + 1);
    c.weight = weights[i];
    c.sq_dist = -std::log(weights[i]);
    c.label_match = match[i];
    c.signed_weight = match[i] ? weights[i] : -weights[i];
    set.candidates.push_back(c);
  }
  return set;
}

/// Random candidate set: weights non-increasing in rank, random labels.
inline tokshap::CandidateSet random_set(tokshap::SplitMix64& rng, std::size_t n) {
  std::vector<double> w(n);
  std::vector<bool> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.01 + 0.99 * rng.uniform();
    m[i] = rng.next() & 1;
  }
  std::sort(w.begin(), w.end(), std::greater<>());
  return make_set(w, m);
}

}  // namespace testutil
