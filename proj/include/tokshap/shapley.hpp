#pragma once

// Exact Shapley values of the candidates of one weighted-KNN game.
//
// Players are the candidates of a CandidateSet in rank order. The utility of a subset S is 1 when
// the weighted vote of its min(K, |S|) nearest members favours the target token (matching weight
// >= non-matching weight), so the empty set has utility 1. Three routes are provided:
//   shapley_k1          K = 1, O(N^2), independent of the weights
//   shapley_dp          any K, O(N^2) in N over weights discretized to 2^bits levels
//   shapley_bruteforce  enumeration of every subset, N <= 20; the reference for the other two

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tokshap/error.hpp"
#include "tokshap/knn.hpp"

namespace tokshap {

enum class ShapleyMethod { k1_exact, dp, brute_force };

inline const char* to_string(ShapleyMethod m) {
  switch (m) {
    case ShapleyMethod::k1_exact: return "k1-exact";
    case ShapleyMethod::dp: return "dp";
    case ShapleyMethod::brute_force: return "brute-force";
  }
  return "?";
}

struct ShapleyResult {
  std::vector<double> phi;                // indexed like CandidateSet::candidates
  std::vector<std::size_t> entry_index;   // datastore entry of each value
  std::size_t k = 1;
  ShapleyMethod method = ShapleyMethod::k1_exact;
  double efficiency_gap = 0.0;            // sum(phi) - (v(all) - v(empty))
};

/// G[i][l]: number of size-l subsets of the other players for which adding player i flips the
/// utility (0 -> 1 for a matching player, 1 -> 0 otherwise).
struct GCountTable {
  std::vector<std::vector<double>> g;
};

inline constexpr int kDefaultWeightBits = 10;
inline constexpr std::size_t kBruteForceLimit = 20;

// ---------------------------------------------------------------------------------------------
// Binomial helpers

/// C(n, k) by cumulative ratios.
inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t t = 0; t < k; ++t) c = c * double(n - t) / double(t + 1);
  return c;
}

/// 1 / C(n, k) without forming C(n, k).
inline double inverse_binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t t = 0; t < k; ++t) r = r * double(t + 1) / double(n - t);
  return r;
}

namespace detail {

/// For every 1-based rank j: sum over m of C(n - j, m) / C(n - 1, m + k).
///
/// A subset whose k-th nearest member sits at rank j and which has m members behind j contributes
/// 1 / C(n - 1, k + m) to the Shapley sum; this folds all m at once.
inline std::vector<double> tail_factors(std::size_t n, std::size_t k) {
  std::vector<double> f(n + 1, 0.0);
  if (n == 0 || k > n - 1) return f;
  const std::size_t top = n - 1;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t behind = n - j;
    double term = inverse_binomial(top, k);
    double sum = term;
    for (std::size_t m = 0; m + 1 <= behind && m + 1 + k <= top; ++m) {
      term = term * (double(behind - m) / double(m + 1)) * (double(m + k + 1) / double(top - m - k));
      sum += term;
    }
    f[j] = sum;
  }
  return f;
}

inline std::vector<Candidate> by_rank(std::span<const Candidate> subset) {
  std::vector<Candidate> s(subset.begin(), subset.end());
  std::sort(s.begin(), s.end(), [](const Candidate& a, const Candidate& b) { return a.rank < b.rank; });
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Utility and marginal contribution

/// Vote of the min(K, |S|) nearest members of `subset`; 1 when the matching weight is at least the
/// non-matching weight (so the empty set scores 1).
inline int utility_v(std::span<const Candidate> subset, std::size_t k) {
  const auto s = detail::by_rank(subset);
  double agree = 0.0, disagree = 0.0;
  for (std::size_t j = 0; j < std::min(k, s.size()); ++j)
    (s[j].label_match ? agree : disagree) += s[j].weight;
  return agree >= disagree ? 1 : 0;
}

inline int marginal_contribution(std::span<const Candidate> subset, const Candidate& zi, std::size_t k) {
  std::vector<Candidate> with(subset.begin(), subset.end());
  with.push_back(zi);
  return utility_v(with, k) - utility_v(subset, k);
}

/// zi is among the K nearest of subset + {zi}.
inline bool cond_knn(std::span<const Candidate> subset, const Candidate& zi, std::size_t k) {
  const auto nearer = std::count_if(subset.begin(), subset.end(),
                                    [&](const Candidate& c) { return c.rank < zi.rank; });
  return static_cast<std::size_t>(nearer) + 1 <= k;
}

namespace detail {

/// Signed vote of the nearest (K - 1) members when |S| >= K, else of all of S; and the signed
/// weight of the K-th member (0 when |S| < K).
struct VoteSplit {
  double head = 0.0;
  double kth = 0.0;
  bool full = false;
};

inline VoteSplit split_vote(std::span<const Candidate> subset, std::size_t k) {
  const auto s = by_rank(subset);
  VoteSplit v;
  v.full = s.size() >= k;
  const std::size_t head = v.full ? k - 1 : s.size();
  for (std::size_t j = 0; j < head; ++j) v.head += s[j].signed_weight;
  if (v.full) v.kth = s[k - 1].signed_weight;
  return v;
}

}  // namespace detail

/// Adding a matching zi turns the vote from wrong to right.
inline bool cond_zero_to_one(std::span<const Candidate> subset, const Candidate& zi, std::size_t k) {
  const auto v = detail::split_vote(subset, k);
  if (!v.full) return v.head >= -zi.weight && v.head < 0.0;
  return v.head >= -zi.weight && v.head < -v.kth;
}

/// Adding a non-matching zi turns the vote from right to wrong.
inline bool cond_one_to_zero(std::span<const Candidate> subset, const Candidate& zi, std::size_t k) {
  const auto v = detail::split_vote(subset, k);
  if (!v.full) return v.head >= 0.0 && v.head < zi.weight;
  return v.head >= -v.kth && v.head < zi.weight;
}

/// The marginal contribution from the case split on Cond_KNN and the two flip conditions.
inline int marginal_closed_form(std::span<const Candidate> subset, const Candidate& zi, std::size_t k) {
  if (!cond_knn(subset, zi, k)) return 0;
  if (zi.label_match) return cond_zero_to_one(subset, zi, k) ? 1 : 0;
  return cond_one_to_zero(subset, zi, k) ? -1 : 0;
}

// ---------------------------------------------------------------------------------------------
// Brute force

namespace detail {

inline double efficiency_gap(const std::vector<double>& phi, int v_all) {
  double sum = 0.0;
  for (const double p : phi) sum += p;
  return sum - double(v_all - 1);
}

inline ShapleyResult make_result(const CandidateSet& cands, std::size_t k, ShapleyMethod method) {
  ShapleyResult r;
  r.k = k;
  r.method = method;
  r.phi.assign(cands.size(), 0.0);
  r.entry_index.reserve(cands.size());
  for (const auto& c : cands.candidates) r.entry_index.push_back(c.entry_index);
  return r;
}

/// Utility of every subset of `cands`, indexed by bitmask over rank order.
inline std::vector<std::uint8_t> utility_table(const CandidateSet& cands, std::size_t k) {
  const std::size_t n = cands.size();
  std::vector<std::uint8_t> v(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < v.size(); ++mask) {
    double agree = 0.0, disagree = 0.0;
    std::size_t taken = 0;
    for (std::size_t j = 0; j < n && taken < k; ++j) {
      if (!((mask >> j) & 1U)) continue;
      (cands[j].label_match ? agree : disagree) += cands[j].weight;
      ++taken;
    }
    v[mask] = agree >= disagree ? 1 : 0;
  }
  return v;
}

}  // namespace detail

/// Definition-level Shapley values by enumerating all 2^(N-1) coalitions of every player.
inline ShapleyResult shapley_bruteforce(const CandidateSet& cands, std::size_t k) {
  if (k == 0) throw InvalidArgument("K must be positive");
  const std::size_t n = cands.size();
  if (n > kBruteForceLimit)
    throw TooLarge("brute-force Shapley limited to " + std::to_string(kBruteForceLimit) +
                   " candidates, got " + std::to_string(n));
  auto result = detail::make_result(cands, k, ShapleyMethod::brute_force);
  if (n == 0) return result;

  const auto v = detail::utility_table(cands, k);
  for (std::size_t i = 0; i < n; ++i) {
    // Net marginal contribution summed per coalition size.
    std::vector<std::int64_t> net(n, 0);
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < v.size(); ++mask) {
      if (mask & bit) continue;
      net[static_cast<std::size_t>(std::popcount(mask))] += int(v[mask | bit]) - int(v[mask]);
    }
    double acc = 0.0;
    for (std::size_t l = 0; l < n; ++l) acc += double(net[l]) * inverse_binomial(n - 1, l);
    result.phi[i] = acc / double(n);
  }
  result.efficiency_gap = detail::efficiency_gap(result.phi, v.back());
  return result;
}

// ---------------------------------------------------------------------------------------------
// K = 1

/// Exact K = 1 values. A matching player at rank r gains 1 exactly when the nearest member of S is
/// a non-matching player behind r; a non-matching player loses 1 when S is empty or its nearest
/// member is a matching player behind r. Grouping coalitions by that nearest member j gives
/// phi_r = sign / N * ([non-matching] + sum over opposite-label j > r of tail(j)).
inline ShapleyResult shapley_k1(const CandidateSet& cands) {
  const std::size_t n = cands.size();
  auto result = detail::make_result(cands, 1, ShapleyMethod::k1_exact);
  if (n == 0) return result;
  const auto tail = detail::tail_factors(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    const bool match = cands[r].label_match;
    double acc = match ? 0.0 : 1.0;
    for (std::size_t j = r + 1; j < n; ++j)
      if (cands[j].label_match != match) acc += tail[j + 1];
    result.phi[r] = (match ? 1.0 : -1.0) * (acc / double(n));
  }
  result.efficiency_gap = detail::efficiency_gap(result.phi, cands[0].label_match ? 1 : 0);
  return result;
}

// ---------------------------------------------------------------------------------------------
// General K over discretized weights

/// Rounds |w| / max|w| to one of 2^bits levels (never below one level) and stores the level as an
/// exact dyadic weight in (0, 1].
inline CandidateSet discretize(const CandidateSet& cands, int weight_bits) {
  if (weight_bits < 4 || weight_bits > 16) throw InvalidArgument("weight_bits must be in [4, 16]");
  const double levels = std::ldexp(1.0, weight_bits);
  double wmax = 0.0;
  for (const auto& c : cands.candidates) wmax = std::max(wmax, c.weight);
  CandidateSet out = cands;
  for (auto& c : out.candidates) {
    double q = wmax > 0.0 ? std::round(c.weight / wmax * levels) : levels;
    q = std::clamp(q, 1.0, levels);
    c.weight = std::ldexp(q, -weight_bits);
    c.signed_weight = c.label_match ? c.weight : -c.weight;
  }
  return out;
}

namespace detail {

/// Flip counts of one player under the DP: per coalition size below K, and per rank of the K-th
/// nearest coalition member for larger coalitions.
struct FlipCounts {
  std::vector<double> small;  // [l] for l < min(K, N)
  std::vector<double> by_kth;  // [rank index of K-th member], zero for ranks <= player
};

inline FlipCounts count_flips(const std::vector<std::int64_t>& level, const std::vector<bool>& match,
                              std::size_t k, std::int64_t levels, std::size_t player) {
  const std::size_t n = level.size();
  const std::int64_t offset = std::int64_t(k - 1) * levels;
  const std::size_t width = static_cast<std::size_t>(2 * offset + 1);
  // table[s][a + offset]: coalitions of size s among the players seen so far with vote sum a.
  std::vector<std::vector<double>> table(k, std::vector<double>(width, 0.0));
  table[0][static_cast<std::size_t>(offset)] = 1.0;

  const std::int64_t qi = level[player] < 0 ? -level[player] : level[player];
  const bool mi = match[player];
  const auto count_in = [&](const std::vector<double>& row, std::int64_t lo, std::int64_t hi) {
    lo = std::max(lo, -offset);
    hi = std::min(hi, offset);
    double total = 0.0;
    for (std::int64_t a = lo; a <= hi; ++a) total += row[static_cast<std::size_t>(a + offset)];
    return total;
  };

  FlipCounts out;
  out.by_kth.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (j > player) {
      // j is the K-th nearest member; the K - 1 nearer members are drawn from ranks before j.
      const std::int64_t wk = level[j];
      out.by_kth[j] = mi ? count_in(table[k - 1], -qi, -wk - 1) : count_in(table[k - 1], -wk, qi - 1);
    }
    if (j == player) continue;
    for (std::size_t s = k - 1; s >= 1; --s) {
      auto& dst = table[s];
      const auto& src = table[s - 1];
      const std::int64_t w = level[j];
      for (std::int64_t a = -offset; a <= offset; ++a) {
        const std::int64_t from = a - w;
        if (from < -offset || from > offset) continue;
        dst[static_cast<std::size_t>(a + offset)] += src[static_cast<std::size_t>(from + offset)];
      }
    }
  }
  for (std::size_t l = 0; l < std::min(k, n); ++l)
    out.small.push_back(mi ? count_in(table[l], -qi, -1) : count_in(table[l], 0, qi - 1));
  return out;
}

struct Levels {
  std::vector<std::int64_t> signed_level;
  std::vector<bool> match;
  std::int64_t levels = 0;
};

inline Levels to_levels(const CandidateSet& discretized, int weight_bits) {
  Levels l;
  l.levels = std::int64_t{1} << weight_bits;
  for (const auto& c : discretized.candidates) {
    const auto q = static_cast<std::int64_t>(std::ldexp(c.weight, weight_bits));
    l.signed_level.push_back(c.label_match ? q : -q);
    l.match.push_back(c.label_match);
  }
  return l;
}

inline int utility_of_all(const CandidateSet& cands, std::size_t k) {
  return utility_v(cands.candidates, k);
}

}  // namespace detail

/// Exact Shapley values of the game played on discretize(cands, weight_bits).
inline ShapleyResult shapley_dp(const CandidateSet& cands, std::size_t k, int weight_bits = kDefaultWeightBits) {
  if (k == 0) throw InvalidArgument("K must be positive");
  const auto disc = discretize(cands, weight_bits);
  const std::size_t n = disc.size();
  auto result = detail::make_result(cands, k, ShapleyMethod::dp);
  if (n == 0) return result;

  const auto lv = detail::to_levels(disc, weight_bits);
  const auto tail = detail::tail_factors(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto flips = detail::count_flips(lv.signed_level, lv.match, k, lv.levels, i);
    double acc = 0.0;
    for (std::size_t l = 0; l < flips.small.size(); ++l) acc += flips.small[l] * inverse_binomial(n - 1, l);
    for (std::size_t j = i + 1; j < n; ++j) acc += flips.by_kth[j] * tail[j + 1];
    result.phi[i] = (lv.match[i] ? 1.0 : -1.0) * (acc / double(n));
  }
  result.efficiency_gap = detail::efficiency_gap(result.phi, detail::utility_of_all(disc, k));
  return result;
}

/// Flip counts per coalition size, from the same DP as shapley_dp.
inline GCountTable g_count_table(const CandidateSet& cands, std::size_t k, int weight_bits = kDefaultWeightBits) {
  if (k == 0) throw InvalidArgument("K must be positive");
  const auto disc = discretize(cands, weight_bits);
  const std::size_t n = disc.size();
  const auto lv = detail::to_levels(disc, weight_bits);
  GCountTable table;
  table.g.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto flips = detail::count_flips(lv.signed_level, lv.match, k, lv.levels, i);
    for (std::size_t l = 0; l < flips.small.size(); ++l) table.g[i][l] += flips.small[l];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (flips.by_kth[j] == 0.0) continue;
      const std::size_t behind = n - (j + 1);
      for (std::size_t m = 0; m <= behind && k + m < n; ++m)
        table.g[i][k + m] += flips.by_kth[j] * binomial(behind, m);
    }
  }
  return table;
}

/// phi_i = sign_i / N * sum_l G[i][l] / C(N - 1, l).
inline std::vector<double> shapley_from_counts(const GCountTable& table, const CandidateSet& cands) {
  const std::size_t n = cands.size();
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t l = 0; l < n; ++l) acc += table.g[i][l] / binomial(n - 1, l);
    phi[i] = (cands[i].label_match ? 1.0 : -1.0) * acc / double(n);
  }
  return phi;
}

/// K = 1 uses the closed form; larger K the discretized DP.
inline ShapleyResult shapley(const CandidateSet& cands, std::size_t k, int weight_bits = kDefaultWeightBits) {
  return k == 1 ? shapley_k1(cands) : shapley_dp(cands, k, weight_bits);
}

}  // namespace tokshap
