#pragma once

#include <cstdint>
#include <vector>

#include "binsim/random_source.hpp"

namespace binsim {

// counts[k] = number of bins holding exactly k balls. Invariants:
// sum(counts) == bins, sum(k * counts[k]) == balls, and the last entry of a
// public result is nonzero unless the vector is the m = 0 singleton [n].
struct CardinalityVector {
  std::uint64_t bins = 0;
  std::uint64_t balls = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t max_load() const {
    return counts.empty() ? 0 : static_cast<std::uint64_t>(counts.size()) - 1;
  }
  void trim() {
    while (counts.size() > 1 && counts.back() == 0) counts.pop_back();
  }
  bool consistent() const;
};

// z[x][y] = number of bins sampled x times by the first experiment and y times
// by the second; row sums give the first cardinality vector, column sums the second.
struct JointCardinalityMatrix {
  std::uint64_t bins = 0;
  std::vector<std::vector<std::uint64_t>> z;
};

// Per-call instrumentation for generate_bin_cardinalities.
struct GenerateStats {
  std::uint64_t naive_balls = 0;   // balls placed one at a time (base case + Cases A/B)
  std::uint64_t case_a_total = 0;  // Case A entries across all recursion levels
  std::uint64_t case_b_total = 0;
  bool top_case_a = false;  // which branch the outermost call took
  bool top_case_b = false;
  int max_depth = 0;  // deepest recursion level reached (top level = 0)
};

// Reference sampler: throws m balls into n bins with a full per-bin array,
// Theta(n + m) time and Theta(n) space. The oracle the fast path is tested against.
CardinalityVector naive_cardinalities(std::uint64_t n, std::uint64_t m, RandomSource& rng);

// Lazily truncated multinomial over Poisson(lambda/n) occupancy probabilities:
// counts ~ cardinalities of n independent Poisson(lambda/n) bins, so the
// realized ball total (returned in .balls) is marginally Poisson(lambda).
CardinalityVector poissonized_cardinalities(std::uint64_t n, double lambda,
                                            RandomSource& rng);

// Admissible truncation depth 10 ln n / ln((4n/m) ln n); domain n >= 3 and
// n <= m <= n ln n, errors outside it.
double default_kstar(std::uint64_t n, std::uint64_t m);

// default_kstar where valid, its positive-log extension where computable, and
// max(1, 10 ln n) otherwise; always >= 1. The CLI/test-grid fallback policy.
double heuristic_kstar(std::uint64_t n, std::uint64_t m);

// Fast sampler for the cardinality vector of m uniform balls in n bins.
// Exact for every m >= 0, kstar >= 1; expected polylog time for m <= kstar*n-ish
// workloads via Poissonization, one-ball corrections, and recursion.
CardinalityVector generate_bin_cardinalities(std::uint64_t n, std::uint64_t m,
                                             double kstar, RandomSource& rng,
                                             GenerateStats* stats = nullptr);

// One uniform ball added to / removed from a cardinality vector, in place.
// Adding picks class i with probability counts[i]/n; removing picks class i
// with probability i*counts[i]/m and errors when no balls remain.
void add_one_ball(CardinalityVector& x, RandomSource& rng);
void remove_one_ball(CardinalityVector& x, RandomSource& rng);

// Joint per-bin contingency of two independent sampling experiments over the
// same n bins, given only their cardinality vectors. Row and column marginals
// are reproduced exactly.
JointCardinalityMatrix combine_cardinalities(const CardinalityVector& x,
                                             const CardinalityVector& y,
                                             RandomSource& rng);

// Cardinality vector of the union experiment: W[k] = sum over x+y=k of z[x][y].
CardinalityVector combine_and_sum(const CardinalityVector& x, const CardinalityVector& y,
                                  RandomSource& rng);

}  // namespace binsim
