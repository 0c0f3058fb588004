#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "binsim/cardinality.hpp"
#include "binsim/random_source.hpp"

namespace binsim {

// Aggregated bin population: classes maps load -> number of bins at that load.
// Zero-count classes are never stored, so iteration order is the sorted loads.
struct LoadState {
  std::uint64_t bins = 0;
  std::uint64_t balls = 0;
  std::map<std::uint64_t, std::uint64_t> classes;

  static LoadState empty(std::uint64_t n) { return {n, 0, {{0, n}}}; }
  std::uint64_t max_load() const;
  bool consistent() const;
};

LoadState load_state_from_cardinalities(const CardinalityVector& x);

// What a decision rule does at loads (l1, l2): place into the first sampled
// bin, the second, or flip a fresh fair bit.
enum class Decision { kFirst, kSecond, kRandom };

// Pure allocation rule evaluated on the two sampled loads. `rule` exposes the
// tri-state answer so batched application can tell deterministic entries from
// ties; `choose` resolves kRandom with the caller's generator.
struct DecisionFunction {
  std::string name;
  std::function<Decision(std::uint64_t, std::uint64_t)> rule;

  bool choose_second(std::uint64_t l1, std::uint64_t l2, RandomSource& rng) const {
    const Decision d = rule(l1, l2);
    if (d == Decision::kRandom) return rng.next_bit();
    return d == Decision::kSecond;
  }
};

DecisionFunction two_choice();                 // lesser load wins, fair bit on ties
DecisionFunction one_choice();                 // always the first sample
DecisionFunction threshold(std::uint64_t f);   // first sample iff its load <= f

// Per-load-class joint sampling profile for one block: z[x][y] counts bins of
// this class sampled x times by the first stream and y times by the second.
struct BlockClassCounts {
  std::uint64_t load = 0;
  std::uint64_t bins = 0;
  std::vector<std::vector<std::uint64_t>> z;
};

struct BlockCounts {
  std::uint64_t block_size = 0;
  std::vector<BlockClassCounts> classes;
};

// Resolved pairing of one block. Bins touched by any multiply-sampled bin are
// tracked individually (ids index tracked_load); everything else is summarized
// as batch counts P'[l1][l2] of once-once pairs by start-load.
struct BlockPlan {
  std::uint64_t block_size = 0;
  std::vector<std::uint64_t> tracked_load;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> specials;
  struct BatchEntry {
    std::uint64_t load_first = 0;
    std::uint64_t load_second = 0;
    std::uint64_t pairs = 0;
  };
  std::vector<BatchEntry> batch;
};

struct TwoSampleStats {
  std::uint64_t blocks = 0;
  std::uint64_t special_pairs = 0;          // total pair-slots simulated naively
  std::uint64_t max_specials_in_block = 0;
  std::uint64_t naive_ops = 0;              // one per naively simulated pair-slot
};

std::uint64_t block_size_for(std::uint64_t n);

// Reference simulator: m sequential pairs over an explicit per-bin load array.
LoadState naive_twosample(std::uint64_t n, std::uint64_t m, const DecisionFunction& q,
                          RandomSource& rng);

// One block of the fast path: multinomial split of each sample stream over the
// load classes, per-class cardinality vectors, and their joint contingency.
BlockCounts generate_block_counts(const LoadState& state, std::uint64_t block_size,
                                  RandomSource& rng);

// Uniform occurrence matching of the two streams, materializing only pairs
// that touch a multiply-sampled bin; the rest is bulk-paired per load class.
BlockPlan pair_samples(const BlockCounts& counts, RandomSource& rng);

// Applies all once-once pairs wholesale: deterministic rules move whole
// counts, ties split Binomial(count, 1/2), and the diagonal moves wholesale
// because both outcomes coincide.
LoadState apply_batches(LoadState state, const BlockPlan& plan, const DecisionFunction& q,
                        RandomSource& rng);

// Simulates the tracked pairs sequentially in a uniformly random order and
// merges the tracked bins' final loads back into the aggregate state.
LoadState simulate_specials(LoadState state, const BlockPlan& plan,
                            const DecisionFunction& q, RandomSource& rng,
                            TwoSampleStats* stats = nullptr);

// Block simulation of m allocations under rule q, starting from empty bins.
LoadState simulate_twosample_fast(std::uint64_t n, std::uint64_t m,
                                  const DecisionFunction& q, RandomSource& rng,
                                  TwoSampleStats* stats = nullptr);

// Count-thinning round: throw m balls, keep at most f per bin, re-throw the
// overflow uniformly once, and sum the two rounds.
CardinalityVector simulate_count_thinning(std::uint64_t n, std::uint64_t m,
                                          std::uint64_t f, RandomSource& rng);
CardinalityVector naive_count_thinning(std::uint64_t n, std::uint64_t m, std::uint64_t f,
                                       RandomSource& rng);

}  // namespace binsim
