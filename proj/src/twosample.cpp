#include "binsim/twosample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "binsim/variates.hpp"

namespace binsim {

std::uint64_t LoadState::max_load() const {
  return classes.empty() ? 0 : classes.rbegin()->first;
}

bool LoadState::consistent() const {
  std::uint64_t total_bins = 0;
  std::uint64_t total_balls = 0;
  for (const auto& [load, count] : classes) {
    if (count == 0) return false;
    total_bins += count;
    total_balls += load * count;
  }
  return total_bins == bins && total_balls == balls;
}

LoadState load_state_from_cardinalities(const CardinalityVector& x) {
  LoadState state{x.bins, x.balls, {}};
  for (std::size_t load = 0; load < x.counts.size(); ++load) {
    if (x.counts[load] > 0) state.classes[load] = x.counts[load];
  }
  return state;
}

DecisionFunction two_choice() {
  return {"two-choice", [](std::uint64_t l1, std::uint64_t l2) {
            if (l1 < l2) return Decision::kFirst;
            if (l1 > l2) return Decision::kSecond;
            return Decision::kRandom;
          }};
}

DecisionFunction one_choice() {
  return {"one-choice", [](std::uint64_t, std::uint64_t) { return Decision::kFirst; }};
}

DecisionFunction threshold(std::uint64_t f) {
  return {"threshold:" + std::to_string(f), [f](std::uint64_t l1, std::uint64_t) {
            return l1 <= f ? Decision::kFirst : Decision::kSecond;
          }};
}

std::uint64_t block_size_for(std::uint64_t n) {
  const auto b = static_cast<std::uint64_t>(
      std::ceil(std::sqrt(static_cast<double>(n)) / 4.0));
  return std::max<std::uint64_t>(1, b);
}

namespace {

void require_state_bins(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("bin count must be positive");
}

void apply_load_delta(LoadState& state, const std::map<std::uint64_t, std::int64_t>& delta) {
  for (const auto& [load, d] : delta) {
    if (d == 0) continue;
    const auto it = state.classes.find(load);
    const std::int64_t current = it == state.classes.end()
                                     ? 0
                                     : static_cast<std::int64_t>(it->second);
    const std::int64_t updated = current + d;
    if (updated < 0) throw std::logic_error("load class count went negative");
    if (updated == 0) {
      if (it != state.classes.end()) state.classes.erase(it);
    } else {
      state.classes[load] = static_cast<std::uint64_t>(updated);
    }
  }
}

}  // namespace

LoadState naive_twosample(std::uint64_t n, std::uint64_t m, const DecisionFunction& q,
                          RandomSource& rng) {
  require_state_bins(n);
  std::vector<std::uint32_t> loads(n, 0);
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint64_t first = rng.next_below(n);
    const std::uint64_t second = rng.next_below(n);
    if (q.choose_second(loads[first], loads[second], rng)) {
      ++loads[second];
    } else {
      ++loads[first];
    }
  }
  LoadState state{n, m, {}};
  for (std::uint64_t bin = 0; bin < n; ++bin) ++state.classes[loads[bin]];
  return state;
}

BlockCounts generate_block_counts(const LoadState& state, std::uint64_t block_size,
                                  RandomSource& rng) {
  require_state_bins(state.bins);
  if (!state.consistent()) throw std::invalid_argument("inconsistent load state");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> cls(state.classes.begin(),
                                                           state.classes.end());
  const double n = static_cast<double>(state.bins);
  // The final class's conditional probability is exactly 1 (its weight is the
  // whole remainder), so report mass 1 there and let the clamp force-absorb;
  // this is the true multinomial conditional and costs no draws.
  const auto weight = [&](std::size_t j) {
    return j + 1 >= cls.size() ? 1.0 : static_cast<double>(cls[j].second) / n;
  };
  const std::vector<std::uint64_t> first_split = multinomial_lazy(block_size, weight, rng);
  const std::vector<std::uint64_t> second_split = multinomial_lazy(block_size, weight, rng);

  BlockCounts counts;
  counts.block_size = block_size;
  for (std::size_t j = 0; j < cls.size(); ++j) {
    const std::uint64_t f = j < first_split.size() ? first_split[j] : 0;
    const std::uint64_t s = j < second_split.size() ? second_split[j] : 0;
    if (f == 0 && s == 0) continue;
    const auto [load, bins] = cls[j];
    const CardinalityVector first_cv =
        generate_bin_cardinalities(bins, f, heuristic_kstar(bins, f), rng);
    const CardinalityVector second_cv =
        generate_bin_cardinalities(bins, s, heuristic_kstar(bins, s), rng);
    JointCardinalityMatrix joint = combine_cardinalities(first_cv, second_cv, rng);
    counts.classes.push_back({load, bins, std::move(joint.z)});
  }
  return counts;
}

BlockPlan pair_samples(const BlockCounts& counts, RandomSource& rng) {
  BlockPlan plan;
  plan.block_size = counts.block_size;

  struct AnonPool {
    std::uint64_t load = 0;
    std::uint64_t first = 0;   // bins sampled exactly once, first stream only
    std::uint64_t second = 0;  // bins sampled exactly once, second stream only
  };
  std::vector<AnonPool> anon;
  std::vector<std::uint32_t> first_tokens;
  std::vector<std::uint32_t> second_tokens;

  const auto new_tracked = [&](std::uint64_t load) {
    plan.tracked_load.push_back(load);
    return static_cast<std::uint32_t>(plan.tracked_load.size() - 1);
  };

  for (const auto& cb : counts.classes) {
    AnonPool pool{cb.load, 0, 0};
    for (std::size_t x = 0; x < cb.z.size(); ++x) {
      for (std::size_t y = 0; y < cb.z[x].size(); ++y) {
        const std::uint64_t bins_here = cb.z[x][y];
        if (bins_here == 0) continue;
        if (x + y < 2) {
          if (x == 1) pool.first += bins_here;
          if (y == 1) pool.second += bins_here;
          continue;
        }
        for (std::uint64_t i = 0; i < bins_here; ++i) {
          const std::uint32_t id = new_tracked(cb.load);
          for (std::size_t k = 0; k < x; ++k) first_tokens.push_back(id);
          for (std::size_t k = 0; k < y; ++k) second_tokens.push_back(id);
        }
      }
    }
    anon.push_back(pool);
  }

  // A uniformly random bijection between the two occurrence lists, built one
  // left token at a time: each unmatched occurrence picks uniformly among the
  // remaining right-side occurrences. Only occurrences touching a tracked bin
  // are materialized; anonymous once-sampled bins stay as per-class counts.
  std::vector<bool> second_used(second_tokens.size(), false);
  std::uint64_t second_tokens_left = second_tokens.size();
  std::uint64_t second_anon_total = 0;
  std::uint64_t first_anon_total = 0;
  for (const AnonPool& pool : anon) {
    second_anon_total += pool.second;
    first_anon_total += pool.first;
  }

  for (const std::uint32_t ft : first_tokens) {
    std::uint64_t pick = rng.next_below(second_tokens_left + second_anon_total);
    std::uint32_t partner;
    if (pick < second_tokens_left) {
      std::size_t i = 0;
      for (;; ++i) {
        if (second_used[i]) continue;
        if (pick == 0) break;
        --pick;
      }
      second_used[i] = true;
      --second_tokens_left;
      partner = second_tokens[i];
    } else {
      pick -= second_tokens_left;
      std::size_t c = 0;
      while (pick >= anon[c].second) pick -= anon[c++].second;
      --anon[c].second;
      --second_anon_total;
      partner = new_tracked(anon[c].load);
    }
    plan.specials.emplace_back(ft, partner);
  }

  for (std::size_t i = 0; i < second_tokens.size(); ++i) {
    if (second_used[i]) continue;
    // Every multiply-sampled first occurrence is matched by now, so the
    // partner pool is exactly the anonymous once-first bins.
    std::uint64_t pick = rng.next_below(first_anon_total);
    std::size_t c = 0;
    while (pick >= anon[c].first) pick -= anon[c++].first;
    --anon[c].first;
    --first_anon_total;
    plan.specials.emplace_back(new_tracked(anon[c].load), second_tokens[i]);
  }

  // Bulk pairing of the remaining once-once occurrences, class row by class
  // row; the last row is the forced remainder and costs no draws.
  ClassCounts pool;
  pool.counts.reserve(anon.size());
  for (const AnonPool& a : anon) {
    pool.counts.push_back(a.second);
    pool.total += a.second;
  }
  std::uint64_t batched = 0;
  for (std::size_t c = 0; c < anon.size(); ++c) {
    if (anon[c].first == 0) continue;
    const std::vector<std::uint64_t> row =
        multivariate_hypergeometric_lazy(pool, anon[c].first, rng);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == 0) continue;
      plan.batch.push_back({anon[c].load, anon[j].load, row[j]});
      pool.counts[j] -= row[j];
      pool.total -= row[j];
      batched += row[j];
    }
  }
  if (pool.total != 0 || plan.specials.size() + batched != plan.block_size) {
    throw std::logic_error("block pairing lost occurrences");
  }
  return plan;
}

LoadState apply_batches(LoadState state, const BlockPlan& plan, const DecisionFunction& q,
                        RandomSource& rng) {
  std::map<std::uint64_t, std::int64_t> delta;
  std::uint64_t balls_added = 0;
  for (const BlockPlan::BatchEntry& entry : plan.batch) {
    const Decision d = q.rule(entry.load_first, entry.load_second);
    std::uint64_t to_first;
    if (d == Decision::kFirst) {
      to_first = entry.pairs;
    } else if (d == Decision::kSecond) {
      to_first = 0;
    } else if (entry.load_first == entry.load_second) {
      to_first = entry.pairs;  // tied equal loads land identically either way
    } else {
      to_first = binomial(entry.pairs, 0.5, rng);
    }
    const std::uint64_t to_second = entry.pairs - to_first;
    if (to_first > 0) {
      delta[entry.load_first] -= static_cast<std::int64_t>(to_first);
      delta[entry.load_first + 1] += static_cast<std::int64_t>(to_first);
    }
    if (to_second > 0) {
      delta[entry.load_second] -= static_cast<std::int64_t>(to_second);
      delta[entry.load_second + 1] += static_cast<std::int64_t>(to_second);
    }
    balls_added += entry.pairs;
  }
  apply_load_delta(state, delta);
  state.balls += balls_added;
  return state;
}

LoadState simulate_specials(LoadState state, const BlockPlan& plan,
                            const DecisionFunction& q, RandomSource& rng,
                            TwoSampleStats* stats) {
  if (stats) {
    stats->special_pairs += plan.specials.size();
    stats->naive_ops += plan.specials.size();
    stats->max_specials_in_block =
        std::max(stats->max_specials_in_block,
                 static_cast<std::uint64_t>(plan.specials.size()));
  }
  if (plan.specials.empty()) return state;

  std::vector<std::uint64_t> loads = plan.tracked_load;
  std::vector<std::uint32_t> order(plan.specials.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i-- > 1;) {
    std::swap(order[i], order[rng.next_below(i + 1)]);
  }
  for (const std::uint32_t idx : order) {
    const auto [first, second] = plan.specials[idx];
    if (q.choose_second(loads[first], loads[second], rng)) {
      ++loads[second];
    } else {
      ++loads[first];
    }
  }

  std::map<std::uint64_t, std::int64_t> delta;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (loads[i] == plan.tracked_load[i]) continue;
    --delta[plan.tracked_load[i]];
    ++delta[loads[i]];
  }
  apply_load_delta(state, delta);
  state.balls += plan.specials.size();
  return state;
}

LoadState simulate_twosample_fast(std::uint64_t n, std::uint64_t m,
                                  const DecisionFunction& q, RandomSource& rng,
                                  TwoSampleStats* stats) {
  require_state_bins(n);
  if (static_cast<double>(m) > 9007199254740992.0) {
    throw std::invalid_argument("ball count must not exceed 2^53");
  }
  LoadState state = LoadState::empty(n);
  const std::uint64_t block = block_size_for(n);
  std::uint64_t remaining = m;
  while (remaining > 0) {
    const std::uint64_t b = std::min(block, remaining);
    const BlockCounts counts = generate_block_counts(state, b, rng);
    const BlockPlan plan = pair_samples(counts, rng);
    state = apply_batches(std::move(state), plan, q, rng);
    state = simulate_specials(std::move(state), plan, q, rng, stats);
    remaining -= b;
    if (stats) ++stats->blocks;
    if (!state.consistent() || state.balls != m - remaining) {
      throw std::logic_error("block simulation broke bin/ball conservation");
    }
  }
  return state;
}

CardinalityVector simulate_count_thinning(std::uint64_t n, std::uint64_t m,
                                          std::uint64_t f, RandomSource& rng) {
  require_state_bins(n);
  const CardinalityVector first_round =
      generate_bin_cardinalities(n, m, heuristic_kstar(n, m), rng);

  CardinalityVector kept{n, 0, {}};
  std::uint64_t overflow = 0;
  if (f == 0) {
    kept.counts = {n};
    overflow = m;
  } else if (first_round.max_load() <= f) {
    kept = first_round;
  } else {
    kept.counts.assign(first_round.counts.begin(), first_round.counts.begin() + f + 1);
    for (std::size_t x = f + 1; x < first_round.counts.size(); ++x) {
      kept.counts[f] += first_round.counts[x];
      overflow += (x - f) * first_round.counts[x];
    }
    kept.balls = m - overflow;
    kept.trim();
  }

  const CardinalityVector second_round =
      generate_bin_cardinalities(n, overflow, heuristic_kstar(n, overflow), rng);
  return combine_and_sum(kept, second_round, rng);
}

CardinalityVector naive_count_thinning(std::uint64_t n, std::uint64_t m, std::uint64_t f,
                                       RandomSource& rng) {
  require_state_bins(n);
  std::vector<std::uint64_t> loads(n, 0);
  for (std::uint64_t i = 0; i < m; ++i) ++loads[rng.next_below(n)];
  std::uint64_t overflow = 0;
  for (std::uint64_t bin = 0; bin < n; ++bin) {
    if (loads[bin] > f) {
      overflow += loads[bin] - f;
      loads[bin] = f;
    }
  }
  for (std::uint64_t i = 0; i < overflow; ++i) ++loads[rng.next_below(n)];
  std::uint64_t max_load = 0;
  for (std::uint64_t bin = 0; bin < n; ++bin) max_load = std::max(max_load, loads[bin]);
  CardinalityVector out{n, m, std::vector<std::uint64_t>(max_load + 1, 0)};
  for (std::uint64_t bin = 0; bin < n; ++bin) ++out.counts[loads[bin]];
  return out;
}

}  // namespace binsim
