#include "binsim/cardinality.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "binsim/variates.hpp"

namespace binsim {

bool CardinalityVector::consistent() const {
  std::uint64_t total_bins = 0;
  std::uint64_t total_balls = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    total_bins += counts[k];
    total_balls += static_cast<std::uint64_t>(k) * counts[k];
  }
  if (total_bins != bins || total_balls != balls) return false;
  return counts.size() <= 1 || counts.back() != 0;
}

namespace {

void require_bins(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("bin count must be positive");
}

// Same ball-throwing process as naive_cardinalities but only the <= m touched
// bins are stored, so the cost is O(m) regardless of n. This is what the fast
// path's base case uses: a Theta(n) histogram pass per recursion leaf would
// dominate the polylog budget.
CardinalityVector sparse_naive(std::uint64_t n, std::uint64_t m, RandomSource& rng) {
  CardinalityVector out{n, m, {}};
  if (m == 0) {
    out.counts = {n};
    return out;
  }
  if (m == 1) {
    out.counts = {n - 1, 1};
    return out;
  }
  if (m == 2) {
    if (rng.next_below(n) == 0) {
      out.counts = {n - 1, 0, 1};  // second ball hit the first ball's bin
    } else {
      out.counts = {n - 2, 2};
    }
    return out;
  }
  std::unordered_map<std::uint64_t, std::uint64_t> touched;
  touched.reserve(2 * m);
  for (std::uint64_t i = 0; i < m; ++i) ++touched[rng.next_below(n)];
  std::uint64_t max_load = 0;
  for (const auto& [bin, load] : touched) max_load = std::max(max_load, load);
  out.counts.assign(max_load + 1, 0);
  for (const auto& [bin, load] : touched) ++out.counts[load];
  out.counts[0] = n - touched.size();
  return out;
}

CardinalityVector generate_impl(std::uint64_t n, std::uint64_t m, double kstar,
                                RandomSource& rng, GenerateStats* stats, int depth);

}  // namespace

CardinalityVector naive_cardinalities(std::uint64_t n, std::uint64_t m, RandomSource& rng) {
  require_bins(n);
  // Byte loads with an overflow map keep the array at n bytes; loads beyond
  // 255 are astronomically rare in scope (m <= n ln n) but stay exact.
  std::vector<std::uint8_t> loads(n, 0);
  std::unordered_map<std::uint64_t, std::uint64_t> overflow;
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint64_t bin = rng.next_below(n);
    if (loads[bin] == 255) {
      ++overflow[bin];
    } else {
      ++loads[bin];
    }
  }
  std::vector<std::uint64_t> histogram(256, 0);
  for (std::uint64_t bin = 0; bin < n; ++bin) ++histogram[loads[bin]];
  CardinalityVector out{n, m, {}};
  std::uint64_t max_load = 255;
  while (max_load > 0 && histogram[max_load] == 0) --max_load;
  out.counts.assign(histogram.begin(), histogram.begin() + max_load + 1);
  for (const auto& [bin, extra] : overflow) {
    const std::uint64_t load = 255 + extra;
    --out.counts[255];
    if (out.counts.size() <= load) out.counts.resize(load + 1, 0);
    ++out.counts[load];
  }
  out.trim();
  return out;
}

CardinalityVector poissonized_cardinalities(std::uint64_t n, double lambda,
                                            RandomSource& rng) {
  require_bins(n);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("poissonized rate must be finite and non-negative");
  }
  const double rate = lambda / static_cast<double>(n);
  const double cap = 50.0 * std::log(static_cast<double>(std::max<std::uint64_t>(n, 2)));
  CardinalityVector out{n, 0, {}};
  std::uint64_t remaining = n;
  double p = std::exp(-rate);  // Poisson(rate) pmf at the current class
  double sum = 0.0;
  double comp = 0.0;
  std::uint64_t k = 0;
  while (remaining > 0) {
    const double denom = 1.0 - sum;
    std::uint64_t x;
    if (denom <= p) {
      x = remaining;
    } else {
      x = binomial(remaining, p / denom, rng);
    }
    out.counts.push_back(x);
    out.balls += k * x;
    remaining -= x;
    const double y = p - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++k;
    p *= rate / static_cast<double>(k);
    if (static_cast<double>(k) > cap + 2.0) {
      throw std::logic_error("poissonized class loop exceeded its occupancy cap");
    }
  }
  return out;
}

double default_kstar(std::uint64_t n, std::uint64_t m) {
  if (n < 3) throw std::invalid_argument("default_kstar requires n >= 3");
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double log_n = std::log(nd);
  if (md < nd || md > nd * log_n) {
    throw std::invalid_argument("default_kstar requires n <= m <= n ln n");
  }
  const double inner = (4.0 * nd / md) * log_n;
  if (inner <= 1.0) throw std::domain_error("default_kstar log argument out of range");
  return 10.0 * log_n / std::log(inner);
}

double heuristic_kstar(std::uint64_t n, std::uint64_t m) {
  if (n >= 3 && m >= 1) {
    const double nd = static_cast<double>(n);
    const double log_n = std::log(nd);
    const double inner = (4.0 * nd / static_cast<double>(m)) * log_n;
    if (inner > 1.000001) {
      return std::max(1.0, 10.0 * log_n / std::log(inner));
    }
  }
  return std::max(1.0, 10.0 * std::log(static_cast<double>(std::max<std::uint64_t>(n, 3))));
}

namespace {

CardinalityVector generate_impl(std::uint64_t n, std::uint64_t m, double kstar,
                                RandomSource& rng, GenerateStats* stats, int depth) {
  if (stats && depth > stats->max_depth) stats->max_depth = depth;
  if (n == 1) {
    // Deterministic: the single bin takes everything.
    CardinalityVector out{1, m, std::vector<std::uint64_t>(m + 1, 0)};
    out.counts[m] = 1;
    return out;
  }
  if (static_cast<double>(m) <= kstar) {
    if (stats) stats->naive_balls += m;
    return sparse_naive(n, m, rng);
  }

  const double md = static_cast<double>(m);
  const double correction = std::pow(md, 0.6);
  CardinalityVector x = poissonized_cardinalities(n, md - correction, rng);
  const std::uint64_t realized = x.balls;

  if (static_cast<double>(realized) < md - 2.0 * correction) {  // Case A: too few balls
    if (stats) {
      ++stats->case_a_total;
      if (depth == 0) stats->top_case_a = true;
      stats->naive_balls += m - realized;
    }
    for (std::uint64_t i = realized; i < m; ++i) add_one_ball(x, rng);
    x.trim();
    return x;
  }
  if (realized > m) {  // Case B: too many balls
    if (stats) {
      ++stats->case_b_total;
      if (depth == 0) stats->top_case_b = true;
      stats->naive_balls += realized - m;
    }
    for (std::uint64_t i = m; i < realized; ++i) remove_one_ball(x, rng);
    x.trim();
    return x;
  }
  if (realized == m) return x;  // Case C with nothing left to place

  CardinalityVector y = generate_impl(n, m - realized, kstar, rng, stats, depth + 1);
  return combine_and_sum(x, y, rng);
}

}  // namespace

CardinalityVector generate_bin_cardinalities(std::uint64_t n, std::uint64_t m,
                                             double kstar, RandomSource& rng,
                                             GenerateStats* stats) {
  require_bins(n);
  if (!(kstar >= 1.0)) throw std::invalid_argument("kstar must be at least 1");
  if (static_cast<double>(m) > 9007199254740992.0) {
    throw std::invalid_argument("ball count must not exceed 2^53");
  }
  return generate_impl(n, m, kstar, rng, stats, 0);
}

void add_one_ball(CardinalityVector& x, RandomSource& rng) {
  require_bins(x.bins);
  std::uint64_t pick = rng.next_below(x.bins);
  for (std::size_t i = 0; i < x.counts.size(); ++i) {
    if (pick < x.counts[i]) {
      --x.counts[i];
      if (x.counts.size() <= i + 1) x.counts.resize(i + 2, 0);
      ++x.counts[i + 1];
      ++x.balls;
      return;
    }
    pick -= x.counts[i];
  }
  throw std::logic_error("cardinality vector does not cover its bin count");
}

void remove_one_ball(CardinalityVector& x, RandomSource& rng) {
  if (x.balls == 0) throw std::domain_error("no balls available to remove");
  std::uint64_t pick = rng.next_below(x.balls);
  for (std::size_t i = 1; i < x.counts.size(); ++i) {
    const std::uint64_t weight = static_cast<std::uint64_t>(i) * x.counts[i];
    if (pick < weight) {
      --x.counts[i];
      ++x.counts[i - 1];
      --x.balls;
      x.trim();
      return;
    }
    pick -= weight;
  }
  throw std::logic_error("cardinality vector does not cover its ball count");
}

JointCardinalityMatrix combine_cardinalities(const CardinalityVector& x,
                                             const CardinalityVector& y,
                                             RandomSource& rng) {
  if (x.bins != y.bins) throw std::invalid_argument("combine requires matching bin counts");
  require_bins(x.bins);
  JointCardinalityMatrix joint;
  joint.bins = x.bins;
  joint.z.assign(x.counts.size(), std::vector<std::uint64_t>(y.counts.size(), 0));

  // Sequential contingency rows with fixed margins are exact in any row order;
  // descending leaves the huge x=0 row as the forced remainder of T, which the
  // degenerate hypergeometric paths then produce without consuming randomness.
  ClassCounts t(y.counts);
  for (std::size_t r = x.counts.size(); r-- > 0;) {
    const std::vector<std::uint64_t> row =
        multivariate_hypergeometric_lazy(t, x.counts[r], rng);
    for (std::size_t c = 0; c < row.size(); ++c) {
      joint.z[r][c] = row[c];
      t.counts[c] -= row[c];
      t.total -= row[c];
    }
  }
  if (t.total != 0) throw std::logic_error("combine left bins unassigned");
  return joint;
}

CardinalityVector combine_and_sum(const CardinalityVector& x, const CardinalityVector& y,
                                  RandomSource& rng) {
  const JointCardinalityMatrix joint = combine_cardinalities(x, y, rng);
  CardinalityVector out{x.bins, x.balls + y.balls, {}};
  out.counts.assign(x.counts.size() + y.counts.size() - 1, 0);
  for (std::size_t r = 0; r < joint.z.size(); ++r) {
    for (std::size_t c = 0; c < joint.z[r].size(); ++c) {
      out.counts[r + c] += joint.z[r][c];
    }
  }
  out.trim();
  return out;
}

}  // namespace binsim
