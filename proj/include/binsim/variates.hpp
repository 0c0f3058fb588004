#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "binsim/random_source.hpp"

namespace binsim {

// Ordered class sizes for chained hypergeometric sampling.
struct ClassCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  ClassCounts() = default;
  explicit ClassCounts(std::vector<std::uint64_t> c) : counts(std::move(c)) {
    for (std::uint64_t v : counts) total += v;
  }
};

// First-order Stirling sandwich on ln(n!). For n >= 1 the exact value lies in
// [lower, upper] with upper - lower = 1/(12n) - 1/(12n+1); n in {0, 1} gives (0, 0).
struct LogFactorialBounds {
  double lower = 0.0;
  double upper = 0.0;
};

LogFactorialBounds log_factorial_bounds(std::uint64_t n);

// Tight ln(n!): exact cumulative table for small n, Stirling series beyond.
// Used as the fallback when the sandwich cannot decide a rejection test.
double log_factorial(std::uint64_t n);

// Exact samplers. All of them accept the full parameter range up to 2^53 and
// switch internally between short inversion walks (small spread) and a
// uniformly fast mode-centered rejection (large spread), so the per-call cost
// is bounded independent of the parameters.
std::uint64_t binomial(std::uint64_t trials, double p, RandomSource& rng);
std::uint64_t poisson(double lambda, RandomSource& rng);
std::uint64_t hypergeometric(std::uint64_t population, std::uint64_t draws,
                             std::uint64_t marked, RandomSource& rng);

// Multinomial(trials; p_0, p_1, ...) generated class by class as
// Binomial(remaining, p_j / (1 - s_j)); stops at the class where the running
// total reaches `trials`, so trailing zero classes are never materialized.
// `probs` must yield non-negative raw class probabilities. A class whose
// probability reaches the remaining mass absorbs every open trial and ends
// the walk, which makes an exact 1.0 a safe sentinel for the final class.
std::vector<std::uint64_t> multinomial_lazy(
    std::uint64_t trials, const std::function<double(std::size_t)>& probs,
    RandomSource& rng);

// Multivariate hypergeometric: draw `draws` items without replacement from the
// classes; same lazy truncation as multinomial_lazy (empty result for draws=0).
std::vector<std::uint64_t> multivariate_hypergeometric_lazy(
    const ClassCounts& classes, std::uint64_t draws, RandomSource& rng);

}  // namespace binsim
