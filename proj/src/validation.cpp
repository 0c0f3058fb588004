#include "binsim/validation.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <stdexcept>

#include "binsim/cardinality.hpp"
#include "binsim/stats.hpp"
#include "binsim/twosample.hpp"
#include "binsim/variates.hpp"

namespace binsim {

namespace {

constexpr std::uint64_t kCellStride = std::uint64_t{1} << 32;

template <typename F>
OutcomeHistogram collect(std::uint64_t trials, std::uint64_t seed, F&& key_of) {
  OutcomeHistogram hist;
#pragma omp parallel
  {
    OutcomeHistogram local;
#pragma omp for schedule(dynamic, 64) nowait
    for (long long t = 0; t < static_cast<long long>(trials); ++t) {
      RandomSource rng(seed + static_cast<std::uint64_t>(t));
      local.add(key_of(rng));
    }
#pragma omp critical(binsim_collect)
    {
      for (const auto& [key, count] : local.counts) hist.counts[key] += count;
      hist.total += local.total;
    }
  }
  return hist;
}

std::string format_detail(const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

// Sums independent per-cell Pearson statistics into one chi-square check;
// the sum of independent chi-square variables is chi-square with summed dof.
struct Aggregate {
  double statistic = 0.0;
  std::uint64_t dof = 0;
  std::uint64_t pooled = 0;
  std::uint64_t cells = 0;
  std::string worst_label;
  double worst_p = 2.0;

  void add(const std::string& label, const ChiSquareResult& r) {
    statistic += r.statistic;
    dof += r.dof;
    pooled += r.pooled_cells;
    ++cells;
    if (r.p_value < worst_p) {
      worst_p = r.p_value;
      worst_label = label;
    }
  }

  CheckResult finish(const std::string& suite, const std::string& check) const {
    CheckResult out;
    out.suite = suite;
    out.check = check;
    out.statistic = statistic;
    out.dof = dof;
    out.p_value = chi_square_p_value(statistic, dof);
    out.pass = out.p_value >= kSignificance;
    out.detail = format_detail("cells=%" PRIu64 " pooled=%" PRIu64
                               " worst=%s (p=%.3g)",
                               cells, pooled, worst_label.c_str(), worst_p);
    return out;
  }
};

CheckResult bool_check(const std::string& suite, const std::string& check, bool pass,
                       std::string detail) {
  CheckResult out;
  out.suite = suite;
  out.check = check;
  out.pass = pass;
  out.detail = std::move(detail);
  return out;
}

std::uint64_t log_uniform(RandomSource& rng, std::uint64_t lo, std::uint64_t hi) {
  if (lo >= hi) return lo;
  const double a = std::log(static_cast<double>(lo));
  const double b = std::log(static_cast<double>(hi) + 1.0);
  const auto v = static_cast<std::uint64_t>(std::floor(std::exp(a + rng.next_unit() * (b - a))));
  return std::clamp(v, lo, hi);
}

// -------------------------------------------------------------------------
// Suites.

std::vector<CheckResult> suite_invariants(std::uint64_t seed, std::uint64_t trials) {
  if (trials == 0) trials = 10000;
  const std::string suite = "invariants";
  std::vector<CheckResult> results;

  {
    std::atomic<std::uint64_t> failures{0};
    std::string first_failure;
#pragma omp parallel for schedule(dynamic, 16)
    for (long long t = 0; t < static_cast<long long>(trials); ++t) {
      RandomSource rng(seed + static_cast<std::uint64_t>(t));
      const std::uint64_t n = log_uniform(rng, 1, 1000000);
      std::uint64_t m;
      if (t % 5 == 0) {
        m = rng.next_below(n);
      } else {
        const double hi =
            std::max(static_cast<double>(n) * std::log(std::max<double>(n, 3.0)),
                     static_cast<double>(n) + 1.0);
        m = log_uniform(rng, n, static_cast<std::uint64_t>(hi));
      }
      const CardinalityVector x =
          generate_bin_cardinalities(n, m, heuristic_kstar(n, m), rng);
      if (!(x.bins == n && x.balls == m && x.consistent())) {
        ++failures;
#pragma omp critical(binsim_inv_first)
        if (first_failure.empty()) {
          first_failure = format_detail("n=%" PRIu64 " m=%" PRIu64, n, m);
        }
      }
    }
    results.push_back(bool_check(
        suite, "generate-consistency", failures == 0,
        failures == 0 ? format_detail("trials=%" PRIu64, trials)
                      : format_detail("failures=%" PRIu64 " first=%s",
                                      failures.load(), first_failure.c_str())));
  }

  {
    std::atomic<std::uint64_t> failures{0};
#pragma omp parallel for schedule(dynamic, 16)
    for (long long t = 0; t < static_cast<long long>(trials); ++t) {
      RandomSource rng(seed + (std::uint64_t{1} << 40) + static_cast<std::uint64_t>(t));
      const std::uint64_t n = log_uniform(rng, 1, 1000000);
      const std::uint64_t m = log_uniform(
          rng, n,
          static_cast<std::uint64_t>(std::max(
              static_cast<double>(n) * std::log(std::max<double>(n, 3.0)),
              static_cast<double>(n) + 1.0)));
      const double lambda =
          static_cast<double>(m) - std::pow(static_cast<double>(m), 0.6);
      const CardinalityVector x = poissonized_cardinalities(n, std::max(lambda, 0.0), rng);
      if (!(x.bins == n && x.consistent())) ++failures;
    }
    results.push_back(bool_check(suite, "poissonized-consistency", failures == 0,
                                 format_detail("trials=%" PRIu64 " failures=%" PRIu64,
                                               trials, failures.load())));
  }

  {
    const std::uint64_t runs = std::max<std::uint64_t>(1, trials / 50);
    const DecisionFunction q = two_choice();
    std::atomic<std::uint64_t> failures{0};
#pragma omp parallel for schedule(dynamic, 4)
    for (long long t = 0; t < static_cast<long long>(runs); ++t) {
      RandomSource rng(seed + (std::uint64_t{2} << 40) + static_cast<std::uint64_t>(t));
      const std::uint64_t n = log_uniform(rng, 1, 10000);
      const std::uint64_t m = log_uniform(rng, 1, 4 * n);
      const LoadState state = simulate_twosample_fast(n, m, q, rng);
      if (!(state.bins == n && state.balls == m && state.consistent())) ++failures;
    }
    results.push_back(bool_check(suite, "twosample-conservation", failures == 0,
                                 format_detail("runs=%" PRIu64 " failures=%" PRIu64,
                                               runs, failures.load())));
  }

  {
    const std::uint64_t runs = std::max<std::uint64_t>(1, trials / 50);
    std::atomic<std::uint64_t> failures{0};
#pragma omp parallel for schedule(dynamic, 4)
    for (long long t = 0; t < static_cast<long long>(runs); ++t) {
      RandomSource rng(seed + (std::uint64_t{3} << 40) + static_cast<std::uint64_t>(t));
      const std::uint64_t n = log_uniform(rng, 1, 10000);
      const std::uint64_t m = log_uniform(rng, 1, 4 * n);
      const std::uint64_t f = rng.next_below(6);
      const CardinalityVector x = simulate_count_thinning(n, m, f, rng);
      if (!(x.bins == n && x.balls == m && x.consistent())) ++failures;
    }
    results.push_back(bool_check(suite, "thinning-conservation", failures == 0,
                                 format_detail("runs=%" PRIu64 " failures=%" PRIu64,
                                               runs, failures.load())));
  }

  return results;
}

std::vector<CheckResult> suite_equivalence_cardinalities(std::uint64_t seed,
                                                         std::uint64_t trials) {
  if (trials == 0) trials = 1000000;
  const std::string suite = "equivalence-cardinalities";
  std::vector<CheckResult> results;
  std::uint64_t cell = 0;
  for (const bool unit_kstar : {false, true}) {
    Aggregate agg;
    for (std::uint64_t n = 1; n <= 4; ++n) {
      for (std::uint64_t m = 0; m <= 6; ++m) {
        const ExactDistribution exact = exact_cardinality_distribution(n, m);
        const double kstar = unit_kstar ? 1.0 : heuristic_kstar(n, m);
        const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
        const OutcomeHistogram hist = collect(trials, cell_seed, [&](RandomSource& rng) {
          return cardinality_key(generate_bin_cardinalities(n, m, kstar, rng));
        });
        agg.add(format_detail("n=%" PRIu64 ",m=%" PRIu64, n, m),
                chi_square_test(hist, exact));
      }
    }
    results.push_back(
        agg.finish(suite, unit_kstar ? "grid-kstar-one" : "grid-kstar-heuristic"));
  }
  return results;
}

std::vector<CheckResult> suite_equivalence_twosample(std::uint64_t seed,
                                                     std::uint64_t trials) {
  if (trials == 0) trials = 1000000;
  const std::string suite = "equivalence-twosample";
  std::vector<CheckResult> results;

  const std::vector<DecisionFunction> processes = {two_choice(), one_choice(), threshold(1)};
  std::uint64_t cell = 0;
  for (const DecisionFunction& q : processes) {
    Aggregate agg;
    const auto run_cell = [&](std::uint64_t n, std::uint64_t m) {
      const ExactDistribution exact = exact_twosample_distribution(n, m, q);
      const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
      const OutcomeHistogram hist = collect(trials, cell_seed, [&](RandomSource& rng) {
        return load_state_key(simulate_twosample_fast(n, m, q, rng));
      });
      agg.add(format_detail("n=%" PRIu64 ",m=%" PRIu64, n, m),
              chi_square_test(hist, exact));
    };
    for (std::uint64_t n = 2; n <= 4; ++n) {
      for (std::uint64_t m = 1; m <= 6; ++m) run_cell(n, m);
    }
    for (const std::uint64_t n : {std::uint64_t{17}, std::uint64_t{64}}) {
      for (std::uint64_t m = 2; m <= 4; ++m) run_cell(n, m);
    }
    results.push_back(agg.finish(suite, "grid-" + q.name));
  }

  const auto full_key = [](const LoadState& s) { return load_state_key(s); };
  const auto coarse_key = [](const LoadState& s) {
    const std::uint64_t max_load = s.max_load();
    const std::uint64_t at_max = s.classes.rbegin()->second;
    const auto bucket = static_cast<std::uint64_t>(
        std::floor(std::log2(static_cast<double>(at_max) + 1.0)));
    return format_detail("max=%" PRIu64 ";b=%" PRIu64, max_load, bucket);
  };

  struct CrossCheck {
    DecisionFunction q;
    std::uint64_t n;
    std::uint64_t m;
    std::uint64_t runs;
    bool coarse;
  };
  const std::vector<CrossCheck> crosses = {
      {one_choice(), 64, 64, 100000, false},
      {two_choice(), 256, 256, 30000, false},
      {threshold(1), 10000, 10000, 4000, true},
  };
  for (const CrossCheck& cc : crosses) {
    const std::uint64_t fast_seed = seed + (++cell) * kCellStride;
    const std::uint64_t naive_seed = seed + (++cell) * kCellStride;
    const OutcomeHistogram fast_hist = collect(cc.runs, fast_seed, [&](RandomSource& rng) {
      const LoadState s = simulate_twosample_fast(cc.n, cc.m, cc.q, rng);
      return cc.coarse ? coarse_key(s) : full_key(s);
    });
    const OutcomeHistogram naive_hist =
        collect(cc.runs, naive_seed, [&](RandomSource& rng) {
          const LoadState s = naive_twosample(cc.n, cc.m, cc.q, rng);
          return cc.coarse ? coarse_key(s) : full_key(s);
        });
    const ChiSquareResult r = chi_square_test(fast_hist, naive_hist);
    CheckResult out;
    out.suite = suite;
    out.check = format_detail("fast-vs-naive:%s:n=%" PRIu64, cc.q.name.c_str(), cc.n);
    out.statistic = r.statistic;
    out.dof = r.dof;
    out.p_value = r.p_value;
    out.pass = r.p_value >= kSignificance;
    out.detail = format_detail("runs=%" PRIu64 " pooled=%" PRIu64, cc.runs, r.pooled_cells);
    results.push_back(out);
  }

  return results;
}

std::vector<CheckResult> suite_collision_bound(std::uint64_t seed, std::uint64_t trials) {
  const std::uint64_t runs = trials == 0 ? 100 : trials;
  constexpr std::uint64_t kN = 1000000;
  const double bound = 9.0 * std::log(static_cast<double>(kN));
  const DecisionFunction q = two_choice();
  std::atomic<std::uint64_t> worst{0};
#pragma omp parallel for schedule(dynamic, 1)
  for (long long t = 0; t < static_cast<long long>(runs); ++t) {
    RandomSource rng(seed + static_cast<std::uint64_t>(t));
    TwoSampleStats stats;
    simulate_twosample_fast(kN, kN, q, rng, &stats);
    std::uint64_t seen = worst.load();
    while (stats.max_specials_in_block > seen &&
           !worst.compare_exchange_weak(seen, stats.max_specials_in_block)) {
    }
  }
  const bool pass = static_cast<double>(worst.load()) <= bound;
  CheckResult out = bool_check(
      "collision-bound", "max-specials-per-block", pass,
      format_detail("runs=%" PRIu64 " n=m=%" PRIu64 " max=%" PRIu64 " bound=%.2f", runs,
                    kN, worst.load(), bound));
  out.statistic = static_cast<double>(worst.load());
  return {out};
}

std::vector<CheckResult> suite_variates(std::uint64_t seed, std::uint64_t trials) {
  if (trials == 0) trials = 1000000;
  const std::string suite = "variates-exactness";
  std::vector<CheckResult> results;
  std::uint64_t cell = 0;

  {
    Aggregate agg;
    const std::vector<std::pair<std::uint64_t, double>> grid = {
        {10, 0.3}, {30, 0.5}, {100, 0.07}, {1000, 0.47}, {50, 0.9}, {25, 0.0}, {25, 1.0}};
    for (const auto& [n, p] : grid) {
      const ExactDistribution exact = exact_binomial_distribution(n, p);
      const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
      const OutcomeHistogram hist = collect(trials, cell_seed, [&](RandomSource& rng) {
        return std::to_string(binomial(n, p, rng));
      });
      agg.add(format_detail("n=%" PRIu64 ",p=%g", n, p), chi_square_test(hist, exact));
    }
    results.push_back(agg.finish(suite, "binomial-grid"));
  }

  {
    Aggregate agg;
    for (const double lambda : {0.0, 0.3, 5.0, 29.5, 35.0, 100.25}) {
      const ExactDistribution exact = exact_poisson_distribution(lambda);
      const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
      const OutcomeHistogram hist = collect(trials, cell_seed, [&](RandomSource& rng) {
        return std::to_string(poisson(lambda, rng));
      });
      agg.add(format_detail("lambda=%g", lambda), chi_square_test(hist, exact));
    }
    results.push_back(agg.finish(suite, "poisson-grid"));
  }

  {
    Aggregate agg;
    for (std::uint64_t pop = 0; pop <= 8; ++pop) {
      for (std::uint64_t draws = 0; draws <= pop; ++draws) {
        for (std::uint64_t marked = 0; marked <= pop; ++marked) {
          const ExactDistribution exact = exact_hypergeometric_distribution(pop, draws, marked);
          const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
          const OutcomeHistogram hist =
              collect(trials, cell_seed, [&](RandomSource& rng) {
                return std::to_string(hypergeometric(pop, draws, marked, rng));
              });
          agg.add(format_detail("pop=%" PRIu64 ",d=%" PRIu64 ",k=%" PRIu64, pop, draws,
                                marked),
                  chi_square_test(hist, exact));
        }
      }
    }
    results.push_back(agg.finish(suite, "hypergeometric-grid"));
  }

  {
    Aggregate agg;
    const std::vector<std::vector<double>> configs = {
        {0.5, 0.5},
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
        {0.25, 0.25, 0.25, 0.25},
        {0.5, 0.3, 0.2},
        {0.7, 0.2, 0.1}};
    for (const std::vector<double>& probs : configs) {
      for (std::uint64_t n = 1; n <= 8; ++n) {
        const ExactDistribution exact = exact_multinomial_distribution(n, probs);
        const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
        // The final class's conditional probability is exactly 1, so report
        // mass 1 there; the clamp then force-absorbs the remainder.
        const auto weight = [&](std::size_t j) {
          return j + 1 >= probs.size() ? 1.0 : probs[j];
        };
        const OutcomeHistogram hist = collect(trials, cell_seed, [&](RandomSource& rng) {
          return counts_key(multinomial_lazy(n, weight, rng), probs.size());
        });
        agg.add(format_detail("k=%zu,n=%" PRIu64, probs.size(), n),
                chi_square_test(hist, exact));
      }
    }
    results.push_back(agg.finish(suite, "multinomial-grid"));
  }

  {
    Aggregate agg;
    const std::vector<std::vector<std::uint64_t>> pools = {
        {3, 2, 1}, {4, 4}, {2, 2, 2}, {5, 1}};
    for (const std::vector<std::uint64_t>& pool : pools) {
      std::uint64_t total = 0;
      for (const std::uint64_t c : pool) total += c;
      for (std::uint64_t draws = 1; draws < total; ++draws) {
        const ExactDistribution exact = exact_multivariate_hypergeometric_distribution(pool, draws);
        const std::uint64_t cell_seed = seed + (++cell) * kCellStride;
        const OutcomeHistogram hist = collect(trials, cell_seed, [&](RandomSource& rng) {
          const ClassCounts classes(pool);
          return counts_key(multivariate_hypergeometric_lazy(classes, draws, rng),
                            pool.size());
        });
        agg.add(format_detail("pool=%zu-way,draws=%" PRIu64, pool.size(), draws),
                chi_square_test(hist, exact));
      }
    }
    results.push_back(agg.finish(suite, "mvhg-grid"));
  }

  return results;
}

}  // namespace

std::vector<std::string> validation_suite_names() {
  return {"invariants", "equivalence-cardinalities", "equivalence-twosample",
          "collision-bound", "variates-exactness"};
}

std::vector<CheckResult> run_validation_suite(const std::string& suite, std::uint64_t seed,
                                              std::uint64_t trials) {
  if (suite == "invariants") return suite_invariants(seed, trials);
  if (suite == "equivalence-cardinalities") {
    return suite_equivalence_cardinalities(seed, trials);
  }
  if (suite == "equivalence-twosample") return suite_equivalence_twosample(seed, trials);
  if (suite == "collision-bound") return suite_collision_bound(seed, trials);
  if (suite == "variates-exactness") return suite_variates(seed, trials);
  throw std::invalid_argument("unknown validation suite: " + suite);
}

}  // namespace binsim
