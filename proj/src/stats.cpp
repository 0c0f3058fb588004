#include "binsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "binsim/variates.hpp"

namespace binsim {

std::string cardinality_key(const CardinalityVector& x) {
  std::string key;
  for (std::size_t i = 0; i < x.counts.size(); ++i) {
    if (i > 0) key += ',';
    key += std::to_string(x.counts[i]);
  }
  return key;
}

namespace {

std::string class_map_key(const std::map<std::uint64_t, std::uint64_t>& classes) {
  std::string key;
  for (const auto& [load, count] : classes) {
    if (!key.empty()) key += ';';
    key += std::to_string(load);
    key += ':';
    key += std::to_string(count);
  }
  return key;
}

}  // namespace

std::string load_state_key(const LoadState& state) {
  return class_map_key(state.classes);
}

std::string counts_key(const std::vector<std::uint64_t>& values, std::size_t width) {
  std::string key;
  for (std::size_t i = 0; i < width; ++i) {
    if (i > 0) key += ',';
    key += std::to_string(i < values.size() ? values[i] : 0);
  }
  return key;
}

ExactDistribution exact_binomial_distribution(std::uint64_t n, double p) {
  ExactDistribution out;
  if (p <= 0.0) {
    out.probs["0"] = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out.probs[std::to_string(n)] = 1.0;
    return out;
  }
  for (std::uint64_t k = 0; k <= n; ++k) {
    const double log_p = log_factorial(n) - log_factorial(k) - log_factorial(n - k) +
                         static_cast<double>(k) * std::log(p) +
                         static_cast<double>(n - k) * std::log1p(-p);
    out.probs[std::to_string(k)] = std::exp(log_p);
  }
  return out;
}

ExactDistribution exact_poisson_distribution(double lambda) {
  ExactDistribution out;
  if (lambda <= 0.0) {
    out.probs["0"] = 1.0;
    return out;
  }
  double cumulative = 0.0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double log_p = -lambda + static_cast<double>(k) * std::log(lambda) -
                         log_factorial(k);
    const double p = std::exp(log_p);
    out.probs[std::to_string(k)] = p;
    cumulative += p;
    if (k > lambda && 1.0 - cumulative < 1e-15) break;
  }
  return out;
}

ExactDistribution exact_hypergeometric_distribution(std::uint64_t population,
                                                    std::uint64_t draws,
                                                    std::uint64_t marked) {
  ExactDistribution out;
  const std::uint64_t unmarked = population - marked;
  const std::uint64_t lo = draws > unmarked ? draws - unmarked : 0;
  const std::uint64_t hi = std::min(draws, marked);
  const double log_denom =
      log_factorial(population) - log_factorial(draws) - log_factorial(population - draws);
  for (std::uint64_t k = lo; k <= hi; ++k) {
    const double log_p = log_factorial(marked) - log_factorial(k) -
                         log_factorial(marked - k) + log_factorial(unmarked) -
                         log_factorial(draws - k) -
                         log_factorial(unmarked - (draws - k)) - log_denom;
    out.probs[std::to_string(k)] = std::exp(log_p);
  }
  return out;
}

ExactDistribution exact_multinomial_distribution(std::uint64_t n,
                                                 const std::vector<double>& probs) {
  ExactDistribution out;
  std::vector<std::uint64_t> counts(probs.size(), 0);
  const auto recurse = [&](auto&& self, std::size_t j, std::uint64_t left) -> void {
    if (j + 1 == probs.size()) {
      counts[j] = left;
      double log_p = log_factorial(n);
      for (std::size_t i = 0; i < probs.size(); ++i) {
        log_p -= log_factorial(counts[i]);
        if (counts[i] > 0) log_p += static_cast<double>(counts[i]) * std::log(probs[i]);
      }
      out.probs[counts_key(counts, counts.size())] += std::exp(log_p);
      return;
    }
    for (std::uint64_t take = 0; take <= left; ++take) {
      counts[j] = take;
      self(self, j + 1, left - take);
    }
  };
  recurse(recurse, 0, n);
  return out;
}

ExactDistribution exact_multivariate_hypergeometric_distribution(
    const std::vector<std::uint64_t>& pool, std::uint64_t draws) {
  ExactDistribution out;
  std::uint64_t total = 0;
  for (const std::uint64_t c : pool) total += c;
  const double log_denom =
      log_factorial(total) - log_factorial(draws) - log_factorial(total - draws);
  std::vector<std::uint64_t> counts(pool.size(), 0);
  const auto recurse = [&](auto&& self, std::size_t j, std::uint64_t left) -> void {
    if (j + 1 == pool.size()) {
      if (left > pool[j]) return;
      counts[j] = left;
      double log_p = -log_denom;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        log_p += log_factorial(pool[i]) - log_factorial(counts[i]) -
                 log_factorial(pool[i] - counts[i]);
      }
      out.probs[counts_key(counts, counts.size())] += std::exp(log_p);
      return;
    }
    const std::uint64_t cap = std::min(left, pool[j]);
    for (std::uint64_t take = 0; take <= cap; ++take) {
      counts[j] = take;
      self(self, j + 1, left - take);
    }
  };
  recurse(recurse, 0, draws);
  return out;
}

ExactDistribution exact_cardinality_distribution(std::uint64_t n, std::uint64_t m) {
  if (n < 1 || n > 6 || m > 8) {
    throw std::invalid_argument("exact cardinality distribution needs 1 <= n <= 6, m <= 8");
  }
  ExactDistribution out;
  const double log_n = std::log(static_cast<double>(n));
  std::vector<std::uint64_t> loads(n, 0);
  // Walk every composition of m into n ordered per-bin loads; each has
  // probability (m! / prod loads!) / n^m and contributes to its histogram key.
  const auto emit = [&]() {
    double log_p = log_factorial(m) - static_cast<double>(m) * log_n;
    std::uint64_t max_load = 0;
    for (const std::uint64_t load : loads) {
      log_p -= log_factorial(load);
      max_load = std::max(max_load, load);
    }
    CardinalityVector x{n, m, std::vector<std::uint64_t>(max_load + 1, 0)};
    for (const std::uint64_t load : loads) ++x.counts[load];
    out.probs[cardinality_key(x)] += std::exp(log_p);
  };
  const auto recurse = [&](auto&& self, std::size_t bin, std::uint64_t left) -> void {
    if (bin + 1 == n) {
      loads[bin] = left;
      emit();
      return;
    }
    for (std::uint64_t take = 0; take <= left; ++take) {
      loads[bin] = take;
      self(self, bin + 1, left - take);
    }
  };
  recurse(recurse, 0, m);
  return out;
}

ExactDistribution exact_twosample_distribution(std::uint64_t n, std::uint64_t m,
                                               const DecisionFunction& q) {
  if (n < 1) throw std::invalid_argument("bin count must be positive");
  using State = std::map<std::uint64_t, std::uint64_t>;
  std::map<State, double> frontier{{State{{0, n}}, 1.0}};
  const double pair_total = static_cast<double>(n) * static_cast<double>(n);

  const auto bump = [](std::map<State, double>& into, const State& from,
                       std::uint64_t load, double prob) {
    State next = from;
    const auto it = next.find(load);
    if (--it->second == 0) next.erase(it);
    ++next[load + 1];
    into[std::move(next)] += prob;
  };

  for (std::uint64_t step = 0; step < m; ++step) {
    std::map<State, double> next;
    for (const auto& [state, prob] : frontier) {
      for (const auto& [l1, c1] : state) {
        for (const auto& [l2, c2] : state) {
          const double p = prob * static_cast<double>(c1) *
                           static_cast<double>(c2) / pair_total;
          switch (q.rule(l1, l2)) {
            case Decision::kFirst:
              bump(next, state, l1, p);
              break;
            case Decision::kSecond:
              bump(next, state, l2, p);
              break;
            case Decision::kRandom:
              bump(next, state, l1, p / 2.0);
              bump(next, state, l2, p / 2.0);
              break;
          }
        }
      }
    }
    frontier = std::move(next);
    if (frontier.size() > 200000) {
      throw std::length_error("two-sample state space exceeds the exact-DP budget");
    }
  }

  ExactDistribution out;
  for (const auto& [state, prob] : frontier) out.probs[class_map_key(state)] += prob;
  return out;
}

namespace {

constexpr double kHalfLogPi = 0.57236494292470008707;

double ln_gamma_half(std::uint64_t twice_a) {
  if (twice_a == 0) throw std::invalid_argument("gamma argument must be positive");
  if (twice_a % 2 == 0) return log_factorial(twice_a / 2 - 1);
  const std::uint64_t k = (twice_a - 1) / 2;
  return log_factorial(2 * k) - static_cast<double>(k) * std::log(4.0) -
         log_factorial(k) + kHalfLogPi;
}

// Regularized upper incomplete gamma Q(a, x) for a = twice_a / 2, via the
// power series for small x and the Lentz continued fraction otherwise.
double gamma_q_half(std::uint64_t twice_a, double x) {
  const double a = static_cast<double>(twice_a) / 2.0;
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  const double log_prefix = -x + a * std::log(x) - ln_gamma_half(twice_a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int i = 1; i < 10000; ++i) {
      term *= x / (a + static_cast<double>(i));
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return 1.0 - sum * std::exp(log_prefix);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(log_prefix) * h;
}

}  // namespace

double chi_square_p_value(double statistic, std::uint64_t dof) {
  if (dof == 0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  return gamma_q_half(dof, statistic / 2.0);
}

ChiSquareResult chi_square_test(const OutcomeHistogram& observed,
                                const ExactDistribution& expected) {
  if (observed.total == 0) throw std::invalid_argument("empty observation histogram");
  const double total = static_cast<double>(observed.total);

  for (const auto& [key, count] : observed.counts) {
    if (count > 0 && expected.probs.find(key) == expected.probs.end()) {
      ChiSquareResult impossible;
      impossible.statistic = std::numeric_limits<double>::infinity();
      impossible.dof = expected.probs.size();
      impossible.p_value = 0.0;
      return impossible;
    }
  }

  ChiSquareResult result;
  double pooled_expected = 0.0;
  double pooled_observed = 0.0;
  std::uint64_t cells = 0;
  for (const auto& [key, prob] : expected.probs) {
    const double e = prob * total;
    const auto it = observed.counts.find(key);
    const double o = it == observed.counts.end() ? 0.0 : static_cast<double>(it->second);
    if (e < 5.0) {
      pooled_expected += e;
      pooled_observed += o;
      ++result.pooled_cells;
      continue;
    }
    const double diff = o - e;
    result.statistic += diff * diff / e;
    ++cells;
  }
  if (pooled_expected > 0.0) {
    const double diff = pooled_observed - pooled_expected;
    result.statistic += diff * diff / pooled_expected;
    ++cells;
  }
  result.dof = cells > 0 ? cells - 1 : 0;
  result.p_value = chi_square_p_value(result.statistic, result.dof);
  return result;
}

ChiSquareResult chi_square_test(const OutcomeHistogram& a, const OutcomeHistogram& b) {
  if (a.total == 0 || b.total == 0) throw std::invalid_argument("empty observation histogram");
  std::map<std::string, std::pair<double, double>> cells;
  for (const auto& [key, count] : a.counts) cells[key].first = static_cast<double>(count);
  for (const auto& [key, count] : b.counts) cells[key].second = static_cast<double>(count);

  const double ta = static_cast<double>(a.total);
  const double tb = static_cast<double>(b.total);
  const double grand = ta + tb;

  ChiSquareResult result;
  double pool_o1 = 0.0;
  double pool_o2 = 0.0;
  double pool_e1 = 0.0;
  double pool_e2 = 0.0;
  std::uint64_t used = 0;
  for (const auto& [key, counts] : cells) {
    const double row = counts.first + counts.second;
    const double e1 = ta * row / grand;
    const double e2 = tb * row / grand;
    if (e1 < 5.0 || e2 < 5.0) {
      pool_o1 += counts.first;
      pool_o2 += counts.second;
      pool_e1 += e1;
      pool_e2 += e2;
      ++result.pooled_cells;
      continue;
    }
    const double d1 = counts.first - e1;
    const double d2 = counts.second - e2;
    result.statistic += d1 * d1 / e1 + d2 * d2 / e2;
    ++used;
  }
  if (pool_e1 > 0.0 && pool_e2 > 0.0) {
    const double d1 = pool_o1 - pool_e1;
    const double d2 = pool_o2 - pool_e2;
    result.statistic += d1 * d1 / pool_e1 + d2 * d2 / pool_e2;
    ++used;
  }
  result.dof = used > 0 ? used - 1 : 0;
  result.p_value = chi_square_p_value(result.statistic, result.dof);
  return result;
}

}  // namespace binsim
