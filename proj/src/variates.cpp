#include "binsim/variates.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace binsim {
namespace {

constexpr double kParamCap = 9007199254740992.0;  // 2^53: counts stay exact in doubles
constexpr std::size_t kFactorialTable = 4096;

const double* factorial_table() {
  static const auto table = [] {
    auto* t = new double[kFactorialTable + 1];
    long double acc = 0.0L;
    t[0] = 0.0;
    for (std::size_t i = 1; i <= kFactorialTable; ++i) {
      acc += std::log(static_cast<long double>(i));
      t[i] = static_cast<double>(acc);
    }
    return t;
  }();
  return table;
}

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // ln(2*pi)/2

double stirling_base(double n) {
  return n * std::log(n) - n + 0.5 * std::log(n) + kHalfLogTwoPi;
}

}  // namespace

double log_factorial(std::uint64_t n) {
  if (n <= kFactorialTable) return factorial_table()[n];
  // Stirling series; the n^-7 truncation error is far below double rounding here.
  const double nd = static_cast<double>(n);
  const double n2 = nd * nd;
  return stirling_base(nd) + 1.0 / (12.0 * nd) - 1.0 / (360.0 * nd * n2) +
         1.0 / (1260.0 * nd * n2 * n2);
}

LogFactorialBounds log_factorial_bounds(std::uint64_t n) {
  if (n <= 1) return {0.0, 0.0};
  const double nd = static_cast<double>(n);
  const double base = stirling_base(nd);
  return {base + 1.0 / (12.0 * nd + 1.0), base + 1.0 / (12.0 * nd)};
}

namespace {

// Interval on a log-pmf value, padded so double rounding cannot flip the
// squeeze decisions that rely on it.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntervalAcc {
  double lo = 0.0;
  double hi = 0.0;
  double mag = 0.0;

  void add(std::uint64_t n) {
    const LogFactorialBounds b = log_factorial_bounds(n);
    lo += b.lower;
    hi += b.upper;
    mag += std::abs(b.upper);
  }
  void sub(std::uint64_t n) {
    const LogFactorialBounds b = log_factorial_bounds(n);
    lo -= b.upper;
    hi -= b.lower;
    mag += std::abs(b.upper);
  }
  void add_exact(double v) {
    lo += v;
    hi += v;
    mag += std::abs(v);
  }
  Interval padded() const {
    const double pad = 4e-15 * (mag + 1.0);
    return {lo - pad, hi + pad};
  }
};

struct BinomialPmf {
  std::uint64_t n;
  double log_p;
  double log_q;

  double log_point(std::uint64_t k) const {
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k) +
           static_cast<double>(k) * log_p + static_cast<double>(n - k) * log_q;
  }
  Interval log_bounds(std::uint64_t k) const {
    IntervalAcc acc;
    acc.add(n);
    acc.sub(k);
    acc.sub(n - k);
    acc.add_exact(static_cast<double>(k) * log_p);
    acc.add_exact(static_cast<double>(n - k) * log_q);
    return acc.padded();
  }
};

struct PoissonPmf {
  double lambda;
  double log_lambda;

  double log_point(std::uint64_t k) const {
    return -lambda + static_cast<double>(k) * log_lambda - log_factorial(k);
  }
  Interval log_bounds(std::uint64_t k) const {
    IntervalAcc acc;
    acc.sub(k);
    acc.add_exact(-lambda + static_cast<double>(k) * log_lambda);
    return acc.padded();
  }
};

struct HypergeometricPmf {
  std::uint64_t population;
  std::uint64_t draws;
  std::uint64_t marked;

  double log_point(std::uint64_t k) const {
    return log_factorial(marked) - log_factorial(k) - log_factorial(marked - k) +
           log_factorial(population - marked) - log_factorial(draws - k) -
           log_factorial(population - marked - draws + k) - log_factorial(population) +
           log_factorial(draws) + log_factorial(population - draws);
  }
  Interval log_bounds(std::uint64_t k) const {
    IntervalAcc acc;
    acc.add(marked);
    acc.sub(k);
    acc.sub(marked - k);
    acc.add(population - marked);
    acc.sub(draws - k);
    acc.sub(population - marked - draws + k);
    acc.sub(population);
    acc.add(draws);
    acc.add(population - draws);
    return acc.padded();
  }
};

// Uniformly fast sampler for discrete log-concave pmfs (Devroye 1987 style).
// With p = f(mode), log-concavity gives the dominating envelope
//   f(mode + z) <= p * min(1, e^(1 - p*|z|)),
// sampled as a centered rectangle of half-width L = floor(1/p) plus two
// geometric tails; expected iterations are bounded (< ~7) for all parameters.
// The scale/decay constants are padded by 3e-12 so that rounding in the
// computed p cannot break domination. The acceptance test first consults the
// padded Stirling sandwich and only falls back to the tight log-pmf when the
// interval straddles the threshold.
template <typename Pmf>
std::uint64_t reject_log_concave(const Pmf& pmf, std::uint64_t lo, std::uint64_t hi,
                                 std::uint64_t mode, RandomSource& rng) {
  const double p = std::exp(pmf.log_point(mode));
  const double p_scale = p * (1.0 + 3e-12);
  const double p_decay = p * (1.0 - 3e-12);
  const double log_p_scale = std::log(p_scale);
  const double half_width = std::floor(1.0 / p_decay);
  const double w_center = (2.0 * half_width + 1.0) * p_scale;
  const double w_tail = p_scale * std::exp(1.0 - p_decay * (half_width + 1.0)) /
                        (-std::expm1(-p_decay));
  const double w_total = w_center + 2.0 * w_tail;
  const double lo_d = static_cast<double>(lo);
  const double hi_d = static_cast<double>(hi);
  const double mode_d = static_cast<double>(mode);

  for (int iter = 0; iter < 10000; ++iter) {
    const double u = rng.next_unit() * w_total;
    double offset;
    double log_env;
    if (u < w_center) {
      const auto span = static_cast<std::uint64_t>(2.0 * half_width) + 1;
      offset = static_cast<double>(rng.next_below(span)) - half_width;
      log_env = log_p_scale;
    } else {
      const bool right = rng.next_bit();
      const double t = std::floor(-std::log1p(-rng.next_unit()) / p_decay);
      offset = half_width + 1.0 + t;
      if (!right) offset = -offset;
      log_env = log_p_scale + 1.0 - p_decay * std::abs(offset);
    }
    const double kd = mode_d + offset;
    if (kd < lo_d || kd > hi_d) continue;
    const auto k = static_cast<std::uint64_t>(kd);
    const double threshold = std::log(1.0 - rng.next_unit()) + log_env;
    const Interval bounds = pmf.log_bounds(k);
    if (threshold <= bounds.lo) return k;
    if (threshold > bounds.hi) continue;
    if (threshold <= pmf.log_point(k)) return k;
  }
  throw std::logic_error("log-concave rejection did not terminate");
}

std::uint64_t binomial_inversion(std::uint64_t n, double p, RandomSource& rng) {
  // Requires p <= 1/2 and a small mean; walks the pmf recursion from k = 0.
  const double odds = p / (1.0 - p);
  const double u = rng.next_unit();
  double f = std::exp(static_cast<double>(n) * std::log1p(-p));
  double cum = f;
  std::uint64_t k = 0;
  while (u > cum && k < n) {
    f *= static_cast<double>(n - k) / static_cast<double>(k + 1) * odds;
    ++k;
    cum += f;
  }
  return k;
}

// Spread cap for the mode-centered inversion walks: sigma <= 64 keeps the
// expected walk length around a hundred pmf steps while still costing a
// single uniform per sample.
constexpr double kInversionVariance = 4096.0;

std::uint64_t binomial_inversion_from_mode(std::uint64_t n, double p, std::uint64_t mode,
                                           RandomSource& rng) {
  // Two-sided inversion outward from the mode: every evaluated pmf value stays
  // within the walk length of the maximum, so nothing underflows prematurely.
  const double f_mode = std::exp(BinomialPmf{n, std::log(p), std::log1p(-p)}.log_point(mode));
  const double odds = p / (1.0 - p);
  const auto up_ratio = [&](std::uint64_t k) {
    return static_cast<double>(n - k) / static_cast<double>(k + 1) * odds;
  };
  for (;;) {
    const double u = rng.next_unit();
    double cum = f_mode;
    if (u < cum) return mode;
    std::uint64_t right = mode;
    std::uint64_t left = mode;
    double f_right = f_mode;
    double f_left = f_mode;
    while ((right < n && f_right > 0.0) || (left > 0 && f_left > 0.0)) {
      if (right < n && f_right > 0.0) {
        f_right *= up_ratio(right);
        ++right;
        cum += f_right;
        if (u < cum) return right;
      }
      if (left > 0 && f_left > 0.0) {
        f_left /= up_ratio(left - 1);
        --left;
        cum += f_left;
        if (u < cum) return left;
      }
    }
    // u fell into the sliver lost to rounding; redraw.
  }
}

std::uint64_t poisson_inversion_from_mode(double lambda, std::uint64_t mode,
                                          RandomSource& rng) {
  const double f_mode = std::exp(PoissonPmf{lambda, std::log(lambda)}.log_point(mode));
  for (;;) {
    const double u = rng.next_unit();
    double cum = f_mode;
    if (u < cum) return mode;
    std::uint64_t right = mode;
    std::uint64_t left = mode;
    double f_right = f_mode;
    double f_left = f_mode;
    while (f_right > 0.0 || (left > 0 && f_left > 0.0)) {
      if (f_right > 0.0) {
        f_right *= lambda / static_cast<double>(right + 1);
        ++right;
        cum += f_right;
        if (u < cum) return right;
      }
      if (left > 0 && f_left > 0.0) {
        f_left *= static_cast<double>(left) / lambda;
        --left;
        cum += f_left;
        if (u < cum) return left;
      }
    }
    // u fell into the sliver lost to rounding; redraw.
  }
}

std::uint64_t binomial_checked(std::uint64_t n, double p, RandomSource& rng) {
  if (p == 0.0 || n == 0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial_checked(n, 1.0 - p, rng);
  const double mean = static_cast<double>(n) * p;
  if (mean <= 30.0) return binomial_inversion(n, p, rng);

  // floor((n+1)p) is the argmax; the +-1 walk repairs any floor rounding at ties.
  auto mode = static_cast<std::uint64_t>(static_cast<double>(n + 1) * p);
  if (mode > n) mode = n;
  while (mode < n &&
         static_cast<double>(n - mode) * p > static_cast<double>(mode + 1) * (1.0 - p)) {
    ++mode;
  }
  while (mode > 0 &&
         static_cast<double>(n - mode + 1) * p < static_cast<double>(mode) * (1.0 - p)) {
    --mode;
  }
  if (mean * (1.0 - p) <= kInversionVariance) {
    return binomial_inversion_from_mode(n, p, mode, rng);
  }
  BinomialPmf pmf{n, std::log(p), std::log1p(-p)};
  return reject_log_concave(pmf, 0, n, mode, rng);
}

std::uint64_t poisson_inversion(double lambda, RandomSource& rng) {
  for (;;) {
    const double u = rng.next_unit();
    double f = std::exp(-lambda);
    double cum = f;
    std::uint64_t k = 0;
    while (u > cum) {
      ++k;
      f *= lambda / static_cast<double>(k);
      cum += f;
      if (k > 500) break;  // float-stall guard; restart with a fresh uniform
    }
    if (k <= 500) return k;
  }
}

// Exact argmax test for the hypergeometric: f(k+1) >= f(k) iff
// (marked-k)(draws-k) >= (k+1)(population-marked-draws+k+1), in 128-bit integers.
bool hyper_ratio_up_at_least_one(std::uint64_t population, std::uint64_t draws,
                                 std::uint64_t marked, std::uint64_t k) {
  const unsigned __int128 num =
      static_cast<unsigned __int128>(marked - k) * (draws - k);
  const unsigned __int128 den =
      static_cast<unsigned __int128>(k + 1) * (population - marked - draws + k + 1);
  return num >= den;
}

std::uint64_t hypergeometric_inversion(std::uint64_t population, std::uint64_t draws,
                                       std::uint64_t marked, std::uint64_t lo,
                                       std::uint64_t hi, std::uint64_t mode,
                                       RandomSource& rng) {
  // Two-sided inversion outward from the mode: keeps every evaluated pmf value
  // within a factor (width+1) of the maximum, so nothing underflows even when
  // the support endpoints carry probabilities like 1e-400.
  const double f_mode = std::exp(HypergeometricPmf{population, draws, marked}.log_point(mode));
  const auto up_ratio = [&](std::uint64_t k) {
    return static_cast<double>(marked - k) * static_cast<double>(draws - k) /
           (static_cast<double>(k + 1) *
            static_cast<double>(population - marked - draws + k + 1));
  };
  for (;;) {
    const double u = rng.next_unit();
    double cum = f_mode;
    if (u < cum) return mode;
    std::uint64_t right = mode;
    std::uint64_t left = mode;
    double f_right = f_mode;
    double f_left = f_mode;
    while ((right < hi && f_right > 0.0) || (left > lo && f_left > 0.0)) {
      if (right < hi && f_right > 0.0) {
        f_right *= up_ratio(right);
        ++right;
        cum += f_right;
        if (u < cum) return right;
      }
      if (left > lo && f_left > 0.0) {
        f_left /= up_ratio(left - 1);
        --left;
        cum += f_left;
        if (u < cum) return left;
      }
    }
    // u fell into the sliver lost to rounding; redraw.
  }
}

void check_count(double v, const char* what) {
  if (!(v >= 0.0) || v > kParamCap) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 2^53]");
  }
}

}  // namespace

std::uint64_t binomial(std::uint64_t trials, double p, RandomSource& rng) {
  check_count(static_cast<double>(trials), "binomial trials");
  if (!(p >= 0.0) || !(p <= 1.0)) {
    throw std::invalid_argument("binomial probability must lie in [0, 1]");
  }
  return binomial_checked(trials, p, rng);
}

std::uint64_t poisson(double lambda, RandomSource& rng) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("poisson rate must be finite");
  check_count(lambda, "poisson rate");
  if (lambda == 0.0) return 0;
  if (lambda <= 30.0) return poisson_inversion(lambda, rng);

  const auto mode = static_cast<std::uint64_t>(lambda);  // floor(lambda) is the argmax
  if (lambda <= kInversionVariance) return poisson_inversion_from_mode(lambda, mode, rng);
  PoissonPmf pmf{lambda, std::log(lambda)};
  const auto hi = std::numeric_limits<std::uint64_t>::max();
  return reject_log_concave(pmf, 0, hi, mode, rng);
}

std::uint64_t hypergeometric(std::uint64_t population, std::uint64_t draws,
                             std::uint64_t marked, RandomSource& rng) {
  check_count(static_cast<double>(population), "hypergeometric population");
  if (draws > population) {
    throw std::invalid_argument("hypergeometric draws exceed population");
  }
  if (marked > population) {
    throw std::invalid_argument("hypergeometric marked exceed population");
  }
  if (draws == 0 || marked == 0) return 0;
  if (draws == population) return marked;
  if (marked == population) return draws;

  const std::uint64_t slack = population - marked;
  const std::uint64_t lo = draws > slack ? draws - slack : 0;
  const std::uint64_t hi = std::min(draws, marked);
  if (lo == hi) return lo;

  // floor((draws+1)(marked+1)/(population+2)) estimates the argmax; the exact
  // 128-bit ratio test repairs floor rounding so the rejection envelope is
  // anchored at the true maximum.
  double estimate = (static_cast<double>(draws) + 1.0) * (static_cast<double>(marked) + 1.0) /
                    (static_cast<double>(population) + 2.0);
  auto mode = static_cast<std::uint64_t>(estimate);
  if (mode < lo) mode = lo;
  if (mode > hi) mode = hi;
  while (mode < hi && hyper_ratio_up_at_least_one(population, draws, marked, mode)) ++mode;
  while (mode > lo && !hyper_ratio_up_at_least_one(population, draws, marked, mode - 1)) --mode;

  const double pd = static_cast<double>(population);
  const double frac = static_cast<double>(marked) / pd;
  const double variance = static_cast<double>(draws) * frac * (1.0 - frac) *
                          (pd - static_cast<double>(draws)) / (pd - 1.0);
  if (hi - lo <= 64 || variance <= kInversionVariance) {
    return hypergeometric_inversion(population, draws, marked, lo, hi, mode, rng);
  }
  return reject_log_concave(HypergeometricPmf{population, draws, marked}, lo, hi, mode, rng);
}

std::vector<std::uint64_t> multinomial_lazy(
    std::uint64_t trials, const std::function<double(std::size_t)>& probs,
    RandomSource& rng) {
  check_count(static_cast<double>(trials), "multinomial trials");
  std::vector<std::uint64_t> out;
  std::uint64_t remaining = trials;
  double sum = 0.0;
  double comp = 0.0;  // Kahan compensation: the running sum feeds every divisor
  std::size_t j = 0;
  while (remaining > 0) {
    const double p = probs(j);
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::domain_error("multinomial probability source yielded an invalid value");
    }
    const double denom = 1.0 - sum;
    if (denom <= p) {
      // This class covers all remaining mass, so it absorbs every open trial.
      out.push_back(remaining);
      return out;
    }
    const std::uint64_t x = binomial_checked(remaining, p / denom, rng);
    out.push_back(x);
    remaining -= x;
    const double y = p - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (++j > 100000000) {
      throw std::logic_error("multinomial probability source failed to reach total mass 1");
    }
  }
  return out;
}

std::vector<std::uint64_t> multivariate_hypergeometric_lazy(
    const ClassCounts& classes, std::uint64_t draws, RandomSource& rng) {
  if (draws > classes.total) {
    throw std::invalid_argument("multivariate hypergeometric draws exceed total");
  }
  std::vector<std::uint64_t> out;
  std::uint64_t rem_pop = classes.total;
  std::uint64_t rem_draws = draws;
  for (std::size_t j = 0; j < classes.counts.size() && rem_draws > 0; ++j) {
    const std::uint64_t x = hypergeometric(rem_pop, rem_draws, classes.counts[j], rng);
    out.push_back(x);
    rem_draws -= x;
    rem_pop -= classes.counts[j];
  }
  if (rem_draws > 0) {
    throw std::logic_error("multivariate hypergeometric chain left draws unplaced");
  }
  return out;
}

}  // namespace binsim
