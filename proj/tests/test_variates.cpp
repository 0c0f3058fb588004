#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "binsim/random_source.hpp"
#include "binsim/variates.hpp"

using binsim::ClassCounts;
using binsim::RandomSource;

namespace {

double sample_mean(std::size_t trials, const std::function<double(RandomSource&)>& draw,
                   std::uint64_t seed) {
  RandomSource rng(seed);
  double sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    sum += draw(rng);
  }
  return sum / static_cast<double>(trials);
}

double sample_freq(std::size_t trials, const std::function<bool(RandomSource&)>& event,
                   std::uint64_t seed) {
  RandomSource rng(seed);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    hits += event(rng) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace

TEST_CASE("random source produces bounded draws and counts them") {
  RandomSource rng(12345);
  const std::uint64_t before = rng.draw_count();
  (void)rng.next_u64();
  CHECK(rng.draw_count() == before + 1);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.next_below(1) == 0);
    const std::uint64_t v = rng.next_below(17);
    CHECK(v < 17);
    const double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("identical seeds reproduce identical variate streams") {
  RandomSource a(99), b(99);
  for (int i = 0; i < 200; ++i) {
    CHECK(binsim::binomial(50, 0.37, a) == binsim::binomial(50, 0.37, b));
    CHECK(binsim::poisson(12.5, a) == binsim::poisson(12.5, b));
    CHECK(binsim::hypergeometric(40, 15, 11, a) == binsim::hypergeometric(40, 15, 11, b));
  }
  CHECK(a.draw_count() == b.draw_count());
}

TEST_CASE("log factorial matches the direct product") {
  long double acc = 0.0L;
  for (std::uint64_t n = 1; n <= 5000; ++n) {
    acc += std::log(static_cast<long double>(n));
    const double exact = static_cast<double>(acc);
    CHECK(binsim::log_factorial(n) == doctest::Approx(exact).epsilon(1e-12));
  }
  CHECK(binsim::log_factorial(0) == 0.0);
  CHECK(binsim::log_factorial(10) == doctest::Approx(15.104412573075516).epsilon(1e-13));
}

TEST_CASE("log factorial bounds sandwich the exact value") {
  CHECK(binsim::log_factorial_bounds(0).lower == 0.0);
  CHECK(binsim::log_factorial_bounds(0).upper == 0.0);
  CHECK(binsim::log_factorial_bounds(1).lower == 0.0);
  CHECK(binsim::log_factorial_bounds(1).upper == 0.0);
  long double acc = 0.0L;
  for (std::uint64_t n = 2; n <= 170; ++n) {
    acc += std::log(static_cast<long double>(n));
    const double exact = static_cast<double>(acc);
    const auto b = binsim::log_factorial_bounds(n);
    CHECK(b.lower <= exact * (1 + 1e-14) + 1e-12);
    CHECK(b.upper >= exact * (1 - 1e-14) - 1e-12);
    const double dn = static_cast<double>(n);
    const double width_cap = 1.0 / (12.0 * dn * (12.0 * dn + 1.0));
    // The subtraction cancels against a base of size ln(n!), so allow an ulp
    // of that base on top of the analytic width.
    CHECK(b.upper - b.lower <= width_cap + 1e-12);
  }
}

TEST_CASE("binomial handles degenerate probabilities without randomness") {
  RandomSource rng(1);
  const std::uint64_t before = rng.draw_count();
  CHECK(binsim::binomial(10, 0.0, rng) == 0);
  CHECK(binsim::binomial(10, 1.0, rng) == 10);
  CHECK(binsim::binomial(0, 0.5, rng) == 0);
  CHECK(rng.draw_count() == before);
}

TEST_CASE("binomial matches its mean on both sampling paths") {
  const double small = sample_mean(
      200000, [](RandomSource& r) { return static_cast<double>(binsim::binomial(100, 0.3, r)); },
      21);
  CHECK(small == doctest::Approx(30.0).epsilon(0.01));

  const double large = sample_mean(
      10000, [](RandomSource& r) { return static_cast<double>(binsim::binomial(100000, 0.4, r)); },
      22);
  CHECK(large == doctest::Approx(40000.0).epsilon(0.001));
}

TEST_CASE("binomial frequencies match the exact probability mass") {
  const double freq = sample_freq(
      100000, [](RandomSource& r) { return binsim::binomial(10, 0.3, r) == 3; }, 23);
  CHECK(freq == doctest::Approx(0.26682793).epsilon(0.03));
}

TEST_CASE("binomial mode-centered inversion matches the exact probability mass") {
  // Mean 150 with sigma ~10.2 lands between the small-mean walk and the
  // large-spread rejection sampler; P(X = 150) frozen from exact arithmetic.
  const double freq = sample_freq(
      100000, [](RandomSource& r) { return binsim::binomial(500, 0.3, r) == 150; }, 31);
  CHECK(freq == doctest::Approx(0.03890837750398265).epsilon(0.08));

  const double mean = sample_mean(
      100000, [](RandomSource& r) { return static_cast<double>(binsim::binomial(500, 0.3, r)); },
      32);
  CHECK(mean == doctest::Approx(150.0).epsilon(0.002));
}

TEST_CASE("poisson matches the exact probability mass") {
  RandomSource rng(2);
  const std::uint64_t before = rng.draw_count();
  CHECK(binsim::poisson(0.0, rng) == 0);
  CHECK(rng.draw_count() == before);

  const double zero_freq = sample_freq(
      100000, [](RandomSource& r) { return binsim::poisson(1.0, r) == 0; }, 24);
  CHECK(zero_freq == doctest::Approx(0.36787944).epsilon(0.025));

  const double small_mean = sample_mean(
      100000, [](RandomSource& r) { return static_cast<double>(binsim::poisson(50.0, r)); }, 25);
  CHECK(small_mean == doctest::Approx(50.0).epsilon(0.003));

  const double big_mean = sample_mean(
      10000, [](RandomSource& r) { return static_cast<double>(binsim::poisson(100.25, r)); }, 26);
  CHECK(big_mean == doctest::Approx(100.25).epsilon(0.005));
}

TEST_CASE("poisson mode-centered inversion matches the exact probability mass") {
  // P(X = 100) at rate 100.25 (binary-exact), frozen from exact arithmetic.
  const double freq = sample_freq(
      100000, [](RandomSource& r) { return binsim::poisson(100.25, r) == 100; }, 33);
  CHECK(freq == doctest::Approx(0.039848562909396805).epsilon(0.08));
}

TEST_CASE("poisson rejection path matches its mean at scale") {
  const double mean = sample_mean(
      2000, [](RandomSource& r) { return static_cast<double>(binsim::poisson(50000.0, r)); }, 34);
  CHECK(mean == doctest::Approx(50000.0).epsilon(0.001));
}

TEST_CASE("hypergeometric handles forced outcomes without consuming randomness") {
  RandomSource rng(3);
  const std::uint64_t before = rng.draw_count();
  CHECK(binsim::hypergeometric(10, 10, 4, rng) == 4);
  CHECK(binsim::hypergeometric(10, 0, 4, rng) == 0);
  CHECK(binsim::hypergeometric(10, 4, 0, rng) == 0);
  CHECK(binsim::hypergeometric(5, 3, 5, rng) == 3);
  CHECK(rng.draw_count() == before);
  CHECK_THROWS_AS(binsim::hypergeometric(4, 5, 2, rng), std::invalid_argument);
  CHECK_THROWS_AS(binsim::hypergeometric(4, 2, 5, rng), std::invalid_argument);
}

TEST_CASE("hypergeometric frequency matches direct enumeration") {
  const double freq = sample_freq(
      100000, [](RandomSource& r) { return binsim::hypergeometric(4, 2, 2, r) == 1; }, 27);
  CHECK(freq == doctest::Approx(2.0 / 3.0).epsilon(0.015));
}

TEST_CASE("hypergeometric stays within its support under random parameters") {
  RandomSource rng(28);
  for (int t = 0; t < 20000; ++t) {
    const std::uint64_t pop = 1 + rng.next_below(300);
    const std::uint64_t draws = rng.next_below(pop + 1);
    const std::uint64_t marked = rng.next_below(pop + 1);
    const std::uint64_t x = binsim::hypergeometric(pop, draws, marked, rng);
    const std::uint64_t lo = marked + draws > pop ? marked + draws - pop : 0;
    const std::uint64_t hi = std::min(marked, draws);
    CHECK(x >= lo);
    CHECK(x <= hi);
  }
}

TEST_CASE("hypergeometric rejection path matches its mean at scale") {
  const double mean = sample_mean(
      2000,
      [](RandomSource& r) {
        return static_cast<double>(binsim::hypergeometric(1000000, 300000, 100000, r));
      },
      29);
  CHECK(mean == doctest::Approx(30000.0).epsilon(0.001));
}

TEST_CASE("hypergeometric mode-centered inversion covers wide supports") {
  // Support width 1000 with sigma ~14.5 takes the inversion walk rather than
  // rejection; P(X = 300) frozen from exact arithmetic.
  const double freq = sample_freq(
      100000,
      [](RandomSource& r) { return binsim::hypergeometric(1000000, 300000, 1000, r) == 300; },
      35);
  CHECK(freq == doctest::Approx(0.027534774643522726).epsilon(0.1));

  const double mean = sample_mean(
      100000,
      [](RandomSource& r) {
        return static_cast<double>(binsim::hypergeometric(1000000, 300000, 1000, r));
      },
      36);
  CHECK(mean == doctest::Approx(300.0).epsilon(0.001));
}

TEST_CASE("lazy multinomial handles forced and empty splits") {
  RandomSource rng(4);
  CHECK(binsim::multinomial_lazy(0, [](std::size_t) { return 0.5; }, rng).empty());
  const auto all = binsim::multinomial_lazy(7, [](std::size_t) { return 1.0; }, rng);
  CHECK(all == std::vector<std::uint64_t>{7});
}

TEST_CASE("lazy multinomial splits two trials evenly") {
  RandomSource rng(30);
  std::size_t both_first = 0, split = 0, both_second = 0;
  const auto weight = [](std::size_t j) { return j == 0 ? 0.5 : 1.0; };
  for (int t = 0; t < 100000; ++t) {
    const auto counts = binsim::multinomial_lazy(2, weight, rng);
    std::uint64_t total = 0;
    for (const std::uint64_t c : counts) total += c;
    REQUIRE(total == 2);
    REQUIRE(counts.size() <= 2);
    if (counts.size() == 1) {
      ++both_first;
    } else if (counts[0] == 1) {
      ++split;
    } else {
      REQUIRE(counts[0] == 0);
      ++both_second;
    }
  }
  CHECK(static_cast<double>(both_first) / 100000 == doctest::Approx(0.25).epsilon(0.04));
  CHECK(static_cast<double>(split) / 100000 == doctest::Approx(0.5).epsilon(0.03));
  CHECK(static_cast<double>(both_second) / 100000 == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("lazy multinomial stops at the class that absorbs the remainder") {
  RandomSource rng(31);
  const auto weight = [](std::size_t j) { return j + 1 >= 3 ? 1.0 : 1.0 / 3.0; };
  for (int t = 0; t < 2000; ++t) {
    const auto counts = binsim::multinomial_lazy(6, weight, rng);
    CHECK(counts.size() <= 3);
    std::uint64_t total = 0;
    for (const std::uint64_t c : counts) total += c;
    CHECK(total == 6);
    if (!counts.empty()) {
      CHECK(counts.back() > 0);
    }
  }
}

TEST_CASE("multivariate hypergeometric exhausts or skips the pool") {
  RandomSource rng(5);
  const std::uint64_t before = rng.draw_count();
  const auto all = binsim::multivariate_hypergeometric_lazy(ClassCounts({5, 3}), 8, rng);
  CHECK(all == std::vector<std::uint64_t>{5, 3});
  const auto none = binsim::multivariate_hypergeometric_lazy(ClassCounts({5, 3}), 0, rng);
  CHECK(none.empty());
  CHECK(rng.draw_count() == before);
  CHECK_THROWS_AS(binsim::multivariate_hypergeometric_lazy(ClassCounts({2, 2}), 5, rng),
                  std::invalid_argument);
}

TEST_CASE("multivariate hypergeometric frequency matches direct enumeration") {
  const double freq = sample_freq(
      100000,
      [](RandomSource& r) {
        const auto counts = binsim::multivariate_hypergeometric_lazy(ClassCounts({2, 2}), 2, r);
        return counts.size() == 2 && counts[0] == 1;
      },
      32);
  CHECK(freq == doctest::Approx(2.0 / 3.0).epsilon(0.015));
}

TEST_CASE("multivariate hypergeometric conserves draws under random pools") {
  RandomSource rng(33);
  for (int t = 0; t < 5000; ++t) {
    std::vector<std::uint64_t> pool(1 + rng.next_below(5));
    std::uint64_t total = 0;
    for (auto& c : pool) {
      c = rng.next_below(20);
      total += c;
    }
    const std::uint64_t draws = rng.next_below(total + 1);
    const auto counts = binsim::multivariate_hypergeometric_lazy(ClassCounts(pool), draws, rng);
    CHECK(counts.size() <= pool.size());
    std::uint64_t got = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      CHECK(counts[j] <= pool[j]);
      got += counts[j];
    }
    CHECK(got == draws);
  }
}

TEST_CASE("class counts track their total") {
  const ClassCounts pool({3, 0, 4});
  CHECK(pool.total == 7);
  CHECK(pool.counts.size() == 3);
  CHECK(ClassCounts(std::vector<std::uint64_t>{}).total == 0);
}
