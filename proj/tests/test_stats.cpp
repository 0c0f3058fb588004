#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "binsim/random_source.hpp"
#include "binsim/stats.hpp"
#include "binsim/twosample.hpp"

using binsim::ChiSquareResult;
using binsim::ExactDistribution;
using binsim::OutcomeHistogram;
using binsim::RandomSource;

namespace {

// Upper-tail chi-square probability by Simpson integration of the density,
// used as an independent oracle for the incomplete-gamma implementation.
double simpson_tail(double x, int dof) {
  const int steps = 200000;
  const double h = x / steps;
  const auto density = [&](double t) {
    if (t <= 0.0) return 0.0;
    const double k = dof / 2.0;
    return std::exp((k - 1.0) * std::log(t) - t / 2.0 - k * std::log(2.0) -
                    std::lgamma(k));
  };
  double sum = density(x);
  for (int i = 1; i < steps; ++i) {
    sum += density(i * h) * (i % 2 ? 4.0 : 2.0);
  }
  return 1.0 - sum * h / 3.0;
}

std::string sample_exact(const ExactDistribution& exact, RandomSource& rng) {
  const double u = rng.next_unit();
  double cum = 0.0;
  for (const auto& [key, p] : exact.probs) {
    cum += p;
    if (u < cum) return key;
  }
  return exact.probs.rbegin()->first;
}

}  // namespace

TEST_CASE("exact cardinality distribution enumerates two balls in two bins") {
  const ExactDistribution d = binsim::exact_cardinality_distribution(2, 2);
  REQUIRE(d.probs.size() == 2);
  CHECK(d.probs.at("1,0,1") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.probs.at("0,2") == doctest::Approx(0.5).epsilon(1e-12));

  const ExactDistribution e = binsim::exact_cardinality_distribution(3, 2);
  REQUIRE(e.probs.size() == 2);
  CHECK(e.probs.at("2,0,1") == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(e.probs.at("1,2") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("exact cardinality distribution is normalized and bounded") {
  const ExactDistribution d = binsim::exact_cardinality_distribution(4, 6);
  double total = 0.0;
  for (const auto& [key, p] : d.probs) {
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(binsim::exact_cardinality_distribution(7, 2), std::invalid_argument);
  CHECK_THROWS_AS(binsim::exact_cardinality_distribution(3, 9), std::invalid_argument);
  CHECK_THROWS_AS(binsim::exact_cardinality_distribution(0, 0), std::invalid_argument);
}

TEST_CASE("chi square statistic matches the textbook two-cell example") {
  OutcomeHistogram obs;
  for (int i = 0; i < 600; ++i) obs.add("a");
  for (int i = 0; i < 400; ++i) obs.add("b");
  ExactDistribution fair;
  fair.probs["a"] = 0.5;
  fair.probs["b"] = 0.5;
  const ChiSquareResult r = binsim::chi_square_test(obs, fair);
  CHECK(r.statistic == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(r.dof == 1);
  CHECK(r.p_value < 1e-8);
}

TEST_CASE("chi square p-values match closed forms and numeric integration") {
  CHECK(binsim::chi_square_p_value(3.841, 1) ==
        doctest::Approx(std::erfc(std::sqrt(3.841 / 2.0))).epsilon(1e-10));
  CHECK(binsim::chi_square_p_value(5.991, 2) ==
        doctest::Approx(std::exp(-5.991 / 2.0)).epsilon(1e-10));
  CHECK(binsim::chi_square_p_value(9.488, 4) ==
        doctest::Approx(std::exp(-9.488 / 2.0) * (1.0 + 9.488 / 2.0)).epsilon(1e-10));
  CHECK(binsim::chi_square_p_value(7.0, 5) ==
        doctest::Approx(simpson_tail(7.0, 5)).epsilon(1e-7));
  CHECK(binsim::chi_square_p_value(8.0, 3) ==
        doctest::Approx(simpson_tail(8.0, 3)).epsilon(1e-7));
  CHECK(binsim::chi_square_p_value(0.0, 4) == 1.0);
  CHECK(binsim::chi_square_p_value(5.0, 0) == 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(binsim::chi_square_p_value(inf, 3) == 0.0);
}

TEST_CASE("cells below the expected-count floor pool into one") {
  OutcomeHistogram obs;
  for (int i = 0; i < 998; ++i) obs.add("a");
  obs.add("b");
  obs.add("c");
  ExactDistribution skew;
  skew.probs["a"] = 0.998;
  skew.probs["b"] = 0.001;
  skew.probs["c"] = 0.001;
  const ChiSquareResult r = binsim::chi_square_test(obs, skew);
  CHECK(r.pooled_cells == 2);
  CHECK(r.dof == 1);
  CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("outcomes with zero expected probability force rejection") {
  OutcomeHistogram obs;
  for (int i = 0; i < 995; ++i) obs.add("a");
  for (int i = 0; i < 5; ++i) obs.add("z");
  ExactDistribution only_a;
  only_a.probs["a"] = 1.0;
  const ChiSquareResult r = binsim::chi_square_test(obs, only_a);
  CHECK(std::isinf(r.statistic));
  CHECK(r.p_value == 0.0);
}

TEST_CASE("empty observations are rejected as caller errors") {
  OutcomeHistogram obs;
  ExactDistribution d;
  d.probs["a"] = 1.0;
  CHECK_THROWS_AS(binsim::chi_square_test(obs, d), std::invalid_argument);
}

TEST_CASE("two-histogram test separates identical from disjoint samples") {
  OutcomeHistogram a, b;
  for (int i = 0; i < 500; ++i) {
    a.add("x");
    a.add("y");
    b.add("x");
    b.add("y");
  }
  const ChiSquareResult same = binsim::chi_square_test(a, b);
  CHECK(same.statistic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(same.p_value == doctest::Approx(1.0).epsilon(1e-9));

  OutcomeHistogram c, d;
  for (int i = 0; i < 1000; ++i) c.add("only-c");
  for (int i = 0; i < 1000; ++i) d.add("only-d");
  const ChiSquareResult diff = binsim::chi_square_test(c, d);
  CHECK(diff.statistic > 100.0);
  CHECK(diff.p_value < 1e-12);
}

TEST_CASE("chi square test accepts its own exact distribution at the stated level") {
  const ExactDistribution exact = binsim::exact_cardinality_distribution(3, 4);
  RandomSource rng(777);
  int passes = 0;
  const int reps = 1000;
  for (int rep = 0; rep < reps; ++rep) {
    OutcomeHistogram obs;
    for (int i = 0; i < 2000; ++i) obs.add(sample_exact(exact, rng));
    const ChiSquareResult r = binsim::chi_square_test(obs, exact);
    passes += r.p_value >= binsim::kSignificance ? 1 : 0;
  }
  // False-rejection rate at the 1e-3 level should be about one in a thousand.
  CHECK(passes >= 985);
}

TEST_CASE("exact two-sample distribution enumerates two-choice on two bins") {
  const ExactDistribution d =
      binsim::exact_twosample_distribution(2, 2, binsim::two_choice());
  REQUIRE(d.probs.size() == 2);
  CHECK(d.probs.at("1:2") == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(d.probs.at("0:1;2:1") == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("exact two-sample distribution under one-choice matches plain occupancy") {
  const ExactDistribution d =
      binsim::exact_twosample_distribution(3, 3, binsim::one_choice());
  CHECK(d.probs.at("0:2;3:1") == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  CHECK(d.probs.at("1:3") == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(d.probs.at("0:1;1:1;2:1") == doctest::Approx(6.0 / 9.0).epsilon(1e-12));
  double total = 0.0;
  for (const auto& [key, p] : d.probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact two-sample distribution respects a zero threshold") {
  const ExactDistribution d =
      binsim::exact_twosample_distribution(2, 1, binsim::threshold(0));
  REQUIRE(d.probs.size() == 1);
  CHECK(d.probs.at("0:1;1:1") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(binsim::exact_twosample_distribution(0, 1, binsim::one_choice()),
                  std::invalid_argument);
}

TEST_CASE("exact binomial distribution matches pointwise values") {
  const ExactDistribution d = binsim::exact_binomial_distribution(10, 0.3);
  CHECK(d.probs.at("3") == doctest::Approx(0.26682793199999996).epsilon(1e-10));
  double total = 0.0;
  for (const auto& [key, p] : d.probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(binsim::exact_binomial_distribution(5, 0.0).probs.at("0") == 1.0);
  CHECK(binsim::exact_binomial_distribution(5, 1.0).probs.at("5") == 1.0);
}

TEST_CASE("exact poisson distribution is normalized to machine precision") {
  const ExactDistribution d = binsim::exact_poisson_distribution(5.0);
  CHECK(d.probs.at("0") == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));
  double total = 0.0;
  for (const auto& [key, p] : d.probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("exact hypergeometric distribution matches direct enumeration") {
  const ExactDistribution d = binsim::exact_hypergeometric_distribution(4, 2, 2);
  CHECK(d.probs.at("1") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(d.probs.at("0") == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(d.probs.at("2") == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("exact multinomial distribution covers padded keys") {
  const ExactDistribution d =
      binsim::exact_multinomial_distribution(2, {0.5, 0.5});
  CHECK(d.probs.at("2,0") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.probs.at("1,1") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.probs.at("0,2") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(binsim::counts_key({2}, 2) == "2,0");
  CHECK(binsim::counts_key({1, 1}, 2) == "1,1");
  CHECK(binsim::counts_key({}, 3) == "0,0,0");
}

TEST_CASE("exact multivariate hypergeometric distribution matches enumeration") {
  const ExactDistribution d =
      binsim::exact_multivariate_hypergeometric_distribution({2, 2}, 2);
  CHECK(d.probs.at("1,1") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(d.probs.at("2,0") == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(d.probs.at("0,2") == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}
