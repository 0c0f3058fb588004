#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "binsim/cardinality.hpp"
#include "binsim/twosample.hpp"

namespace binsim {

inline constexpr double kSignificance = 1e-3;

struct OutcomeHistogram {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;

  void add(const std::string& key) {
    ++counts[key];
    ++total;
  }
};

struct ExactDistribution {
  std::map<std::string, double> probs;
};

std::string cardinality_key(const CardinalityVector& x);
std::string load_state_key(const LoadState& state);

// Comma-joined fixed-width key for count vectors; missing trailing entries
// print as zeros so lazily truncated samples and full enumerations agree.
std::string counts_key(const std::vector<std::uint64_t>& values, std::size_t width);

// Exact reference distributions for the variate samplers, keyed the same way
// the empirical histograms are. All are computed from log-factorials, so they
// stay usable at moderate parameter sizes.
ExactDistribution exact_binomial_distribution(std::uint64_t n, double p);
ExactDistribution exact_poisson_distribution(double lambda);
ExactDistribution exact_hypergeometric_distribution(std::uint64_t population,
                                                    std::uint64_t draws,
                                                    std::uint64_t marked);
ExactDistribution exact_multinomial_distribution(std::uint64_t n,
                                                 const std::vector<double>& probs);
ExactDistribution exact_multivariate_hypergeometric_distribution(
    const std::vector<std::uint64_t>& pool, std::uint64_t draws);

// Full distribution of the cardinality vector for m uniform balls in n bins,
// by enumerating per-bin load compositions. Requires n <= 6 and m <= 8.
ExactDistribution exact_cardinality_distribution(std::uint64_t n, std::uint64_t m);

// Full distribution of the final load state of the two-sample process, by
// dynamic programming over load-class histograms (the per-ball transition
// depends on bin loads only, so the histogram is a sufficient state).
ExactDistribution exact_twosample_distribution(std::uint64_t n, std::uint64_t m,
                                               const DecisionFunction& q);

struct ChiSquareResult {
  double statistic = 0.0;
  std::uint64_t dof = 0;
  double p_value = 1.0;
  std::uint64_t pooled_cells = 0;
};

// Upper-tail p-value of the chi-square distribution with dof degrees of
// freedom, via the regularized incomplete gamma function.
double chi_square_p_value(double statistic, std::uint64_t dof);

// Pearson goodness-of-fit test of observed outcomes against an exact
// distribution. Cells with expected count below 5 are pooled into one tail
// cell; an observed outcome with zero expected probability forces rejection.
ChiSquareResult chi_square_test(const OutcomeHistogram& observed,
                                const ExactDistribution& expected);

// Two-sample homogeneity test between two outcome histograms; cells where
// either expected count falls below 5 are pooled into one tail cell.
ChiSquareResult chi_square_test(const OutcomeHistogram& a, const OutcomeHistogram& b);

}  // namespace binsim
