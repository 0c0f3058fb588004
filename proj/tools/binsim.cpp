#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "binsim/cardinality.hpp"
#include "binsim/stats.hpp"
#include "binsim/twosample.hpp"
#include "binsim/validation.hpp"

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string counts_json(const std::vector<std::uint64_t>& counts) {
  std::string out = "[";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(counts[i]);
  }
  out += ']';
  return out;
}

std::string classes_json(const std::map<std::uint64_t, std::uint64_t>& classes) {
  std::string out = "{";
  bool first = true;
  for (const auto& [load, count] : classes) {
    if (!first) out += ',';
    first = false;
    out += '"';
    out += std::to_string(load);
    out += "\":";
    out += std::to_string(count);
  }
  out += '}';
  return out;
}

struct ProcessSpec {
  std::string name;
  bool thinning = false;
  std::uint64_t thinning_bound = 0;
  binsim::DecisionFunction decision = binsim::one_choice();
};

std::uint64_t parse_u64(const std::string& text) {
  std::size_t used = 0;
  const unsigned long long value = std::stoull(text, &used);
  if (used != text.size()) throw std::invalid_argument("trailing characters");
  return value;
}

ProcessSpec parse_process(const std::string& text) {
  ProcessSpec spec;
  spec.name = text;
  if (text == "one-choice") {
    spec.decision = binsim::one_choice();
    return spec;
  }
  if (text == "two-choice") {
    spec.decision = binsim::two_choice();
    return spec;
  }
  const std::string threshold_prefix = "threshold:";
  const std::string thinning_prefix = "thinning-count:";
  try {
    if (text.rfind(threshold_prefix, 0) == 0) {
      spec.decision = binsim::threshold(parse_u64(text.substr(threshold_prefix.size())));
      return spec;
    }
    if (text.rfind(thinning_prefix, 0) == 0) {
      spec.thinning = true;
      spec.thinning_bound = parse_u64(text.substr(thinning_prefix.size()));
      return spec;
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("bad numeric parameter in process: " + text);
  }
  throw std::invalid_argument(
      "unknown process: " + text +
      " (expected one-choice, two-choice, threshold:<f>, or thinning-count:<f>)");
}

int cmd_generate(std::uint64_t n, std::uint64_t m, double kstar_flag, std::uint64_t seed,
                 std::uint64_t trials, bool deterministic) {
  double kstar = kstar_flag;
  if (kstar <= 0.0) {
    kstar = binsim::heuristic_kstar(n, m);
    const double upper = static_cast<double>(n) * std::log(std::max<double>(n, 3.0));
    if (n < 3 || m < n || static_cast<double>(m) > upper) {
      std::fprintf(stderr,
                   "warning: n=%" PRIu64 " m=%" PRIu64
                   " is outside the n <= m <= n ln n regime; using fallback k* = %.6g\n",
                   n, m, kstar);
    }
  }
  for (std::uint64_t t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = seed + t;
    binsim::RandomSource rng(trial_seed);
    const auto start = Clock::now();
    const binsim::CardinalityVector x = binsim::generate_bin_cardinalities(n, m, kstar, rng);
    const std::uint64_t ns = elapsed_ns(start);
    std::printf("{\"n\":%" PRIu64 ",\"m\":%" PRIu64 ",\"seed\":%" PRIu64
                ",\"kstar\":%.12g,\"counts\":%s,\"max_load\":%" PRIu64,
                n, m, trial_seed, kstar, counts_json(x.counts).c_str(), x.max_load());
    if (!deterministic) std::printf(",\"elapsed_ns\":%" PRIu64, ns);
    std::printf("}\n");
  }
  return 0;
}

int cmd_simulate(const ProcessSpec& spec, const std::string& mode, std::uint64_t n,
                 std::uint64_t m, std::uint64_t seed, std::uint64_t trials,
                 bool deterministic) {
  for (std::uint64_t t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = seed + t;
    binsim::RandomSource rng(trial_seed);
    std::map<std::uint64_t, std::uint64_t> classes;
    std::uint64_t max_load = 0;
    const auto start = Clock::now();
    if (spec.thinning) {
      const binsim::CardinalityVector x =
          mode == "fast"
              ? binsim::simulate_count_thinning(n, m, spec.thinning_bound, rng)
              : binsim::naive_count_thinning(n, m, spec.thinning_bound, rng);
      for (std::size_t load = 0; load < x.counts.size(); ++load) {
        if (x.counts[load] > 0) classes[load] = x.counts[load];
      }
      max_load = x.max_load();
    } else {
      const binsim::LoadState state =
          mode == "fast" ? binsim::simulate_twosample_fast(n, m, spec.decision, rng)
                         : binsim::naive_twosample(n, m, spec.decision, rng);
      classes = state.classes;
      max_load = state.max_load();
    }
    const std::uint64_t ns = elapsed_ns(start);
    std::printf("{\"process\":\"%s\",\"mode\":\"%s\",\"n\":%" PRIu64 ",\"m\":%" PRIu64
                ",\"seed\":%" PRIu64 ",\"classes\":%s,\"max_load\":%" PRIu64,
                json_escape(spec.name).c_str(), mode.c_str(), n, m, trial_seed,
                classes_json(classes).c_str(), max_load);
    if (!deterministic) std::printf(",\"elapsed_ns\":%" PRIu64, ns);
    std::printf("}\n");
  }
  return 0;
}

int cmd_validate(const std::vector<std::string>& suites, std::uint64_t seed,
                 std::uint64_t trials) {
  bool any_fail = false;
  for (const std::string& suite : suites) {
    const std::vector<binsim::CheckResult> results =
        binsim::run_validation_suite(suite, seed, trials);
    for (const binsim::CheckResult& r : results) {
      any_fail |= !r.pass;
      std::printf("{\"suite\":\"%s\",\"check\":\"%s\",\"pass\":%s,", r.suite.c_str(),
                  json_escape(r.check).c_str(), r.pass ? "true" : "false");
      if (std::isfinite(r.statistic)) {
        std::printf("\"statistic\":%.6g,", r.statistic);
      } else {
        std::printf("\"statistic\":\"inf\",");
      }
      std::printf("\"dof\":%" PRIu64 ",\"p_value\":%.6g,\"detail\":\"%s\"}\n", r.dof,
                  r.p_value, json_escape(r.detail).c_str());
      std::fflush(stdout);
    }
  }
  return any_fail ? 1 : 0;
}

struct BenchOutcome {
  std::uint64_t rng_draws = 0;
  std::uint64_t naive_ops = 0;
};

BenchOutcome run_bench_engine(const std::string& engine, std::uint64_t n, std::uint64_t m,
                              binsim::RandomSource& rng) {
  BenchOutcome out;
  const std::uint64_t before = rng.draw_count();
  if (engine == "cardinalities-fast") {
    binsim::GenerateStats stats;
    binsim::generate_bin_cardinalities(n, m, binsim::heuristic_kstar(n, m), rng, &stats);
    out.naive_ops = stats.naive_balls;
  } else if (engine == "cardinalities-naive") {
    binsim::naive_cardinalities(n, m, rng);
    out.naive_ops = m;
  } else if (engine == "twosample-fast") {
    binsim::TwoSampleStats stats;
    binsim::simulate_twosample_fast(n, m, binsim::two_choice(), rng, &stats);
    out.naive_ops = stats.naive_ops;
  } else {
    binsim::naive_twosample(n, m, binsim::two_choice(), rng);
    out.naive_ops = m;
  }
  out.rng_draws = rng.draw_count() - before;
  return out;
}

std::uint64_t nearest_rank(const std::vector<std::uint64_t>& sorted, double percentile) {
  const std::size_t k = sorted.size();
  const auto idx = static_cast<std::size_t>(
      std::ceil(percentile * static_cast<double>(k)));
  return sorted[idx == 0 ? 0 : idx - 1];
}

int cmd_bench(const std::string& engine, std::uint64_t min_n, std::uint64_t max_n,
              std::uint64_t points, std::uint64_t repeats, double balls_factor,
              std::uint64_t seed, bool deterministic) {
  std::vector<std::uint64_t> grid;
  for (std::uint64_t i = 0; i < points; ++i) {
    const double frac = points > 1 ? static_cast<double>(i) / (points - 1) : 0.0;
    const double value = static_cast<double>(min_n) *
                         std::pow(static_cast<double>(max_n) / min_n, frac);
    const auto n = static_cast<std::uint64_t>(std::llround(value));
    if (grid.empty() || grid.back() != n) grid.push_back(n);
  }

  std::printf("engine,n,m,median_ns,p10_ns,p90_ns,rng_draws,naive_ops\n");
  for (const std::uint64_t n : grid) {
    const auto m = static_cast<std::uint64_t>(
        std::llround(balls_factor * static_cast<double>(n)));
    std::vector<std::uint64_t> times;
    BenchOutcome last;
    for (std::uint64_t rep = 0; rep <= repeats; ++rep) {
      binsim::RandomSource rng(seed + n * 1000003 + rep);
      const auto start = Clock::now();
      const BenchOutcome outcome = run_bench_engine(engine, n, m, rng);
      const std::uint64_t ns = elapsed_ns(start);
      if (rep > 0) times.push_back(ns);
      last = outcome;
    }
    std::sort(times.begin(), times.end());
    const std::uint64_t median = deterministic ? 0 : nearest_rank(times, 0.5);
    const std::uint64_t p10 = deterministic ? 0 : nearest_rank(times, 0.1);
    const std::uint64_t p90 = deterministic ? 0 : nearest_rank(times, 0.9);
    std::printf("%s,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64
                ",%" PRIu64 ",%" PRIu64 "\n",
                engine.c_str(), n, m, median, p10, p90, last.rng_draws, last.naive_ops);
    std::fflush(stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sublinear balls-into-bins simulation toolkit"};
  app.require_subcommand(1);

  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::uint64_t seed = 1;
  std::uint64_t trials = 1;
  bool deterministic = false;

  CLI::App* generate = app.add_subcommand("generate", "sample a bin-cardinality vector");
  double kstar_flag = 0.0;
  generate->add_option("-n,--bins", n, "number of bins")->required();
  generate->add_option("-m,--balls", m, "number of balls")->required();
  generate->add_option("--kstar", kstar_flag, "cardinality cutoff (default: heuristic)");
  generate->add_option("--seed", seed, "base seed (trial t uses seed+t)");
  generate->add_option("--trials", trials, "number of output lines");
  generate->add_flag("--deterministic", deterministic, "omit timing fields");

  CLI::App* simulate = app.add_subcommand("simulate", "run a load-balancing process");
  std::string process_text = "two-choice";
  std::string mode = "fast";
  simulate->add_option("--process", process_text,
                       "one-choice | two-choice | threshold:<f> | thinning-count:<f>");
  simulate->add_option("--mode", mode, "fast | naive")
      ->check(CLI::IsMember({"fast", "naive"}));
  simulate->add_option("-n,--bins", n, "number of bins")->required();
  simulate->add_option("-m,--balls", m, "number of balls (sample pairs)")->required();
  simulate->add_option("--seed", seed, "base seed (trial t uses seed+t)");
  simulate->add_option("--trials", trials, "number of output lines");
  simulate->add_flag("--deterministic", deterministic, "omit timing fields");

  CLI::App* validate = app.add_subcommand("validate", "run statistical certification");
  std::vector<std::string> suites;
  std::uint64_t validate_trials = 0;
  std::uint64_t validate_seed = 20260818;
  validate->add_option("--suite", suites, "suites to run (default: all)")
      ->check(CLI::IsMember(binsim::validation_suite_names()));
  validate->add_option("--seed", validate_seed, "suite seed");
  validate->add_option("--trials", validate_trials,
                       "per-cell sample volume (0 = per-check default)");

  CLI::App* bench = app.add_subcommand("bench", "time an engine over a bin-count grid");
  std::string engine;
  std::uint64_t min_n = 1024;
  std::uint64_t max_n = 1048576;
  std::uint64_t points = 5;
  std::uint64_t repeats = 5;
  double balls_factor = 1.0;
  bench->add_option("--engine", engine, "engine to time")
      ->required()
      ->check(CLI::IsMember({"cardinalities-fast", "cardinalities-naive", "twosample-fast",
                             "twosample-naive"}));
  bench->add_option("--min-n", min_n, "smallest bin count");
  bench->add_option("--max-n", max_n, "largest bin count");
  bench->add_option("--points", points, "geometric grid size");
  bench->add_option("--repeats", repeats, "timed repetitions per point");
  bench->add_option("--balls-factor", balls_factor, "balls per bin (m = factor * n)");
  bench->add_option("--seed", seed, "base seed");
  bench->add_flag("--deterministic", deterministic, "print 0 in the timing columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) {
      return cmd_generate(n, m, kstar_flag, seed, trials, deterministic);
    }
    if (simulate->parsed()) {
      return cmd_simulate(parse_process(process_text), mode, n, m, seed, trials,
                          deterministic);
    }
    if (validate->parsed()) {
      if (suites.empty()) suites = binsim::validation_suite_names();
      return cmd_validate(suites, validate_seed, validate_trials);
    }
    if (bench->parsed()) {
      if (min_n < 1 || max_n < min_n || points < 1 || repeats < 1) {
        std::fprintf(stderr, "error: bad bench grid\n");
        return 2;
      }
      return cmd_bench(engine, min_n, max_n, points, repeats, balls_factor, seed,
                       deterministic);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
