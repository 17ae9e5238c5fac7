#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "syssamp/design.hpp"
#include "syssamp/error.hpp"
#include "syssamp/estimate.hpp"
#include "syssamp/moments.hpp"
#include "syssamp/theory.hpp"

namespace syssamp {

// Pairwise summation; result depends only on the order of `v`.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double e : v) s += e;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

// ---------------------------------------------------------------------------
// Synthetic populations

struct SynthesisOptions {
  // Arrange units so that each systematic sample holds units of similar level,
  // which is what ordering the frame by the auxiliary variable does. Without
  // it the units are placed in random order and the intraclass correlation
  // is close to zero.
  bool sorted = true;
  double mean_y = 50.0;
  double sd_y = 2.5;
  double mean_x = 100.0;
  double sd_x = 5.0;
  int max_retries = 50;
};

// Builds N = n*k units whose unit-level correlation is exactly target_rho and
// whose intraclass correlations (y and x) are exactly target_intra when
// sorted. Each value is a between-sample level plus a within-sample
// deviation. The levels come in mirrored pairs so odd moments of the
// sample means vanish, and the y and x components are orthogonalized both
// across samples and within every sample, so the correlation of the sample
// means equals the unit-level correlation.
inline Population synthesize_population(std::size_t N, std::size_t n, double target_rho,
                                        double target_intra, double nr_fraction,
                                        std::uint64_t seed, const SynthesisOptions& opt = {}) {
  const std::size_t k = detail::interval(N, n);
  if (n < 3 || k < 2) {
    fail(ErrorCode::invalid_argument, "synthetic population needs n >= 3 and N/n >= 2");
  }
  if (!(std::abs(target_rho) < 1.0)) fail(ErrorCode::out_of_range, "target rho must satisfy |rho| < 1");
  const double lower = -1.0 / static_cast<double>(n - 1);
  if (!(target_intra > lower && target_intra < 1.0)) {
    fail(ErrorCode::out_of_range, "target intraclass correlation must lie in (-1/(n-1), 1)");
  }
  if (!(nr_fraction >= 0.0 && nr_fraction < 1.0)) {
    fail(ErrorCode::out_of_range, "non-response fraction must lie in [0, 1)");
  }
  if (!(opt.sd_x > 0.0) || !(opt.sd_y > 0.0)) {
    fail(ErrorCode::invalid_argument, "synthetic standard deviations must be positive");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const double f = 1.0 + static_cast<double>(n - 1) * target_intra;

  for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
    // Between-sample levels, mirrored.
    std::vector<double> bx(k, 0.0), be(k, 0.0);
    for (std::size_t i = 0; i < k / 2; ++i) {
      bx[i] = gauss(rng);
      be[i] = gauss(rng);
      bx[k - 1 - i] = -bx[i];
      be[k - 1 - i] = -be[i];
    }
    const double bxx = std::inner_product(bx.begin(), bx.end(), bx.begin(), 0.0);
    const double bxe = std::inner_product(bx.begin(), bx.end(), be.begin(), 0.0);
    for (std::size_t i = 0; i < k; ++i) be[i] -= bxe / bxx * bx[i];
    const double bee = std::inner_product(be.begin(), be.end(), be.begin(), 0.0);
    if (!(bxx > 0.0) || !(bee > 0.0)) continue;

    // Within-sample deviations: centered per sample, e orthogonal to x per sample.
    std::vector<double> wx(N), we(N);
    double wxx_total = 0.0;
    double wee_total = 0.0;
    bool degenerate = false;
    for (std::size_t i = 0; i < k; ++i) {
      double mx = 0.0, me = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        wx[i * n + j] = gauss(rng);
        we[i * n + j] = gauss(rng);
        mx += wx[i * n + j];
        me += we[i * n + j];
      }
      mx /= static_cast<double>(n);
      me /= static_cast<double>(n);
      double sxx = 0.0, sxe = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        wx[i * n + j] -= mx;
        we[i * n + j] -= me;
        sxx += wx[i * n + j] * wx[i * n + j];
        sxe += wx[i * n + j] * we[i * n + j];
      }
      if (!(sxx > 0.0)) {
        degenerate = true;
        break;
      }
      double see = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        we[i * n + j] -= sxe / sxx * wx[i * n + j];
        see += we[i * n + j] * we[i * n + j];
      }
      wxx_total += sxx;
      wee_total += see;
    }
    if (degenerate || !(wee_total > 0.0)) continue;
    const double e_scale = std::sqrt(wxx_total / wee_total);
    for (auto& v : we) v *= e_scale;

    // Between sum of squares B solving n^2 B = f (n B + W).
    const double nn = static_cast<double>(n);
    const double target_b = f * wxx_total / (nn * (nn - f));
    const double sx_scale = std::sqrt(target_b / bxx);
    const double se_scale = std::sqrt(target_b / bee);

    std::vector<double> zx(N), ze(N);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t pos = i + j * k;
        zx[pos] = bx[i] * sx_scale + wx[i * n + j];
        ze[pos] = be[i] * se_scale + we[i * n + j];
      }
    }
    const double total_ss = nn * target_b + wxx_total;
    const double sd_z = std::sqrt(total_ss / static_cast<double>(N - 1));

    Population pop;
    pop.x.resize(N);
    pop.y.resize(N);
    const double tail = std::sqrt(1.0 - target_rho * target_rho);
    for (std::size_t i = 0; i < N; ++i) {
      const double ux = zx[i] / sd_z;
      const double ue = ze[i] / sd_z;
      pop.x[i] = opt.mean_x + opt.sd_x * ux;
      pop.y[i] = opt.mean_y + opt.sd_y * (target_rho * ux + tail * ue);
    }
    if (!opt.sorted) {
      std::vector<std::size_t> order(N);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      Population shuffled;
      for (auto idx : order) {
        shuffled.y.push_back(pop.y[idx]);
        shuffled.x.push_back(pop.x[idx]);
      }
      pop = std::move(shuffled);
    }
    if (std::any_of(pop.x.begin(), pop.x.end(), [](double v) { return v <= 0.0; })) continue;

    const auto m = compute_moments(pop, n);
    if (std::abs(m.rho - target_rho) > 0.02) continue;

    if (nr_fraction > 0.0) {
      const auto members = static_cast<std::size_t>(std::llround(nr_fraction * static_cast<double>(N)));
      if (members == 0 || members >= N) {
        fail(ErrorCode::out_of_range, "non-response fraction leaves an empty group");
      }
      std::vector<std::size_t> all(N);
      std::iota(all.begin(), all.end(), std::size_t{0});
      std::vector<std::size_t> chosen;
      std::sample(all.begin(), all.end(), std::back_inserter(chosen), members, rng);
      std::vector<bool> flags(N, false);
      for (auto idx : chosen) flags[idx] = true;
      pop.nr_stratum = std::move(flags);
    }
    return pop;
  }
  fail(ErrorCode::domain, "synthetic population: targets infeasible after " +
                              std::to_string(opt.max_retries) +
                              " attempts (auxiliary values must stay positive)");
}

// ---------------------------------------------------------------------------
// Exact enumeration

// Variance of the plain sample mean over all k systematic samples.
inline double enumerate_variance(const Population& pop, std::size_t n) {
  pop.validate();
  const std::size_t N = pop.size();
  const std::size_t k = detail::interval(N, n);
  const double mean = detail::mean(pop.y);
  double acc = 0.0;
  for (std::size_t start = 0; start < k; ++start) {
    double s = 0.0;
    for (std::size_t j = start; j < N; j += k) s += pop.y[j];
    const double dev = s / static_cast<double>(n) - mean;
    acc += dev * dev;
  }
  return acc / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Replications

enum class StartSelection { uniform_random, exhaustive_cycle };

inline std::string to_string(StartSelection s) {
  return s == StartSelection::uniform_random ? "uniform_random" : "exhaustive_cycle";
}

struct SimulationConfig {
  std::size_t n = 0;  // systematic sample size
  std::size_t replications = 1;
  std::uint64_t base_seed = 0;
  NonResponseMechanism::Kind mechanism = NonResponseMechanism::Kind::stratum;
  // Non-response rate. Drives the bernoulli mechanism directly; under the
  // stratum mechanism the realized rate is the stratum share and K is unused.
  double K = 0.0;
  double L = 1.0;
  std::vector<EstimatorSpec> estimators;
  StartSelection start_selection = StartSelection::exhaustive_cycle;
  std::optional<std::string> trace_path;
  unsigned threads = 1;  // 0 = hardware concurrency
};

struct EmpiricalEntry {
  EstimatorSpec estimator;
  double empirical_bias = 0.0;
  double empirical_mse = 0.0;
  double monte_carlo_se = 0.0;
  MseReport theoretical;
  double ratio = 0.0;  // empirical / theoretical MSE
  std::size_t failures = 0;
};

struct EmpiricalReport {
  std::size_t replications = 0;
  std::uint64_t base_seed = 0;
  NonResponseMechanism::Kind mechanism = NonResponseMechanism::Kind::stratum;
  StartSelection start_selection = StartSelection::exhaustive_cycle;
  double theory_k_rate = 0.0;
  double l_factor = 1.0;
  double true_mean = 0.0;
  PopulationMoments theory_moments;
  std::vector<EmpiricalEntry> entries;
};

// Moments and K that the first-order theory should be evaluated at for a
// given mechanism. Bernoulli non-response makes the non-response group a
// random subset, whose mean square is S_Y^2.
inline std::pair<PopulationMoments, double> theory_inputs(const Population& pop,
                                                          const SimulationConfig& cfg) {
  auto m = compute_moments(pop, cfg.n);
  if (cfg.mechanism == NonResponseMechanism::Kind::bernoulli) {
    m.s2_y2 = m.s2_y;
    return {m, cfg.K};
  }
  if (!pop.nr_stratum) {
    fail(ErrorCode::invalid_argument, "stratum non-response requires a designated stratum");
  }
  return {m, static_cast<double>(pop.stratum_size()) / static_cast<double>(pop.size())};
}

inline unsigned resolve_threads(unsigned requested) {
  unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* env = std::getenv("SYSSAMP_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) t = std::min<unsigned>(t, static_cast<unsigned>(cap));
  }
  return t;
}

inline EmpiricalReport run_replications(const Population& pop, const SimulationConfig& cfg) {
  if (cfg.replications < 1) fail(ErrorCode::invalid_argument, "replications must be >= 1");
  if (!(cfg.K >= 0.0 && cfg.K < 1.0)) fail(ErrorCode::out_of_range, "K must lie in [0, 1)");
  if (!(cfg.L >= 1.0)) fail(ErrorCode::out_of_range, "L must be >= 1");
  if (cfg.estimators.empty()) fail(ErrorCode::invalid_argument, "no estimators to simulate");

  const auto [tm, theory_k] = theory_inputs(pop, cfg);
  const auto d = derive_coefficients(tm);
  const std::size_t k = tm.k;
  const double true_mean = tm.mean_y;
  const double x_bar_pop = tm.mean_x;
  const NonResponseMechanism mechanism{cfg.mechanism, cfg.K};

  const std::size_t R = cfg.replications;
  const std::size_t E = cfg.estimators.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values(E * R, nan);  // [estimator][replication]
  struct TraceRow {
    std::size_t start, n1, n2, h2;
  };
  std::vector<TraceRow> trace(cfg.trace_path ? R : 0);
  std::vector<std::string> first_error(E);

  auto run_range = [&](std::size_t lo, std::size_t hi, std::vector<std::string>& errors) {
    for (std::size_t r = lo; r < hi; ++r) {
      std::size_t start = 0;
      if (cfg.start_selection == StartSelection::exhaustive_cycle) {
        start = r % k + 1;
      } else {
        std::mt19937_64 pick(derive_seed(cfg.base_seed, r, 0));
        start = std::uniform_int_distribution<std::size_t>(1, k)(pick);
      }
      const auto sample = draw_systematic(pop, cfg.n, start);
      const auto outcome =
          realize_nonresponse(sample, pop, mechanism, cfg.L, derive_seed(cfg.base_seed, r, start));
      if (!trace.empty()) trace[r] = {start, outcome.n1(), outcome.n2(), outcome.h2()};
      for (std::size_t e = 0; e < E; ++e) {
        try {
          values[e * R + r] = evaluate(cfg.estimators[e], sample, outcome, pop, x_bar_pop).value;
        } catch (const Error& err) {
          if (errors[e].empty()) errors[e] = err.what();
        }
      }
    }
  };

  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(cfg.threads), R));
  if (threads <= 1) {
    run_range(0, R, first_error);
  } else {
    std::vector<std::vector<std::string>> errs(threads, std::vector<std::string>(E));
    std::vector<std::thread> pool;
    const std::size_t chunk = (R + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = std::min(R, t * chunk);
      const std::size_t hi = std::min(R, lo + chunk);
      pool.emplace_back([&, lo, hi, t] { run_range(lo, hi, errs[t]); });
    }
    for (auto& th : pool) th.join();
    for (std::size_t e = 0; e < E; ++e) {
      for (unsigned t = 0; t < threads && first_error[e].empty(); ++t) first_error[e] = errs[t][e];
    }
  }

  EmpiricalReport rep;
  rep.replications = R;
  rep.base_seed = cfg.base_seed;
  rep.mechanism = cfg.mechanism;
  rep.start_selection = cfg.start_selection;
  rep.theory_k_rate = theory_k;
  rep.l_factor = cfg.L;
  rep.true_mean = true_mean;
  rep.theory_moments = tm;

  for (std::size_t e = 0; e < E; ++e) {
    std::vector<double> est;
    std::vector<double> sq;
    est.reserve(R);
    sq.reserve(R);
    for (std::size_t r = 0; r < R; ++r) {
      const double v = values[e * R + r];
      if (std::isnan(v)) continue;
      est.push_back(v);
      sq.push_back((v - true_mean) * (v - true_mean));
    }
    const std::size_t failures = R - est.size();
    if (static_cast<double>(failures) > 0.01 * static_cast<double>(R) || est.empty()) {
      fail(ErrorCode::domain, std::string(to_string(cfg.estimators[e].kind)) + ": " +
                                  std::to_string(failures) + " of " + std::to_string(R) +
                                  " replications failed (first: " + first_error[e] + ")");
    }
    const double count = static_cast<double>(est.size());
    EmpiricalEntry entry;
    entry.estimator = cfg.estimators[e];
    entry.failures = failures;
    entry.empirical_bias = pairwise_sum(est) / count - true_mean;
    entry.empirical_mse = pairwise_sum(sq) / count;
    if (est.size() >= 2) {
      std::vector<double> dev(sq.size());
      for (std::size_t i = 0; i < sq.size(); ++i) {
        dev[i] = (sq[i] - entry.empirical_mse) * (sq[i] - entry.empirical_mse);
      }
      entry.monte_carlo_se = std::sqrt(pairwise_sum(dev) / (count - 1.0) / count);
    }
    entry.theoretical = mse_first_order(cfg.estimators[e], d, tm, theory_k, cfg.L);
    entry.ratio = entry.empirical_mse / entry.theoretical.mse;
    rep.entries.push_back(entry);
  }

  if (cfg.trace_path) {
    std::ofstream out(*cfg.trace_path);
    if (!out) fail(ErrorCode::io, "cannot write trace file '" + *cfg.trace_path + "'");
    out.precision(17);
    out << "replication,start,n1,n2,h2";
    for (const auto& s : cfg.estimators) out << ',' << to_string(s.kind);
    out << '\n';
    for (std::size_t r = 0; r < R; ++r) {
      out << r << ',' << trace[r].start << ',' << trace[r].n1 << ',' << trace[r].n2 << ','
          << trace[r].h2;
      for (std::size_t e = 0; e < E; ++e) out << ',' << values[e * R + r];
      out << '\n';
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Theory vs simulation

struct ComparisonEntry {
  EstimatorSpec estimator;
  double empirical_mse = 0.0;
  double theoretical_mse = 0.0;
  double z_score = 0.0;
  double rel_gap = 0.0;
  bool pass = false;
};

struct Comparison {
  std::vector<ComparisonEntry> entries;
  double z_limit = 3.0;
  double rel_limit = 0.05;

  [[nodiscard]] bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
  }
};

// Passes an estimator when |z| <= 3 or the relative gap is <= 5%, whichever
// is looser.
inline Comparison compare_theory_empirical(const EmpiricalReport& emp,
                                           std::span<const MseReport> theory) {
  if (theory.size() != emp.entries.size()) {
    fail(ErrorCode::invalid_argument, "comparison: estimator lists differ in length");
  }
  Comparison cmp;
  for (std::size_t i = 0; i < theory.size(); ++i) {
    const auto& e = emp.entries[i];
    if (e.estimator.kind != theory[i].estimator.kind) {
      fail(ErrorCode::invalid_argument, "comparison: estimator lists do not match at position " +
                                            std::to_string(i));
    }
    ComparisonEntry c;
    c.estimator = e.estimator;
    c.empirical_mse = e.empirical_mse;
    c.theoretical_mse = theory[i].mse;
    const double gap = e.empirical_mse - theory[i].mse;
    if (e.monte_carlo_se > 0.0) {
      c.z_score = gap / e.monte_carlo_se;
    } else {
      c.z_score = gap == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), gap);
    }
    c.rel_gap = theory[i].mse != 0.0 ? std::abs(gap) / std::abs(theory[i].mse)
                                     : (gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    c.pass = std::abs(c.z_score) <= cmp.z_limit || c.rel_gap <= cmp.rel_limit;
    cmp.entries.push_back(c);
  }
  return cmp;
}

inline Comparison compare_theory_empirical(const EmpiricalReport& emp) {
  std::vector<MseReport> theory;
  for (const auto& e : emp.entries) theory.push_back(e.theoretical);
  return compare_theory_empirical(emp, theory);
}

}  // namespace syssamp
