#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "syssamp/error.hpp"
#include "syssamp/moments.hpp"

namespace syssamp {

// One of the k systematic samples. `start` is 1-based (1..k); `indices` are
// 0-based positions into the population vectors.
struct SystematicSample {
  std::size_t start = 1;
  std::size_t interval = 1;
  std::vector<std::size_t> indices;
  std::vector<double> y_values;
  std::vector<double> x_values;

  [[nodiscard]] std::size_t size() const noexcept { return indices.size(); }
};

// Respondent split plus the Hansen-Hurwitz subsample of non-respondents.
// All index sets hold population positions.
struct NonResponseOutcome {
  std::vector<std::size_t> respondents;
  std::vector<std::size_t> nonrespondents;
  std::vector<std::size_t> subsample;
  double l_factor = 1.0;  // realized n2/h2; 1 when everybody responded

  [[nodiscard]] std::size_t n1() const noexcept { return respondents.size(); }
  [[nodiscard]] std::size_t n2() const noexcept { return nonrespondents.size(); }
  [[nodiscard]] std::size_t h2() const noexcept { return subsample.size(); }
};

struct NonResponseMechanism {
  enum class Kind { stratum, bernoulli };
  Kind kind = Kind::stratum;
  double rate = 0.0;  // bernoulli only

  static NonResponseMechanism stratum() { return {Kind::stratum, 0.0}; }
  static NonResponseMechanism bernoulli(double rate) { return {Kind::bernoulli, rate}; }
};

inline std::string to_string(NonResponseMechanism::Kind kind) {
  return kind == NonResponseMechanism::Kind::stratum ? "stratum" : "bernoulli";
}

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Per-replication seed: mix64(mix64(mix64(base) ^ replication) ^ start).
// Independent of execution order by construction.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t replication,
                                    std::uint64_t start) noexcept {
  return mix64(mix64(mix64(base_seed) ^ replication) ^ start);
}

inline SystematicSample draw_systematic(const Population& pop, std::size_t n, std::size_t start) {
  const std::size_t N = pop.size();
  const std::size_t k = detail::interval(N, n);
  if (start < 1 || start > k) {
    fail(ErrorCode::out_of_range,
         "systematic start " + std::to_string(start) + " outside 1.." + std::to_string(k));
  }
  SystematicSample s;
  s.start = start;
  s.interval = k;
  s.indices.reserve(n);
  for (std::size_t pos = start - 1; pos < N; pos += k) {
    s.indices.push_back(pos);
    s.y_values.push_back(pop.y[pos]);
    s.x_values.push_back(pop.x[pos]);
  }
  return s;
}

// Number of non-respondents re-contacted: ceil(n2 / L), kept in [1, n2].
inline std::size_t subsample_size(std::size_t n2, double L) {
  if (n2 == 0) return 0;
  // Guard against n2/L landing a few ulps above an integer.
  const double raw = std::ceil(static_cast<double>(n2) / L - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n2);
}

inline NonResponseOutcome realize_nonresponse(const SystematicSample& sample, const Population& pop,
                                              const NonResponseMechanism& mechanism, double L,
                                              std::uint64_t rng_seed) {
  if (!(L >= 1.0) || !std::isfinite(L)) {
    fail(ErrorCode::out_of_range, "sub-sampling factor L must be >= 1");
  }
  std::mt19937_64 rng(rng_seed);
  NonResponseOutcome out;
  if (mechanism.kind == NonResponseMechanism::Kind::stratum) {
    if (!pop.nr_stratum) {
      fail(ErrorCode::invalid_argument, "stratum non-response requires a designated stratum");
    }
    for (auto idx : sample.indices) {
      ((*pop.nr_stratum)[idx] ? out.nonrespondents : out.respondents).push_back(idx);
    }
  } else {
    if (!(mechanism.rate >= 0.0 && mechanism.rate < 1.0)) {
      fail(ErrorCode::out_of_range, "bernoulli non-response rate must lie in [0, 1)");
    }
    std::bernoulli_distribution missing(mechanism.rate);
    for (auto idx : sample.indices) {
      (missing(rng) ? out.nonrespondents : out.respondents).push_back(idx);
    }
  }
  const std::size_t h2 = subsample_size(out.n2(), L);
  if (h2 > 0) {
    std::sample(out.nonrespondents.begin(), out.nonrespondents.end(),
                std::back_inserter(out.subsample), h2, rng);
    out.l_factor = static_cast<double>(out.n2()) / static_cast<double>(h2);
  }
  return out;
}

}  // namespace syssamp
