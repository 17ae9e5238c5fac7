#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "syssamp/error.hpp"
#include "syssamp/estimate.hpp"
#include "syssamp/theory.hpp"

namespace syssamp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// One interval per free constant of the family, in the order given by
// free_constant_names().
struct SearchBox {
  std::vector<Interval> bounds;
};

struct OracleResult {
  EstimatorSpec spec;
  double mse = 0.0;
  int sweeps = 0;
};

struct OracleOptions {
  int grid_points = 201;
  int max_sweeps = 200;
  int max_golden_iterations = 200;
  double constant_tolerance = 1e-10;
};

inline std::vector<std::string> free_constant_names(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::t1: return {"alpha"};
    case EstimatorKind::t2: return {"a", "b", "p"};
    case EstimatorKind::t3: return {"w"};
    case EstimatorKind::t4:
    case EstimatorKind::t5:
    case EstimatorKind::t6: return {"k_main", "k_aux"};
    default: return {};
  }
}

namespace detail {

inline double& coordinate(EstimatorSpec& s, std::size_t i) {
  switch (s.kind) {
    case EstimatorKind::t1: return s.alpha;
    case EstimatorKind::t2: return i == 0 ? s.a : (i == 1 ? s.b : s.p);
    case EstimatorKind::t3: return s.w;
    default: return i == 0 ? s.k_main : s.k_aux;
  }
}

// Golden-section search for the minimum of a unimodal f on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             double tol, int max_iter) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < max_iter && (hi - lo) > tol * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace detail

// Generous default box; independent of the closed-form optimum.
inline SearchBox default_search_box(EstimatorKind kind, const PopulationMoments& m) {
  const double scale = std::abs(m.mean_y / m.mean_x);
  switch (kind) {
    case EstimatorKind::t1: return {{{-50.0, 50.0}}};
    case EstimatorKind::t2: return {{{-50.0, 50.0}, {-50.0, 50.0}, {-4.0, 4.0}}};
    case EstimatorKind::t3: return {{{-50.0, 50.0}}};
    case EstimatorKind::t4:
    case EstimatorKind::t5:
    case EstimatorKind::t6: return {{{-4.0, 4.0}, {-50.0 * scale, 50.0 * scale}}};
    default: return {};
  }
}

// Minimizes the first-order MSE over the free constants of `start.kind`,
// starting from `start` (clamped into the box). Constants that are not free
// (the base of a shrinkage family) stay as given. Deterministic: a grid scan
// on the first sweep, then golden-section line searches per coordinate until
// a sweep no longer moves any constant.
inline OracleResult numeric_min_oracle(const EstimatorSpec& start, const DerivedCoefficients& d,
                                       const PopulationMoments& m, double K, double L,
                                       const SearchBox& box, const OracleOptions& opt = {}) {
  const auto names = free_constant_names(start.kind);
  if (box.bounds.size() != names.size()) {
    fail(ErrorCode::invalid_argument, "search box has " + std::to_string(box.bounds.size()) +
                                          " intervals, family " +
                                          std::string(to_string(start.kind)) + " has " +
                                          std::to_string(names.size()) + " free constants");
  }
  for (const auto& iv : box.bounds) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi)) {
      fail(ErrorCode::invalid_argument, "search box bounds must be finite with lo < hi");
    }
  }

  EstimatorSpec x = start;
  auto objective = [&](const EstimatorSpec& s) {
    const double v = mse_first_order(s, d, m, K, L).mse;
    if (!std::isfinite(v)) {
      fail(ErrorCode::non_finite, "oracle: non-finite MSE inside the search box for " +
                                      std::string(to_string(s.kind)));
    }
    return v;
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto& c = detail::coordinate(x, i);
    c = std::clamp(c, box.bounds[i].lo, box.bounds[i].hi);
  }
  double best = objective(x);

  OracleResult result;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    bool moved = false;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const Interval iv = box.bounds[i];
      const double spacing = (iv.hi - iv.lo) / static_cast<double>(opt.grid_points - 1);
      EstimatorSpec trial = x;
      double& slot = detail::coordinate(trial, i);
      auto along = [&](double v) {
        slot = v;
        return objective(trial);
      };
      const double current = detail::coordinate(x, i);
      double centre = current;
      if (sweep == 0) {
        double best_grid = best;
        for (int g = 0; g < opt.grid_points; ++g) {
          const double v = iv.lo + spacing * g;
          const double f = along(v);
          if (f < best_grid) {
            best_grid = f;
            centre = v;
          }
        }
      }
      double half = spacing;
      double candidate = centre;
      for (int expand = 0; expand < 60; ++expand) {
        const double lo = std::max(iv.lo, centre - half);
        const double hi = std::min(iv.hi, centre + half);
        candidate = detail::golden_section(along, lo, hi, opt.constant_tolerance,
                                           opt.max_golden_iterations);
        const bool at_lo = candidate - lo < 1e-3 * half && lo > iv.lo;
        const bool at_hi = hi - candidate < 1e-3 * half && hi < iv.hi;
        if (!at_lo && !at_hi) break;
        centre = candidate;
        half *= 2.0;
      }
      const double f = along(candidate);
      if (f < best) {
        const double step = std::abs(candidate - current);
        if (step > opt.constant_tolerance * std::max(1.0, std::abs(current))) moved = true;
        best = f;
        detail::coordinate(x, i) = candidate;
      }
    }
    result.sweeps = sweep + 1;
    if (!moved) break;
  }
  result.spec = x;
  result.mse = best;
  return result;
}

// Conventional starting constants: ratio-type base, unit shrinkage. For the
// shrinkage families the base stays at the matching constant.
inline EstimatorSpec oracle_start(EstimatorKind family, const DerivedCoefficients& d) {
  switch (family) {
    case EstimatorKind::t1: return EstimatorSpec::t1(0.0);
    case EstimatorKind::t2: return EstimatorSpec::t2(1.0, 0.0, 1.0);
    case EstimatorKind::t3: return EstimatorSpec::t3(1.0);
    case EstimatorKind::t4: return EstimatorSpec::t4(0.5 * (1.0 - matching_coefficient(d)), 1.0, 0.0);
    case EstimatorKind::t5: {
      const auto b = t2_with_zero_a(matching_coefficient(d));
      return EstimatorSpec::t5(b.a, b.b, b.p, 1.0, 0.0);
    }
    case EstimatorKind::t6: return EstimatorSpec::t6(matching_coefficient(d), 1.0, 0.0);
    case EstimatorKind::hh_mean: return EstimatorSpec::hh_mean();
    case EstimatorKind::ratio: return EstimatorSpec::ratio();
    case EstimatorKind::product: return EstimatorSpec::product();
    case EstimatorKind::regression: return EstimatorSpec::regression();
  }
  return EstimatorSpec::hh_mean();
}

inline OracleResult numeric_min_oracle(EstimatorKind family, const DerivedCoefficients& d,
                                       const PopulationMoments& m, double K, double L,
                                       const SearchBox& box, const OracleOptions& opt = {}) {
  return numeric_min_oracle(oracle_start(family, d), d, m, K, L, box, opt);
}

}  // namespace syssamp
