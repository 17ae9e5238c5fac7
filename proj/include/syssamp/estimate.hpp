#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "syssamp/design.hpp"
#include "syssamp/error.hpp"
#include "syssamp/moments.hpp"

namespace syssamp {

enum class EstimatorKind { hh_mean, ratio, product, regression, t1, t2, t3, t4, t5, t6 };

inline constexpr std::array<EstimatorKind, 10> all_estimator_kinds{
    EstimatorKind::hh_mean, EstimatorKind::ratio, EstimatorKind::product,
    EstimatorKind::regression, EstimatorKind::t1, EstimatorKind::t2,
    EstimatorKind::t3, EstimatorKind::t4, EstimatorKind::t5,
    EstimatorKind::t6};

constexpr std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::hh_mean: return "hh_mean";
    case EstimatorKind::ratio: return "ratio";
    case EstimatorKind::product: return "product";
    case EstimatorKind::regression: return "regression";
    case EstimatorKind::t1: return "t1";
    case EstimatorKind::t2: return "t2";
    case EstimatorKind::t3: return "t3";
    case EstimatorKind::t4: return "t4";
    case EstimatorKind::t5: return "t5";
    case EstimatorKind::t6: return "t6";
  }
  return "?";
}

inline std::optional<EstimatorKind> parse_estimator_kind(std::string_view name) {
  if (name == "hh") return EstimatorKind::hh_mean;
  for (auto kind : all_estimator_kinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

// Shrinkage families wrap a base estimator: t4 -> t1, t5 -> t2, t6 -> t3.
constexpr bool is_shrinkage(EstimatorKind kind) {
  return kind == EstimatorKind::t4 || kind == EstimatorKind::t5 || kind == EstimatorKind::t6;
}

constexpr EstimatorKind base_family(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::t4: return EstimatorKind::t1;
    case EstimatorKind::t5: return EstimatorKind::t2;
    case EstimatorKind::t6: return EstimatorKind::t3;
    default: return kind;
  }
}

// Estimator family plus its constants. Fields a family does not use are ignored.
//   t1: alpha          t2: a, b, p          t3: w
//   t4: alpha, k_main, k_aux   t5: a, b, p, k_main, k_aux   t6: w, k_main, k_aux
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::hh_mean;
  double alpha = 0.0;
  double a = 1.0;
  double b = 0.0;
  double p = 1.0;
  double w = 0.0;
  double k_main = 1.0;
  double k_aux = 0.0;

  static EstimatorSpec hh_mean() { return {EstimatorKind::hh_mean}; }
  static EstimatorSpec ratio() { return {EstimatorKind::ratio}; }
  static EstimatorSpec product() { return {EstimatorKind::product}; }
  static EstimatorSpec regression() { return {EstimatorKind::regression}; }
  static EstimatorSpec t1(double alpha) {
    EstimatorSpec s{EstimatorKind::t1};
    s.alpha = alpha;
    return s;
  }
  static EstimatorSpec t2(double a, double b, double p) {
    EstimatorSpec s{EstimatorKind::t2};
    s.a = a;
    s.b = b;
    s.p = p;
    return s;
  }
  static EstimatorSpec t3(double w) {
    EstimatorSpec s{EstimatorKind::t3};
    s.w = w;
    return s;
  }
  static EstimatorSpec t4(double alpha, double k_main, double k_aux) {
    auto s = t1(alpha);
    s.kind = EstimatorKind::t4;
    s.k_main = k_main;
    s.k_aux = k_aux;
    return s;
  }
  static EstimatorSpec t5(double a, double b, double p, double k_main, double k_aux) {
    auto s = t2(a, b, p);
    s.kind = EstimatorKind::t5;
    s.k_main = k_main;
    s.k_aux = k_aux;
    return s;
  }
  static EstimatorSpec t6(double w, double k_main, double k_aux) {
    auto s = t3(w);
    s.kind = EstimatorKind::t6;
    s.k_main = k_main;
    s.k_aux = k_aux;
    return s;
  }

  // The same constants seen as the base family (shrinkage pair dropped).
  [[nodiscard]] EstimatorSpec base() const {
    EstimatorSpec s = *this;
    s.kind = base_family(kind);
    s.k_main = 1.0;
    s.k_aux = 0.0;
    return s;
  }

  [[nodiscard]] bool constants_finite() const {
    return std::isfinite(alpha) && std::isfinite(a) && std::isfinite(b) && std::isfinite(p) &&
           std::isfinite(w) && std::isfinite(k_main) && std::isfinite(k_aux);
  }

  friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

struct Estimate {
  double value = 0.0;
  double y_hh = 0.0;   // Hansen-Hurwitz mean of y
  double x_bar = 0.0;  // sample mean of x
  std::optional<double> slope;  // regression estimator only
};

inline Estimate hh_mean(const SystematicSample& sample, const NonResponseOutcome& outcome,
                        const Population& pop) {
  const std::size_t n = sample.size();
  if (outcome.n1() == 0 && outcome.h2() == 0) {
    fail(ErrorCode::no_measured_units, "Hansen-Hurwitz mean: no measured units in the sample");
  }
  if (outcome.n2() > 0 && outcome.h2() == 0) {
    fail(ErrorCode::no_measured_units, "Hansen-Hurwitz mean: non-respondents were not subsampled");
  }
  double resp_sum = 0.0;
  for (auto idx : outcome.respondents) resp_sum += pop.y[idx];
  double sub_sum = 0.0;
  for (auto idx : outcome.subsample) sub_sum += pop.y[idx];
  double total = resp_sum;
  if (outcome.h2() > 0) {
    total += static_cast<double>(outcome.n2()) * (sub_sum / static_cast<double>(outcome.h2()));
  }
  Estimate e;
  e.value = total / static_cast<double>(n);
  e.y_hh = e.value;
  return e;
}

inline double aux_mean(const SystematicSample& sample) {
  double s = 0.0;
  for (double v : sample.x_values) s += v;
  return s / static_cast<double>(sample.size());
}

namespace detail {

inline double checked_div(double num, double den, const char* what) {
  if (den == 0.0) fail(ErrorCode::domain, std::string(what) + ": zero denominator");
  return num / den;
}

inline double checked_pow(double base, double exponent, const char* what) {
  if (base < 0.0 && exponent != std::floor(exponent)) {
    fail(ErrorCode::domain, std::string(what) + ": negative base under fractional exponent");
  }
  if (base == 0.0 && exponent < 0.0) {
    fail(ErrorCode::domain, std::string(what) + ": zero base under negative exponent");
  }
  return std::pow(base, exponent);
}

// Least-squares slope of y on x over respondents plus subsampled non-respondents.
inline double measured_slope(const NonResponseOutcome& outcome, const Population& pop) {
  std::vector<std::size_t> measured = outcome.respondents;
  measured.insert(measured.end(), outcome.subsample.begin(), outcome.subsample.end());
  if (measured.size() < 2) {
    fail(ErrorCode::domain, "regression estimator: fewer than two measured units for the slope");
  }
  double mx = 0.0;
  double my = 0.0;
  for (auto idx : measured) {
    mx += pop.x[idx];
    my += pop.y[idx];
  }
  mx /= static_cast<double>(measured.size());
  my /= static_cast<double>(measured.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (auto idx : measured) {
    sxy += (pop.x[idx] - mx) * (pop.y[idx] - my);
    sxx += (pop.x[idx] - mx) * (pop.x[idx] - mx);
  }
  return checked_div(sxy, sxx, "regression estimator slope");
}

// Base-family multipliers of y_hh given the sample and population x means.
inline double t1_factor(double alpha, double x_bar, double x_pop) {
  const double gap = x_pop - x_bar;
  return checked_div(x_pop - alpha * gap, x_bar + alpha * gap, "t1 ratio-type factor");
}

inline double t2_factor(double a, double b, double p, double x_bar, double x_pop) {
  const double gap = x_pop - x_bar;
  const double base = checked_div(x_bar + a * gap, x_bar + b * gap, "t2 ratio-type factor");
  return checked_pow(base, p, "t2 power transform");
}

inline double t3_factor(double w, double x_bar, double x_pop) {
  const double ratio = checked_div(x_bar, x_pop, "t3 exponential-type factor");
  return 2.0 - checked_pow(ratio, w, "t3 power transform");
}

}  // namespace detail

inline Estimate evaluate(const EstimatorSpec& spec, const SystematicSample& sample,
                         const NonResponseOutcome& outcome, const Population& pop,
                         double x_bar_pop) {
  if (!spec.constants_finite()) {
    fail(ErrorCode::non_finite, std::string(to_string(spec.kind)) + ": non-finite constant");
  }
  Estimate e = hh_mean(sample, outcome, pop);
  const double y = e.y_hh;
  const double xb = aux_mean(sample);
  e.x_bar = xb;
  const double gap = x_bar_pop - xb;
  switch (spec.kind) {
    case EstimatorKind::hh_mean:
      e.value = y;
      break;
    case EstimatorKind::ratio:
      e.value = y * detail::checked_div(x_bar_pop, xb, "ratio estimator");
      break;
    case EstimatorKind::product:
      e.value = y * detail::checked_div(xb, x_bar_pop, "product estimator");
      break;
    case EstimatorKind::regression: {
      const double slope = detail::measured_slope(outcome, pop);
      e.slope = slope;
      e.value = y + slope * gap;
      break;
    }
    case EstimatorKind::t1:
      e.value = y * detail::t1_factor(spec.alpha, xb, x_bar_pop);
      break;
    case EstimatorKind::t2:
      e.value = y * detail::t2_factor(spec.a, spec.b, spec.p, xb, x_bar_pop);
      break;
    case EstimatorKind::t3:
      e.value = y * detail::t3_factor(spec.w, xb, x_bar_pop);
      break;
    case EstimatorKind::t4:
      e.value = spec.k_main * y * detail::t1_factor(spec.alpha, xb, x_bar_pop) + spec.k_aux * gap;
      break;
    case EstimatorKind::t5:
      e.value = spec.k_main * y * detail::t2_factor(spec.a, spec.b, spec.p, xb, x_bar_pop) +
                spec.k_aux * gap;
      break;
    case EstimatorKind::t6:
      e.value = spec.k_main * y * detail::t3_factor(spec.w, xb, x_bar_pop) + spec.k_aux * gap;
      break;
  }
  if (!std::isfinite(e.value)) {
    fail(ErrorCode::non_finite, std::string(to_string(spec.kind)) + ": non-finite estimate");
  }
  return e;
}

}  // namespace syssamp
