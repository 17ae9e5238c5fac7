#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "syssamp/error.hpp"
#include "syssamp/estimate.hpp"
#include "syssamp/moments.hpp"

namespace syssamp {

// Extra variance from sub-sampling non-respondents: ((L-1)/n) K S_Y2^2.
struct NrTerm {
  double k_rate = 0.0;
  double l_factor = 1.0;
  double value = 0.0;
};

struct ADCoefficients {
  double a_coef = 0.0;  // second-order coefficient of e1^2
  double d_coef = 0.0;  // first-order coefficient, (a-b)p
};

// Quadratic form of a shrinkage estimator K*T + K'*(X - x):
//   MSE = Y^2 [K^2 a_self - 2K a_lin + 1] + K'^2 X^2 a_aux - 2 K K' X Y a_cross
// with the non-response load already folded into a_self.
struct ShrinkageCoefficients {
  double a_self = 0.0;
  double a_aux = 0.0;
  double a_cross = 0.0;
  double a_lin = 0.0;
};

enum class ConstantsProvenance { closed_form, numeric_optimum, user_supplied };

constexpr std::string_view to_string(ConstantsProvenance p) {
  switch (p) {
    case ConstantsProvenance::closed_form: return "closed_form";
    case ConstantsProvenance::numeric_optimum: return "numeric_optimum";
    case ConstantsProvenance::user_supplied: return "user_supplied";
  }
  return "?";
}

struct MseReport {
  EstimatorSpec estimator;
  double bias = 0.0;
  double mse = 0.0;
  double sampling_component = 0.0;
  double nr_component = 0.0;
  ConstantsProvenance constants_provenance = ConstantsProvenance::user_supplied;
};

namespace detail {

inline void check_rates(double K, double L) {
  if (!(K >= 0.0 && K < 1.0)) fail(ErrorCode::out_of_range, "non-response rate K must lie in [0, 1)");
  if (!(L >= 1.0) || !std::isfinite(L)) fail(ErrorCode::out_of_range, "sub-sampling factor L must be >= 1");
}

inline double intraclass_factor_y(const PopulationMoments& m) {
  const double f = 1.0 + static_cast<double>(m.n - 1) * m.rho_y_intra;
  if (f < -1e-12) {
    fail(ErrorCode::negative_intraclass_factor,
         "variance of the Hansen-Hurwitz mean: intraclass factor 1+(n-1)rho_y is negative");
  }
  return std::max(f, 0.0);
}

inline void require_auxiliary(const DerivedCoefficients& d) {
  if (d.c1 == 0.0) {
    fail(ErrorCode::singular,
         "optimum constants undefined: auxiliary coefficient of variation c1 is zero");
  }
}

}  // namespace detail

inline NrTerm nr_term(const PopulationMoments& m, double K, double L) {
  detail::check_rates(K, L);
  NrTerm t{K, L, 0.0};
  if (K == 0.0 || L == 1.0) return t;
  if (!m.s2_y2) {
    fail(ErrorCode::missing_value,
         "non-response term needs s2_y2 (mean square of the non-response group)");
  }
  t.value = (L - 1.0) / static_cast<double>(m.n) * K * *m.s2_y2;
  return t;
}

// Variance of the Hansen-Hurwitz mean under systematic sampling.
inline double variance_hh(const PopulationMoments& m, double K, double L) {
  const double theta = (static_cast<double>(m.N) - 1.0) /
                       (static_cast<double>(m.n) * static_cast<double>(m.N));
  return theta * detail::intraclass_factor_y(m) * m.s2_y + nr_term(m, K, L).value;
}

inline ADCoefficients ad_coefficients(double a, double b, double p) {
  const double ua = 1.0 - a;
  const double ub = 1.0 - b;
  ADCoefficients out;
  out.a_coef = p * (p + 1.0) / 2.0 * ub * ub - p * p * ua * ub + p * (p - 1.0) / 2.0 * ua * ua;
  out.d_coef = (a - b) * p;
  return out;
}

inline ShrinkageCoefficients shrinkage_coefficients(const EstimatorSpec& spec,
                                                    const DerivedCoefficients& d,
                                                    const PopulationMoments& m, double K, double L) {
  if (!is_shrinkage(spec.kind)) {
    fail(ErrorCode::invalid_argument,
         std::string(to_string(spec.kind)) + " is not a shrinkage family");
  }
  const double th = d.theta;
  const double c = d.c1 * d.c1;
  const double c0s = d.c0 * d.c0;
  const double r = d.cross;
  const double load = nr_term(m, K, L).value / (m.mean_y * m.mean_y);
  ShrinkageCoefficients s;
  s.a_aux = th * c;
  switch (spec.kind) {
    case EstimatorKind::t4: {
      const double al = spec.alpha;
      const double g = 1.0 - 2.0 * al;
      s.a_self = 1.0 + th * ((3.0 - 10.0 * al + 8.0 * al * al) * c + c0s - 4.0 * g * r);
      s.a_cross = th * (-g * c + r);
      s.a_lin = 1.0 + th * ((1.0 - 3.0 * al + 2.0 * al * al) * c - g * r);
      break;
    }
    case EstimatorKind::t5: {
      const auto ad = ad_coefficients(spec.a, spec.b, spec.p);
      const double A = ad.a_coef;
      const double D = ad.d_coef;
      s.a_self = 1.0 + th * (c0s + (D * D + 2.0 * A) * c - 4.0 * D * r);
      s.a_cross = th * (-D * c + r);
      s.a_lin = 1.0 + th * (A * c - D * r);
      break;
    }
    case EstimatorKind::t6: {
      const double w = spec.w;
      s.a_self = 1.0 + th * (w * c + c0s - 4.0 * w * r);
      s.a_cross = th * (-w * c + r);
      s.a_lin = 1.0 - th * (w * (w - 1.0) / 2.0 * c + w * r);
      break;
    }
    default:
      break;
  }
  s.a_self += load;
  return s;
}

// First-order bias. Does not depend on K or L; they are accepted so every
// theory entry point has the same shape.
inline double bias(const EstimatorSpec& spec, const DerivedCoefficients& d,
                   const PopulationMoments& m, double K, double L) {
  detail::check_rates(K, L);
  const double Y = m.mean_y;
  const double th = d.theta;
  const double c = d.c1 * d.c1;
  const double r = d.cross;
  auto t1_rel = [&](double al) {
    return th * ((1.0 - 3.0 * al + 2.0 * al * al) * c - (1.0 - 2.0 * al) * r);
  };
  auto t2_rel = [&](double a, double b, double p) {
    const auto ad = ad_coefficients(a, b, p);
    return th * (ad.a_coef * c - ad.d_coef * r);
  };
  auto t3_rel = [&](double w) { return -th * (w * (w - 1.0) / 2.0 * c + w * r); };
  switch (spec.kind) {
    case EstimatorKind::hh_mean:
    case EstimatorKind::regression:
      return 0.0;
    case EstimatorKind::ratio: return Y * th * (c - r);
    case EstimatorKind::product: return Y * th * r;
    case EstimatorKind::t1: return Y * t1_rel(spec.alpha);
    case EstimatorKind::t2: return Y * t2_rel(spec.a, spec.b, spec.p);
    case EstimatorKind::t3: return Y * t3_rel(spec.w);
    case EstimatorKind::t4:
      return Y * (spec.k_main - 1.0) + spec.k_main * Y * t1_rel(spec.alpha);
    case EstimatorKind::t5:
      return spec.k_main * Y * (1.0 + t2_rel(spec.a, spec.b, spec.p)) - Y;
    case EstimatorKind::t6:
      return (spec.k_main - 1.0) * Y + spec.k_main * Y * t3_rel(spec.w);
  }
  return 0.0;
}

inline MseReport mse_first_order(const EstimatorSpec& spec, const DerivedCoefficients& d,
                                 const PopulationMoments& m, double K, double L,
                                 ConstantsProvenance provenance = ConstantsProvenance::user_supplied) {
  const double Y = m.mean_y;
  const double X = m.mean_x;
  const double Y2 = Y * Y;
  const double th = d.theta;
  const double c = d.c1 * d.c1;
  const double c0s = d.c0 * d.c0;
  const double r = d.cross;
  const double nr = nr_term(m, K, L).value;

  MseReport rep;
  rep.estimator = spec;
  rep.constants_provenance = provenance;
  rep.bias = bias(spec, d, m, K, L);

  // Linear-in-e1 estimators: MSE = theta Y^2 [c0^2 + g^2 c1^2 - 2 g rho c0 c1] + NR
  auto linear = [&](double g) {
    rep.sampling_component = th * Y2 * (c0s + g * g * c - 2.0 * g * r);
    rep.nr_component = nr;
  };
  switch (spec.kind) {
    case EstimatorKind::hh_mean:
      rep.sampling_component = th * detail::intraclass_factor_y(m) * m.s2_y;
      rep.nr_component = nr;
      break;
    case EstimatorKind::ratio: linear(1.0); break;
    case EstimatorKind::product: linear(-1.0); break;
    case EstimatorKind::regression:
      rep.sampling_component = th * Y2 * c0s * (1.0 - m.rho * m.rho);
      rep.nr_component = nr;
      break;
    case EstimatorKind::t1: linear(1.0 - 2.0 * spec.alpha); break;
    case EstimatorKind::t2: linear(ad_coefficients(spec.a, spec.b, spec.p).d_coef); break;
    case EstimatorKind::t3: linear(spec.w); break;
    case EstimatorKind::t4:
    case EstimatorKind::t5:
    case EstimatorKind::t6: {
      const auto s = shrinkage_coefficients(spec, d, m, K, L);
      const double km = spec.k_main;
      const double ka = spec.k_aux;
      const double total = Y2 * (km * km * s.a_self - 2.0 * km * s.a_lin + 1.0) +
                           ka * ka * X * X * s.a_aux - 2.0 * km * ka * X * Y * s.a_cross;
      rep.nr_component = km * km * nr;
      rep.sampling_component = total - rep.nr_component;
      break;
    }
  }
  rep.mse = rep.sampling_component + rep.nr_component;
  return rep;
}

// Optimum shrinkage pair for the base constants already present in `spec`.
inline EstimatorSpec optimum_shrinkage(EstimatorSpec spec, const DerivedCoefficients& d,
                                       const PopulationMoments& m, double K, double L) {
  detail::require_auxiliary(d);
  const auto s = shrinkage_coefficients(spec, d, m, K, L);
  const double det = s.a_self * s.a_aux - s.a_cross * s.a_cross;
  if (!(det > 0.0)) {
    fail(ErrorCode::singular, std::string(to_string(spec.kind)) +
                                  " optimum: singular quadratic (a_self*a_aux - a_cross^2 <= 0)");
  }
  spec.k_main = s.a_lin * s.a_aux / det;
  spec.k_aux = (m.mean_y / m.mean_x) * s.a_cross * s.a_lin / det;
  return spec;
}

// rho c0 / c1: the value of the first-order coefficient that zeroes the
// derivative of every linear-in-e1 MSE.
inline double matching_coefficient(const DerivedCoefficients& d) {
  detail::require_auxiliary(d);
  return d.cross / (d.c1 * d.c1);
}

// t2 constants with A = 0 and D = target: a = 1 + D, b = 1, p = 1.
inline EstimatorSpec t2_with_zero_a(double target_d) {
  return EstimatorSpec::t2(1.0 + target_d, 1.0, 1.0);
}

// Closed-form optimum constants. Shrinkage families keep their base at the
// matching constant (where a_cross = 0) and optimize the pair (K, K').
inline EstimatorSpec optimum_constants(EstimatorKind family, const DerivedCoefficients& d,
                                       const PopulationMoments& m, double K, double L) {
  switch (family) {
    case EstimatorKind::hh_mean: return EstimatorSpec::hh_mean();
    case EstimatorKind::ratio: return EstimatorSpec::ratio();
    case EstimatorKind::product: return EstimatorSpec::product();
    case EstimatorKind::regression: return EstimatorSpec::regression();
    default: break;
  }
  const double g = matching_coefficient(d);
  switch (family) {
    case EstimatorKind::t1: return EstimatorSpec::t1(0.5 * (1.0 - g));
    case EstimatorKind::t2: return t2_with_zero_a(g);
    case EstimatorKind::t3: return EstimatorSpec::t3(g);
    case EstimatorKind::t4:
      return optimum_shrinkage(EstimatorSpec::t4(0.5 * (1.0 - g), 1.0, 0.0), d, m, K, L);
    case EstimatorKind::t5: {
      auto base = t2_with_zero_a(g);
      return optimum_shrinkage(EstimatorSpec::t5(base.a, base.b, base.p, 1.0, 0.0), d, m, K, L);
    }
    case EstimatorKind::t6:
      return optimum_shrinkage(EstimatorSpec::t6(g, 1.0, 0.0), d, m, K, L);
    default: break;
  }
  return EstimatorSpec::hh_mean();
}

inline MseReport optimum_report(EstimatorKind family, const DerivedCoefficients& d,
                                const PopulationMoments& m, double K, double L) {
  return mse_first_order(optimum_constants(family, d, m, K, L), d, m, K, L,
                         ConstantsProvenance::closed_form);
}

// Percent relative efficiency against the Hansen-Hurwitz mean.
inline double pre(const PopulationMoments& m, const DerivedCoefficients& /*d*/,
                  const MseReport& target, double K, double L) {
  if (!(target.mse > 0.0)) {
    fail(ErrorCode::domain, std::string("relative efficiency undefined: MSE of ") +
                                std::string(to_string(target.estimator.kind)) + " is not positive");
  }
  if (target.estimator.kind == EstimatorKind::hh_mean) return 100.0;
  return 100.0 * variance_hh(m, K, L) / target.mse;
}

}  // namespace syssamp
