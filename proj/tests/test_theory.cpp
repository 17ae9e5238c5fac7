#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace syssamp;
using Catch::Approx;

namespace {

const std::vector<double> k_grid{0.1, 0.2, 0.3, 0.4};
const std::vector<double> l_grid{2.0, 2.5, 3.0, 3.5};

}  // namespace

TEST_CASE("non-response term") {
  const auto m = testing::forest_moments();
  CHECK(nr_term(m, 0.1, 2.0).value == Approx(113.0375).epsilon(1e-6));
  CHECK(nr_term(m, 0.4, 3.5).value == Approx(1130.375).epsilon(1e-6));
  CHECK(nr_term(m, 0.0, 3.0).value == 0.0);
  CHECK(nr_term(m, 0.3, 1.0).value == 0.0);
  auto no_group = m;
  no_group.s2_y2.reset();
  CHECK_THROWS_AS(nr_term(no_group, 0.1, 2.0), Error);
  CHECK(nr_term(no_group, 0.0, 2.0).value == 0.0);
  CHECK_THROWS_AS(nr_term(m, 1.0, 2.0), Error);
  CHECK_THROWS_AS(nr_term(m, 0.1, 0.9), Error);
}

TEST_CASE("variance of the Hansen-Hurwitz mean") {
  CHECK(variance_hh(testing::forest_moments(), 0.1, 2.0) == Approx(21190.7).epsilon(1e-5));
  const auto toy = compute_moments(testing::toy_population(), 2);
  CHECK(variance_hh(toy, 0.0, 2.0) == Approx(0.25).epsilon(1e-12));
  CHECK(variance_hh(toy, 0.0, 2.0) == Approx(enumerate_variance(testing::toy_population(), 2)));
  auto balanced = testing::forest_moments();
  balanced.rho_y_intra = -1.0 / 15.0;
  CHECK(variance_hh(balanced, 0.0, 1.0) == Approx(0.0).margin(1e-9));
}

TEST_CASE("A and D coefficients") {
  const auto r = ad_coefficients(1.0, 0.0, 1.0);
  CHECK(r.d_coef == 1.0);
  CHECK(r.a_coef == 1.0);
  CHECK(ad_coefficients(2.5, 2.5, 1.7).d_coef == 0.0);
  const auto z = ad_coefficients(3.0, -1.0, 0.0);
  CHECK(z.a_coef == 0.0);
  CHECK(z.d_coef == 0.0);
  // A = [D^2 + D(u + v)] / 2 with u = 1 - a, v = 1 - b
  for (double a : {-1.0, 0.3, 2.0}) {
    for (double b : {-0.5, 0.0, 1.5}) {
      for (double p : {-1.0, 0.5, 2.0}) {
        const auto c = ad_coefficients(a, b, p);
        const double D = c.d_coef;
        CHECK(c.a_coef == Approx((D * D + D * ((1 - a) + (1 - b))) / 2).margin(1e-12));
      }
    }
  }
}

TEST_CASE("first-order bias") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  CHECK(bias(EstimatorSpec::t1(0.0), d, m, 0.1, 2.0) == Approx(-5.80).margin(0.01));
  CHECK(bias(EstimatorSpec::t1(0.0), d, m, 0.1, 2.0) == Approx(bias(EstimatorSpec::ratio(), d, m, 0.1, 2.0)));
  CHECK(bias(EstimatorSpec::t3(0.0), d, m, 0.1, 2.0) == 0.0);
  CHECK(bias(EstimatorSpec::t2(1.3, 0.2, 0.0), d, m, 0.1, 2.0) == 0.0);
  CHECK(bias(EstimatorSpec::hh_mean(), d, m, 0.1, 2.0) == 0.0);
  CHECK(bias(EstimatorSpec::t6(0.7, 1.0, 0.0), d, m, 0.1, 2.0) ==
        Approx(bias(EstimatorSpec::t3(0.7), d, m, 0.1, 2.0)));
}

TEST_CASE("ratio and t1 at alpha = 0 coincide") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto m = testing::random_moments(rng);
    const auto d = derive_coefficients(m);
    const double a = mse_first_order(EstimatorSpec::ratio(), d, m, 0.2, 2.0).mse;
    const double b = mse_first_order(EstimatorSpec::t1(0.0), d, m, 0.2, 2.0).mse;
    CHECK(testing::rel_diff(a, b) < 1e-12);
    const double p = mse_first_order(EstimatorSpec::product(), d, m, 0.2, 2.0).mse;
    const double q = mse_first_order(EstimatorSpec::t1(1.0), d, m, 0.2, 2.0).mse;
    CHECK(testing::rel_diff(p, q) < 1e-12);
  }
}

TEST_CASE("t3 at w = 0 is the Hansen-Hurwitz variance") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  const auto r = mse_first_order(EstimatorSpec::t3(0.0), d, m, 0.1, 2.0);
  CHECK(r.mse == Approx(variance_hh(m, 0.1, 2.0)).epsilon(1e-12));
  CHECK(r.nr_component == Approx(113.0375).epsilon(1e-6));
}

TEST_CASE("optimum constants for the forest moments") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  const double w = matching_coefficient(d);
  CHECK(w == Approx(1.1310).margin(1e-4));
  CHECK(optimum_constants(EstimatorKind::t1, d, m, 0.1, 2.0).alpha == Approx(-0.0655).margin(1e-4));
  CHECK(optimum_constants(EstimatorKind::t3, d, m, 0.1, 2.0).w == Approx(w));
  const auto t2 = optimum_constants(EstimatorKind::t2, d, m, 0.1, 2.0);
  CHECK(ad_coefficients(t2.a, t2.b, t2.p).d_coef == Approx(w));
  CHECK(ad_coefficients(t2.a, t2.b, t2.p).a_coef == Approx(0.0).margin(1e-15));

  const auto t6 = optimum_constants(EstimatorKind::t6, d, m, 0.1, 2.0);
  CHECK(t6.w == Approx(w));
  CHECK(t6.k_main == Approx(1.2287).margin(1e-4));
  CHECK(t6.k_aux == Approx(0.0).margin(1e-9));
  CHECK(shrinkage_coefficients(t6, d, m, 0.1, 2.0).a_cross == Approx(0.0).margin(1e-15));
  const auto r = optimum_report(EstimatorKind::t6, d, m, 0.1, 2.0);
  CHECK(r.mse == Approx(2521.5).epsilon(1e-3));
  CHECK(r.constants_provenance == ConstantsProvenance::closed_form);
}

TEST_CASE("no correlation means no auxiliary adjustment") {
  auto m = testing::forest_moments();
  m.rho = 0.0;
  const auto d = derive_coefficients(m);
  CHECK(optimum_constants(EstimatorKind::t1, d, m, 0.1, 2.0).alpha == Approx(0.5));
  CHECK(optimum_constants(EstimatorKind::t3, d, m, 0.1, 2.0).w == Approx(0.0).margin(1e-15));
  const auto t2 = optimum_constants(EstimatorKind::t2, d, m, 0.1, 2.0);
  CHECK(ad_coefficients(t2.a, t2.b, t2.p).d_coef == Approx(0.0).margin(1e-15));
}

TEST_CASE("optimum t1, t2 and t3 share the regression bound") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto m = testing::random_moments(rng);
    const auto d = derive_coefficients(m);
    const double K = 0.05 + 0.4 * (i % 5) / 4.0;
    const double L = 1.0 + 0.5 * (i % 7);
    const double bound = d.theta * m.mean_y * m.mean_y * d.c0 * d.c0 * (1 - m.rho * m.rho) +
                         nr_term(m, K, L).value;
    for (auto f : {EstimatorKind::t1, EstimatorKind::t2, EstimatorKind::t3, EstimatorKind::regression}) {
      CHECK(testing::rel_diff(optimum_report(f, d, m, K, L).mse, bound) < 1e-12);
    }
  }
}

TEST_CASE("shrinkage optima dominate their base families") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto m = testing::random_moments(rng);
    const auto d = derive_coefficients(m);
    const double K = 0.1 * (i % 5);
    const double L = 1.0 + 0.75 * (i % 4);
    const std::pair<EstimatorKind, EstimatorKind> pairs[] = {
        {EstimatorKind::t4, EstimatorKind::t1},
        {EstimatorKind::t5, EstimatorKind::t2},
        {EstimatorKind::t6, EstimatorKind::t3}};
    for (auto [shrunk, base] : pairs) {
      const double a = optimum_report(shrunk, d, m, K, L).mse;
      const double b = optimum_report(base, d, m, K, L).mse;
      CHECK(a <= b * (1 + 1e-12));
    }
  }
}

TEST_CASE("a_cross vanishes at the matching constant") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto m = testing::random_moments(rng);
    const auto d = derive_coefficients(m);
    const double g = matching_coefficient(d);
    const auto t2 = t2_with_zero_a(g);
    const EstimatorSpec specs[] = {EstimatorSpec::t4(0.5 * (1 - g), 1, 0),
                                   EstimatorSpec::t5(t2.a, t2.b, t2.p, 1, 0),
                                   EstimatorSpec::t6(g, 1, 0)};
    for (const auto& s : specs) {
      const auto c = shrinkage_coefficients(s, d, m, 0.2, 2.0);
      CHECK(std::abs(c.a_cross) <= 1e-14 * std::max(1.0, c.a_aux));
    }
  }
}

TEST_CASE("unit shrinkage over a neutral base is the Hansen-Hurwitz variance") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  CHECK(mse_first_order(EstimatorSpec::t6(0.0, 1, 0), d, m, 0.2, 3.0).mse ==
        Approx(variance_hh(m, 0.2, 3.0)).epsilon(1e-12));
  CHECK(mse_first_order(EstimatorSpec::t5(1.0, 1.0, 1.0, 1, 0), d, m, 0.2, 3.0).mse ==
        Approx(variance_hh(m, 0.2, 3.0)).epsilon(1e-12));
}

TEST_CASE("relative efficiency") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  CHECK(pre(m, d, optimum_report(EstimatorKind::hh_mean, d, m, 0.3, 2.5), 0.3, 2.5) == 100.0);
  CHECK(pre(m, d, optimum_report(EstimatorKind::t3, d, m, 0.1, 2.0), 0.1, 2.0) ==
        Approx(407.4884).margin(5e-5));
  CHECK(pre(m, d, optimum_report(EstimatorKind::t3, d, m, 0.4, 3.5), 0.4, 3.5) ==
        Approx(357.1773).margin(5e-5));
  MseReport zero;
  zero.estimator = EstimatorSpec::t3(1.0);
  CHECK_THROWS_AS(pre(m, d, zero, 0.1, 2.0), Error);
}

TEST_CASE("relative efficiency falls with K and with L") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  for (auto f : {EstimatorKind::ratio, EstimatorKind::regression, EstimatorKind::t1, EstimatorKind::t2,
                 EstimatorKind::t3, EstimatorKind::t4, EstimatorKind::t5, EstimatorKind::t6}) {
    auto value = [&](double K, double L) { return pre(m, d, optimum_report(f, d, m, K, L), K, L); };
    for (double L : l_grid) {
      for (std::size_t i = 1; i < k_grid.size(); ++i) CHECK(value(k_grid[i], L) < value(k_grid[i - 1], L));
    }
    for (double K : k_grid) {
      for (std::size_t i = 1; i < l_grid.size(); ++i) CHECK(value(K, l_grid[i]) < value(K, l_grid[i - 1]));
    }
  }
}

TEST_CASE("full response reproduces the no-non-response forms") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  for (auto f : {EstimatorKind::ratio, EstimatorKind::t3, EstimatorKind::t6}) {
    const auto a = optimum_report(f, d, m, 0.0, 3.0);
    const auto b = optimum_report(f, d, m, 0.3, 1.0);
    CHECK(a.nr_component == 0.0);
    CHECK(b.nr_component == 0.0);
    CHECK(a.mse == b.mse);
  }
}

TEST_CASE("degenerate auxiliary variable is reported") {
  auto m = testing::forest_moments();
  m.N = 180;
  m.n = 5;
  m.k = 36;
  m.rho_x_intra = -0.25;  // 1 + (n-1) rho_x = 0 exactly
  const auto d = derive_coefficients(m);
  CHECK(d.c1 == 0.0);
  CHECK_THROWS_AS(optimum_constants(EstimatorKind::t3, d, m, 0.1, 2.0), Error);
  CHECK_THROWS_AS(optimum_constants(EstimatorKind::t6, d, m, 0.1, 2.0), Error);
  CHECK_NOTHROW(optimum_constants(EstimatorKind::regression, d, m, 0.1, 2.0));
}
