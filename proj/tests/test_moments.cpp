#include <catch_amalgamated.hpp>

#include <fstream>

#include "support.hpp"

using namespace syssamp;
using Catch::Approx;

namespace {

std::string write_file(const std::string& name, const std::string& body) {
  const auto path = testing::temp_path(name);
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("load_population reads a small file in order") {
  const auto path = write_file("four.csv", "y,x\n1,2\n2,4\n3,6\n4,8\n");
  const auto pop = load_population(path);
  REQUIRE(pop.size() == 4);
  CHECK(pop.y == std::vector<double>{1, 2, 3, 4});
  CHECK(pop.x == std::vector<double>{2, 4, 6, 8});
  CHECK_FALSE(pop.nr_stratum);
}

TEST_CASE("load_population names the offending row") {
  const auto path = write_file("bad.csv", "y,x\n1,2\n2,4\nabc,6\n4,8\n");
  try {
    load_population(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("load_population column selection and stratum flags") {
  const auto path = write_file("cols.csv", "id;area;vol;nr\n1;2;10;0\n2;4;20;1\n3;6;30;0\n4;8;40;1\n");
  ColumnMapping cols{"vol", "1", std::string("nr"), ';'};
  const auto pop = load_population(path, cols);
  CHECK(pop.y == std::vector<double>{10, 20, 30, 40});
  CHECK(pop.x == std::vector<double>{2, 4, 6, 8});
  REQUIRE(pop.nr_stratum);
  CHECK(pop.stratum_size() == 2);

  const auto bad = write_file("flag.csv", "y,x,nr\n1,2,0\n2,3,2\n");
  CHECK_THROWS_AS(load_population(bad, ColumnMapping{"y", "x", std::string("nr"), ','}), Error);
  CHECK_THROWS_AS(load_population(path, ColumnMapping{"nope", "x", std::nullopt, ';'}), Error);
  try {
    load_population(testing::temp_path("missing.csv"));
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(e.is_input_error());
  }
}

TEST_CASE("save_population round-trips exactly") {
  auto pop = synthesize_population(64, 8, 0.6, 0.3, 0.25, 3);
  const auto path = testing::temp_path("roundtrip.csv");
  save_population(path, pop);
  const auto back = load_population(path, ColumnMapping{"y", "x", std::string("nr"), ','});
  CHECK(back.y == pop.y);
  CHECK(back.x == pop.x);
  CHECK(*back.nr_stratum == *pop.nr_stratum);
}

TEST_CASE("compute_moments on the four-unit toy population") {
  Population p;
  p.y = {1, 2, 3, 4};
  p.x = {1, 2, 3, 4};
  const auto m = compute_moments(p, 2);
  CHECK(m.N == 4);
  CHECK(m.k == 2);
  CHECK(m.mean_y == Approx(2.5));
  CHECK(m.s2_y == Approx(5.0 / 3.0));
  CHECK(m.rho == Approx(1.0));
  CHECK_FALSE(m.s2_y2);

  p.nr_stratum = std::vector<bool>{false, false, true, true};
  CHECK(*compute_moments(p, 2).s2_y2 == Approx(0.5));
}

TEST_CASE("intraclass correlation by enumeration") {
  Population p;
  p.y = {1, 2, 3, 4};
  p.x = {4, 1, 3, 2};
  const auto [ry, rx] = systematic_correlations(p, 2);
  CHECK(ry == Approx(-0.6));
  CHECK(rx >= -1.0);

  // Every sample internally constant: the upper boundary.
  Population q;
  q.y = {1, 5, 1, 5};
  q.x = {2, 3, 2, 3};
  CHECK(systematic_correlations(q, 2).first == Approx(1.0));

  Population flat;
  flat.y = {7, 7, 7, 7};
  flat.x = {1, 2, 3, 4};
  CHECK_THROWS_AS(systematic_correlations(flat, 2), Error);
  CHECK_THROWS_AS(compute_moments(p, 3), Error);
}

TEST_CASE("intraclass correlation ignores shifts and positive scaling") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  Population p;
  for (int i = 0; i < 48; ++i) {
    p.y.push_back(z(rng));
    p.x.push_back(z(rng));
  }
  const auto base = systematic_correlations(p, 6);
  Population q = p;
  for (auto& v : q.y) v = 3.5 * v + 100.0;
  for (auto& v : q.x) v = 0.2 * v - 40.0;
  const auto moved = systematic_correlations(q, 6);
  CHECK(moved.first == Approx(base.first).epsilon(1e-9));
  CHECK(moved.second == Approx(base.second).epsilon(1e-9));
}

TEST_CASE("derived coefficients for the forest moments") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  CHECK(d.theta == Approx(175.0 / 2816.0).epsilon(1e-14));
  CHECK(d.c0 * d.c0 == Approx(4.2466).epsilon(1e-4));
  CHECK(d.c1 * d.c1 == Approx(2.5185).epsilon(1e-4));
  CHECK(d.rho_star == Approx(1.0));
  CHECK(d.cross == Approx(m.rho * d.c0 * d.c1));
}

TEST_CASE("no intraclass effect leaves plain coefficients of variation") {
  const auto d = derive_coefficients(testing::forest_moments(0.0));
  CHECK(d.c0 == Approx(d.c_y));
  CHECK(d.c1 == Approx(d.c_x));
  CHECK(d.rho_star == Approx(1.0));
}

TEST_CASE("cross term computed two ways agrees") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto m = testing::random_moments(rng);
    const auto d = derive_coefficients(m);
    const double n = static_cast<double>(m.n);
    const double other = m.rho * d.c_y * d.c_x *
                         std::sqrt((1 + (n - 1) * m.rho_y_intra) * (1 + (n - 1) * m.rho_x_intra));
    CHECK(testing::rel_diff(d.cross, other) < 1e-12);
  }
}

TEST_CASE("moment validation") {
  auto m = testing::forest_moments();
  m.rho = 1.2;
  CHECK_THROWS_AS(m.validate(), Error);
  m = testing::forest_moments();
  m.N = 177;
  m.k = 11;
  CHECK_THROWS_AS(m.validate(), Error);
  m = testing::forest_moments();
  m.rho_y_intra = -0.5;
  CHECK_THROWS_AS(derive_coefficients(m), Error);
  m = testing::forest_moments();
  m.mean_x = 0.0;
  CHECK_THROWS_AS(derive_coefficients(m), Error);
}
