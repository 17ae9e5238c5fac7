#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace syssamp;
using Catch::Approx;

namespace {

const std::vector<double> k_grid{0.1, 0.2, 0.3, 0.4};
const std::vector<double> l_grid{2.0, 2.5, 3.0, 3.5};
const std::vector<EstimatorKind> columns{EstimatorKind::hh_mean, EstimatorKind::t1, EstimatorKind::t2,
                                         EstimatorKind::t3,      EstimatorKind::t4, EstimatorKind::t5,
                                         EstimatorKind::t6};

struct Run {
  PopulationMoments m = testing::forest_moments();
  DerivedCoefficients d = derive_coefficients(m);
  PreTable table = pre_table(m, d, columns, k_grid, l_grid);
};

const ColumnDiscrepancy& column(const DiscrepancyReport& r, EstimatorKind k) {
  for (const auto& c : r.columns) {
    if (c.family == k) return c;
  }
  throw std::runtime_error("column missing");
}

}  // namespace

TEST_CASE("table rows run K-major, L-minor") {
  Run run;
  REQUIRE(run.table.rows.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(run.table.rows[i].k_rate == k_grid[i / 4]);
    CHECK(run.table.rows[i].l_factor == l_grid[i % 4]);
  }
  CHECK(run.table.column_of(EstimatorKind::t6) == 6u);
  CHECK_FALSE(run.table.column_of(EstimatorKind::ratio));
}

TEST_CASE("t2 column and t6 corner cell") {
  Run run;
  const auto c2 = *run.table.column_of(EstimatorKind::t2);
  const double expected[] = {407.4884, 404.1824, 400.9468, 397.7794};
  for (std::size_t i = 0; i < 4; ++i) CHECK(run.table.rows[i].pre[c2] == Approx(expected[i]).margin(5e-5));
  const auto c6 = *run.table.column_of(EstimatorKind::t6);
  CHECK(run.table.rows[0].pre[c6] == Approx(840.4659).margin(5e-5));
  for (const auto& row : run.table.rows) CHECK(row.pre[0] == 100.0);
}

TEST_CASE("oracle column agrees with the closed form") {
  Run run;
  for (const auto& row : run.table.rows) {
    CHECK(std::isnan(row.oracle_pre[0]));
    for (std::size_t c = 1; c < columns.size(); ++c) {
      CHECK(testing::rel_diff(row.oracle_pre[c], row.pre[c]) < 1e-6);
    }
  }
}

TEST_CASE("full-response grid") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  const auto t = pre_table(m, d, columns, {0.0}, l_grid);
  for (const auto& row : t.rows) {
    CHECK(row.pre[0] == 100.0);
    for (double v : row.pre) CHECK(std::isfinite(v));
    CHECK(row.pre == t.rows[0].pre);
  }
  CHECK_THROWS_AS(pre_table(m, d, columns, {}, l_grid), Error);
}

TEST_CASE("discrepancy report for the forest configuration") {
  Run run;
  const auto rep = discrepancy_report(run.m, run.d, run.table);
  CHECK(column(rep, EstimatorKind::t1).status == ReproductionStatus::flagged);
  CHECK(column(rep, EstimatorKind::t2).status == ReproductionStatus::pass);
  CHECK(column(rep, EstimatorKind::t3).status == ReproductionStatus::pass);
  CHECK(column(rep, EstimatorKind::t4).status == ReproductionStatus::pass);
  CHECK(column(rep, EstimatorKind::t5).status == ReproductionStatus::flagged_near);
  CHECK(column(rep, EstimatorKind::t6).status == ReproductionStatus::pass);
  CHECK(rep.t1_vs_t3_max_rel < 1e-9);
  CHECK(column(rep, EstimatorKind::t1).cells[0].published == 703.4864);
  CHECK(column(rep, EstimatorKind::t1).cells[0].computed == Approx(407.4884).margin(5e-5));
  const auto& t5 = column(rep, EstimatorKind::t5);
  CHECK(t5.cells[0].rel_dev < 0.01);
  CHECK(t5.max_rel_dev < 0.01);
}

TEST_CASE("single-cell report and degenerate tolerance") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  const auto t = pre_table(m, d, columns, {0.1}, {2.0});
  const auto rep = discrepancy_report(m, d, t);
  for (const auto& c : rep.columns) CHECK(c.cells.size() == 1);

  Run run;
  const auto open = discrepancy_report(
      run.m, run.d, run.table, {}, DiscrepancyOptions::uniform({false, std::numeric_limits<double>::infinity()}));
  for (const auto& c : open.columns) CHECK(c.status == ReproductionStatus::pass);
}

TEST_CASE("grid cells without a published value") {
  const auto m = testing::forest_moments();
  const auto d = derive_coefficients(m);
  const auto t = pre_table(m, d, columns, {0.15}, {2.0});
  for (const auto& c : discrepancy_report(m, d, t).columns) CHECK(c.status == ReproductionStatus::no_reference);
  CHECK(published_value(EstimatorKind::t6, 0.4, 3.5) == 551.4543);
  CHECK_FALSE(published_value(EstimatorKind::ratio, 0.1, 2.0));
}

TEST_CASE("t4 column with the matching base") {
  Run run;
  PreTableOptions opt;
  opt.t4_alpha.reset();
  const auto t = pre_table(run.m, run.d, {EstimatorKind::t1, EstimatorKind::t4}, k_grid, l_grid, opt);
  for (const auto& row : t.rows) CHECK(row.pre[1] >= row.pre[0]);
}
