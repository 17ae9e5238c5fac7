#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "syssamp/error.hpp"

namespace syssamp {

// Unit-level (y, x) records in population order. Order matters: the k
// systematic samples are the residue classes of the position modulo k.
struct Population {
  std::vector<double> y;
  std::vector<double> x;
  // Designated non-response group, one flag per unit.
  std::optional<std::vector<bool>> nr_stratum;

  [[nodiscard]] std::size_t size() const noexcept { return y.size(); }

  void validate() const {
    if (y.size() != x.size()) {
      fail(ErrorCode::length_mismatch,
           "population: y has " + std::to_string(y.size()) + " values but x has " +
               std::to_string(x.size()));
    }
    if (y.size() < 2) {
      fail(ErrorCode::too_few_units,
           "population: need at least 2 units, got " + std::to_string(y.size()));
    }
    if (nr_stratum) {
      if (nr_stratum->size() != y.size()) {
        fail(ErrorCode::length_mismatch, "population: stratum flags do not match N");
      }
      std::size_t members = 0;
      for (bool f : *nr_stratum) members += f ? 1 : 0;
      if (members == 0 || members == y.size()) {
        fail(ErrorCode::invalid_argument,
             "population: non-response stratum needs at least one member and one non-member");
      }
    }
  }

  [[nodiscard]] std::size_t stratum_size() const {
    if (!nr_stratum) return 0;
    std::size_t members = 0;
    for (bool f : *nr_stratum) members += f ? 1 : 0;
    return members;
  }
};

// Population-level symbols consumed by the closed-form theory. Either computed
// from a Population or supplied directly (parameter mode).
struct PopulationMoments {
  std::size_t N = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double mean_y = 0.0;
  double mean_x = 0.0;
  double s2_y = 0.0;   // divisor N-1
  double s2_x = 0.0;   // divisor N-1
  double rho = 0.0;    // unit-level correlation of y and x
  double rho_y_intra = 0.0;
  double rho_x_intra = 0.0;
  std::optional<double> s2_y2;  // non-response group mean square, divisor size-1

  void validate() const {
    if (n < 2) fail(ErrorCode::invalid_argument, "moments: sample size n must be >= 2");
    if (N < n || N % n != 0) {
      fail(ErrorCode::not_divisible,
           "moments: N=" + std::to_string(N) + " is not a multiple of n=" + std::to_string(n));
    }
    if (k != N / n) {
      fail(ErrorCode::invalid_argument,
           "moments: k=" + std::to_string(k) + " disagrees with N/n=" + std::to_string(N / n));
    }
    if (!(s2_y > 0.0) || !(s2_x > 0.0)) {
      fail(ErrorCode::zero_variance, "moments: s2_y and s2_x must be positive");
    }
    if (s2_y2 && !(*s2_y2 >= 0.0)) {
      fail(ErrorCode::out_of_range, "moments: s2_y2 must be non-negative");
    }
    if (!(std::abs(rho) <= 1.0)) fail(ErrorCode::out_of_range, "moments: |rho| must be <= 1");
    const double lower = -1.0 / static_cast<double>(n - 1);
    // Slack for values produced by exact enumeration, which can sit on the boundary.
    constexpr double slack = 1e-12;
    for (auto [name, value] : {std::pair{"rho_y_intra", rho_y_intra},
                               std::pair{"rho_x_intra", rho_x_intra}}) {
      if (!(value >= lower - slack && value <= 1.0 + slack)) {
        fail(ErrorCode::out_of_range, std::string("moments: ") + name + " outside [-1/(n-1), 1]");
      }
    }
    if (mean_x == 0.0) fail(ErrorCode::domain, "moments: mean_x must be non-zero");
    if (mean_y == 0.0) fail(ErrorCode::domain, "moments: mean_y must be non-zero");
  }
};

struct DerivedCoefficients {
  double theta = 0.0;  // (N-1)/(nN)
  double c_y = 0.0;
  double c_x = 0.0;
  double c0 = 0.0;  // sqrt(1+(n-1)rho_y_intra) * c_y
  double c1 = 0.0;  // sqrt(1+(n-1)rho_x_intra) * c_x
  double rho_star = 0.0;
  double k1 = 0.0;  // rho * c_y / c_x

  // rho * c0 * c1: the cross term shared by every first-order MSE.
  double cross = 0.0;
};

// Column selection for delimiter-separated population files. A selector made
// only of digits is a 0-based column index, anything else is a header name.
struct ColumnMapping {
  std::string y = "y";
  std::string x = "x";
  std::optional<std::string> stratum;
  char delimiter = ',';
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(delim, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (s.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::size_t resolve_column(const std::vector<std::string_view>& header,
                                  const std::string& selector, const std::string& role) {
  const bool numeric = !selector.empty() &&
                       selector.find_first_not_of("0123456789") == std::string::npos;
  if (numeric) {
    const auto idx = static_cast<std::size_t>(std::stoul(selector));
    if (idx >= header.size()) {
      fail(ErrorCode::parse, role + " column index " + selector + " out of range (" +
                                 std::to_string(header.size()) + " columns)");
    }
    return idx;
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == selector) return i;
  }
  fail(ErrorCode::parse, role + " column '" + selector + "' not found in header");
}

}  // namespace detail

// Reads a header row followed by one row per unit. Rows keep file order.
inline Population load_population(const std::string& path, const ColumnMapping& columns = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open population file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse, "population file '" + path + "' is empty");
  const std::string header_line = line;
  const auto header = detail::split(header_line, columns.delimiter);
  const auto y_col = detail::resolve_column(header, columns.y, "y");
  const auto x_col = detail::resolve_column(header, columns.x, "x");
  std::optional<std::size_t> s_col;
  if (columns.stratum) s_col = detail::resolve_column(header, *columns.stratum, "stratum");
  const std::string y_name(header[y_col]);
  const std::string x_name(header[x_col]);

  Population pop;
  std::vector<bool> flags;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split(line, columns.delimiter);
    const auto needed = std::max({y_col, x_col, s_col.value_or(0)}) + 1;
    if (cells.size() < needed) {
      fail(ErrorCode::length_mismatch, "row " + std::to_string(row) + ": expected at least " +
                                           std::to_string(needed) + " columns, found " +
                                           std::to_string(cells.size()));
    }
    auto cell = [&](std::size_t col, const std::string& name) {
      auto v = detail::parse_double(cells[col]);
      if (!v) {
        fail(ErrorCode::parse, "row " + std::to_string(row) + ", column '" + name +
                                   "': non-numeric value '" + std::string(cells[col]) + "'");
      }
      return *v;
    };
    pop.y.push_back(cell(y_col, y_name));
    pop.x.push_back(cell(x_col, x_name));
    if (s_col) {
      const auto flag = cells[*s_col];
      if (flag != "0" && flag != "1") {
        fail(ErrorCode::parse, "row " + std::to_string(row) + ", column '" +
                                   std::string(header[*s_col]) + "': stratum flag must be 0 or 1, got '" +
                                   std::string(flag) + "'");
      }
      flags.push_back(flag == "1");
    }
  }
  if (s_col) pop.nr_stratum = std::move(flags);
  pop.validate();
  return pop;
}

// Writes y, x and (when designated) the 0/1 stratum flag as column "nr".
// Values use shortest round-trip formatting so reloading is exact.
inline void save_population(const std::string& path, const Population& pop) {
  pop.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write population file '" + path + "'");
  out << "y,x" << (pop.nr_stratum ? ",nr" : "") << '\n';
  char buf[64];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.write(buf, end - buf);
  };
  for (std::size_t i = 0; i < pop.size(); ++i) {
    put(pop.y[i]);
    out << ',';
    put(pop.x[i]);
    if (pop.nr_stratum) out << ',' << ((*pop.nr_stratum)[i] ? '1' : '0');
    out << '\n';
  }
  if (!out) fail(ErrorCode::io, "error while writing '" + path + "'");
}

namespace detail {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

inline double mean_square(std::span<const double> v, double m) {
  double s = 0.0;
  for (double e : v) s += (e - m) * (e - m);
  return s / static_cast<double>(v.size() - 1);
}

inline std::size_t interval(std::size_t N, std::size_t n) {
  if (n == 0 || N % n != 0) {
    fail(ErrorCode::not_divisible,
         "N=" + std::to_string(N) + " is not a multiple of n=" + std::to_string(n));
  }
  return N / n;
}

// Intraclass correlation within systematic samples, enumerating all k samples
// and all n(n-1) ordered pairs inside each.
inline double intraclass(std::span<const double> v, std::size_t n, const char* name) {
  const std::size_t N = v.size();
  const std::size_t k = interval(N, n);
  if (n < 2) fail(ErrorCode::invalid_argument, "intraclass correlation needs n >= 2");
  const double m = mean(v);
  double total_sq = 0.0;
  double pair_sum = 0.0;
  for (std::size_t start = 0; start < k; ++start) {
    double s = 0.0;
    double sq = 0.0;
    for (std::size_t j = start; j < N; j += k) {
      const double d = v[j] - m;
      s += d;
      sq += d * d;
    }
    pair_sum += s * s - sq;
    total_sq += sq;
  }
  if (!(total_sq > 0.0)) {
    fail(ErrorCode::zero_variance,
         std::string("intraclass correlation of ") + name + " undefined: variable is constant");
  }
  const double pairs = static_cast<double>(k) * static_cast<double>(n) * static_cast<double>(n - 1);
  return (pair_sum / pairs) / (total_sq / static_cast<double>(N));
}

}  // namespace detail

// (rho_y_intra, rho_x_intra) by exact enumeration.
inline std::pair<double, double> systematic_correlations(const Population& pop, std::size_t n) {
  pop.validate();
  return {detail::intraclass(pop.y, n, "y"), detail::intraclass(pop.x, n, "x")};
}

inline PopulationMoments compute_moments(const Population& pop, std::size_t n) {
  pop.validate();
  PopulationMoments m;
  m.N = pop.size();
  m.n = n;
  m.k = detail::interval(m.N, n);
  m.mean_y = detail::mean(pop.y);
  m.mean_x = detail::mean(pop.x);
  m.s2_y = detail::mean_square(pop.y, m.mean_y);
  m.s2_x = detail::mean_square(pop.x, m.mean_x);
  if (!(m.s2_y > 0.0) || !(m.s2_x > 0.0)) {
    fail(ErrorCode::zero_variance, "zero variance in y or x: correlation undefined");
  }
  double sxy = 0.0;
  for (std::size_t i = 0; i < m.N; ++i) sxy += (pop.y[i] - m.mean_y) * (pop.x[i] - m.mean_x);
  sxy /= static_cast<double>(m.N - 1);
  m.rho = sxy / std::sqrt(m.s2_y * m.s2_x);
  m.rho = std::clamp(m.rho, -1.0, 1.0);
  std::tie(m.rho_y_intra, m.rho_x_intra) = systematic_correlations(pop, n);
  if (pop.nr_stratum) {
    std::vector<double> group;
    for (std::size_t i = 0; i < m.N; ++i) {
      if ((*pop.nr_stratum)[i]) group.push_back(pop.y[i]);
    }
    // A single-member group has no observable spread.
    m.s2_y2 = group.size() < 2 ? 0.0 : detail::mean_square(group, detail::mean(group));
  }
  return m;
}

inline DerivedCoefficients derive_coefficients(const PopulationMoments& m) {
  m.validate();
  const double n = static_cast<double>(m.n);
  const double N = static_cast<double>(m.N);
  const double fy = 1.0 + (n - 1.0) * m.rho_y_intra;
  const double fx = 1.0 + (n - 1.0) * m.rho_x_intra;
  // Boundary values from enumeration can undershoot zero by rounding.
  constexpr double slack = 1e-12;
  if (fy < -slack || fx < -slack) {
    fail(ErrorCode::negative_intraclass_factor,
         "intraclass factor 1+(n-1)rho is negative: c0/c1 undefined");
  }
  DerivedCoefficients d;
  d.theta = (N - 1.0) / (n * N);
  d.c_y = std::sqrt(m.s2_y) / m.mean_y;
  d.c_x = std::sqrt(m.s2_x) / m.mean_x;
  d.c0 = std::sqrt(std::max(fy, 0.0)) * d.c_y;
  d.c1 = std::sqrt(std::max(fx, 0.0)) * d.c_x;
  d.rho_star = fx > 0.0 ? std::sqrt(std::max(fy, 0.0) / fx) : std::nan("");
  d.k1 = m.rho * d.c_y / d.c_x;
  d.cross = m.rho * d.c0 * d.c1;
  return d;
}

}  // namespace syssamp
